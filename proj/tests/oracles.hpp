#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. They work directly from paired observations and share no code with
// the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace reliagap::oracle {

struct Tally {
  std::int64_t both_yes = 0;  // r = 1, s = 1
  std::int64_t s_only = 0;    // r = 0, s = 1
  std::int64_t r_only = 0;    // r = 1, s = 0
  std::int64_t both_no = 0;   // r = 0, s = 0
  std::int64_t n = 0;
};

inline Tally tally(const std::vector<std::uint8_t>& r, const std::vector<std::uint8_t>& s) {
  Tally t;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] == 1 && s[i] == 1) ++t.both_yes;
    if (r[i] == 0 && s[i] == 1) ++t.s_only;
    if (r[i] == 1 && s[i] == 0) ++t.r_only;
    if (r[i] == 0 && s[i] == 0) ++t.both_no;
    ++t.n;
  }
  return t;
}

// kappa = 2 (ad - bc) / ((a + b)(b + d) + (a + c)(c + d)); 1 when both raters
// are constant and equal.
inline double kappa(const Tally& t) {
  const std::int64_t a = t.both_yes, b = t.s_only, c = t.r_only, d = t.both_no;
  const std::int64_t den = (a + b) * (b + d) + (a + c) * (c + d);
  if (den == 0) return 1.0;
  return static_cast<double>(2 * (a * d - b * c)) / static_cast<double>(den);
}

inline double pabak(const Tally& t) {
  const double agreement = static_cast<double>(t.both_yes + t.both_no) / static_cast<double>(t.n);
  return 2.0 * agreement - 1.0;
}

inline double bias_index(const Tally& t) {
  return static_cast<double>(t.s_only - t.r_only) / static_cast<double>(t.n);
}

inline double prevalence_index(const Tally& t) {
  return static_cast<double>(t.both_yes - t.both_no) / static_cast<double>(t.n);
}

// ICC(A,1) from explicit double sums over the n x 2 table, in long double.
// The residual sum of squares is obtained by subtraction from the total.
inline std::optional<double> icc_a1(const std::vector<double>& r, const std::vector<double>& s) {
  const std::size_t n = r.size();
  const long double k = 2.0L;
  long double grand = 0.0L;
  for (std::size_t i = 0; i < n; ++i) grand += static_cast<long double>(r[i]) + s[i];
  grand /= k * static_cast<long double>(n);

  long double ss_total = 0.0L;
  long double ss_rows = 0.0L;
  long double col_r = 0.0L;
  long double col_s = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    const long double x = r[i];
    const long double y = s[i];
    ss_total += (x - grand) * (x - grand) + (y - grand) * (y - grand);
    const long double row_mean = (x + y) / k;
    ss_rows += k * (row_mean - grand) * (row_mean - grand);
    col_r += x;
    col_s += y;
  }
  col_r /= static_cast<long double>(n);
  col_s /= static_cast<long double>(n);
  const long double ss_cols =
      static_cast<long double>(n) * ((col_r - grand) * (col_r - grand) + (col_s - grand) * (col_s - grand));
  const long double ss_error = ss_total - ss_rows - ss_cols;

  const long double nn = static_cast<long double>(n);
  const long double ms_rows = ss_rows / (nn - 1.0L);
  const long double ms_cols = ss_cols / (k - 1.0L);
  const long double ms_error = ss_error / ((nn - 1.0L) * (k - 1.0L));
  const long double den = ms_rows + (k - 1.0L) * ms_error + (k / nn) * (ms_cols - ms_error);
  if (den == 0.0L) return ss_total == 0.0L ? std::optional<double>(1.0) : std::nullopt;
  return static_cast<double>((ms_rows - ms_error) / den);
}

// Spearman rank correlation with average ranks for ties.
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t k = i; k <= j; ++k) out[order[k]] = avg;
      i = j + 1;
    }
    return out;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace reliagap::oracle
