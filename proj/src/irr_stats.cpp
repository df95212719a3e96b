#include "reliagap/irr_stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace reliagap::irr {

ConfusionMatrix2x2::ConfusionMatrix2x2(std::int64_t a, std::int64_t b, std::int64_t c,
                                       std::int64_t d)
    : a_(a), b_(b), c_(c), d_(d) {
  if (a < 0 || b < 0 || c < 0 || d < 0) {
    throw std::invalid_argument("confusion matrix counts must be non-negative");
  }
  if (a + b + c + d < 1) {
    throw std::invalid_argument("confusion matrix must hold at least one pair");
  }
}

ConfusionMatrix2x2 confusion_from_pairs(std::span<const std::uint8_t> rater_r,
                                        std::span<const std::uint8_t> rater_s) {
  if (rater_r.size() != rater_s.size()) {
    throw std::invalid_argument("paired predictions differ in length");
  }
  if (rater_r.empty()) {
    throw std::invalid_argument("empty pairs");
  }
  // counts[r][s]
  std::int64_t counts[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < rater_r.size(); ++i) {
    const auto r = rater_r[i];
    const auto s = rater_s[i];
    if (r > 1 || s > 1) {
      throw std::invalid_argument("binary prediction out of {0,1} at pair " + std::to_string(i));
    }
    ++counts[r][s];
  }
  return {counts[1][1], counts[0][1], counts[1][0], counts[0][0]};
}

double observed_agreement(const ConfusionMatrix2x2& m) {
  return static_cast<double>(m.a() + m.d()) / static_cast<double>(m.n());
}

double chance_agreement(const ConfusionMatrix2x2& m) {
  const std::int64_t n = m.n();
  return static_cast<double>(m.r1() * m.s1() + m.r0() * m.s0()) / static_cast<double>(n * n);
}

double cohen_kappa(const ConfusionMatrix2x2& m) {
  // (p_o - p_c) / (1 - p_c) scaled by n^2, so both terms stay integral.
  const std::int64_t n = m.n();
  const std::int64_t chance = m.r1() * m.s1() + m.r0() * m.s0();
  const std::int64_t numerator = n * (m.a() + m.d()) - chance;
  const std::int64_t denominator = n * n - chance;
  if (denominator == 0) {
    return m.a() + m.d() == n ? 1.0 : 0.0;
  }
  return static_cast<double>(numerator) / static_cast<double>(denominator);
}

double pabak(const ConfusionMatrix2x2& m) { return 2.0 * observed_agreement(m) - 1.0; }

double bias_index(const ConfusionMatrix2x2& m) {
  return static_cast<double>(m.b() - m.c()) / static_cast<double>(m.n());
}

double prevalence_index(const ConfusionMatrix2x2& m) {
  return static_cast<double>(m.a() - m.d()) / static_cast<double>(m.n());
}

KappaDecomposition kappa_decomposition(const ConfusionMatrix2x2& m) {
  KappaDecomposition out;
  out.ck = cohen_kappa(m);
  out.pabak = pabak(m);
  out.bi = bias_index(m);
  out.pi = prevalence_index(m);

  const double bi2 = out.bi * out.bi;
  const double pi2 = out.pi * out.pi;

  out.ck_bias_only = (out.pabak + bi2) / (1.0 + bi2);
  if (1.0 - pi2 > kDecompositionFloor) {
    out.ck_prevalence_only = (out.pabak - pi2) / (1.0 - pi2);
  }
  if (1.0 - pi2 + bi2 > kDecompositionFloor) {
    out.ck_reconstructed = (out.pabak - pi2 + bi2) / (1.0 - pi2 + bi2);
  }
  return out;
}

AnovaMeanSquares anova_mean_squares(std::span<const double> rater_r,
                                    std::span<const double> rater_s) {
  if (rater_r.size() != rater_s.size()) {
    throw std::invalid_argument("paired scores differ in length");
  }
  const std::size_t n = rater_r.size();
  if (n < 2) {
    throw std::invalid_argument("insufficient subjects");
  }
  constexpr std::size_t k = 2;

  double sum_r = 0.0;
  double sum_s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(rater_r[i]) || !std::isfinite(rater_s[i])) {
      throw std::invalid_argument("non-finite score at subject " + std::to_string(i));
    }
    sum_r += rater_r[i];
    sum_s += rater_s[i];
  }
  const double nd = static_cast<double>(n);
  const double mean_r = sum_r / nd;
  const double mean_s = sum_s / nd;
  const double grand = 0.5 * (mean_r + mean_s);

  AnovaMeanSquares ms;
  ms.n_subjects = n;
  ms.k_raters = k;
  const double first = rater_r[0];
  const auto same = [first](double v) { return v == first; };
  if (std::all_of(rater_r.begin(), rater_r.end(), same) &&
      std::all_of(rater_s.begin(), rater_s.end(), same)) {
    return ms;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double x_r = rater_r[i];
    const double x_s = rater_s[i];
    const double row_mean = 0.5 * (x_r + x_s);
    const double dev_row = row_mean - grand;
    ms.ssr += dev_row * dev_row;

    const double res_r = x_r - row_mean - mean_r + grand;
    const double res_s = x_s - row_mean - mean_s + grand;
    ms.sse += res_r * res_r + res_s * res_s;

    const double tot_r = x_r - grand;
    const double tot_s = x_s - grand;
    ms.sst += tot_r * tot_r + tot_s * tot_s;
  }
  ms.ssr *= static_cast<double>(k);
  ms.ssc = nd * ((mean_r - grand) * (mean_r - grand) + (mean_s - grand) * (mean_s - grand));

  ms.msr = ms.ssr / (nd - 1.0);
  ms.msc = ms.ssc / static_cast<double>(k - 1);
  ms.mse = ms.sse / ((nd - 1.0) * static_cast<double>(k - 1));
  return ms;
}

std::optional<double> icc_a1(const AnovaMeanSquares& ms) {
  const double k = static_cast<double>(ms.k_raters);
  const double n = static_cast<double>(ms.n_subjects);
  const double denominator = ms.msr + (k - 1.0) * ms.mse + (k / n) * (ms.msc - ms.mse);
  if (std::abs(denominator) < kIccDenominatorFloor) {
    if (ms.sst == 0.0) {
      return 1.0;
    }
    return std::nullopt;
  }
  return (ms.msr - ms.mse) / denominator;
}

std::optional<double> icc_a1(std::span<const double> rater_r, std::span<const double> rater_s) {
  return icc_a1(anova_mean_squares(rater_r, rater_s));
}

}  // namespace reliagap::irr
