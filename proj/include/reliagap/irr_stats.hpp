#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

// Inter-rater reliability statistics for two raters.
//
// Binary predictions are summarised in a 2x2 confusion matrix, laid out with
// rater s on the rows and rater r on the columns:
//
//                 r = 1   r = 0
//       s = 1       a       b      s1
//       s = 0       c       d      s0
//                  r1      r0       n
//
// Continuous predictions (risk scores) are handled through the two-way
// single-observation ANOVA underlying ICC(A,1).

namespace reliagap::irr {

/// Counts of paired binary predictions. Counts are exact integers; every
/// statistic divides only once at the end.
class ConfusionMatrix2x2 {
 public:
  /// Throws std::invalid_argument on negative counts or n == 0.
  ConfusionMatrix2x2(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d);

  [[nodiscard]] std::int64_t a() const noexcept { return a_; }
  [[nodiscard]] std::int64_t b() const noexcept { return b_; }
  [[nodiscard]] std::int64_t c() const noexcept { return c_; }
  [[nodiscard]] std::int64_t d() const noexcept { return d_; }
  [[nodiscard]] std::int64_t n() const noexcept { return a_ + b_ + c_ + d_; }

  // Marginals.
  [[nodiscard]] std::int64_t r1() const noexcept { return a_ + c_; }
  [[nodiscard]] std::int64_t r0() const noexcept { return b_ + d_; }
  [[nodiscard]] std::int64_t s1() const noexcept { return a_ + b_; }
  [[nodiscard]] std::int64_t s0() const noexcept { return c_ + d_; }

  /// Rater roles exchanged: b and c swap.
  [[nodiscard]] ConfusionMatrix2x2 swapped() const { return {a_, c_, b_, d_}; }

  friend bool operator==(const ConfusionMatrix2x2&, const ConfusionMatrix2x2&) = default;

 private:
  std::int64_t a_;
  std::int64_t b_;
  std::int64_t c_;
  std::int64_t d_;
};

/// Tallies pair patterns (1,1) -> a, (0,1) -> b, (1,0) -> c, (0,0) -> d,
/// where each pair is (rater_r[i], rater_s[i]).
/// Throws std::invalid_argument("empty pairs") on empty input, and on length
/// mismatch or values outside {0,1}.
[[nodiscard]] ConfusionMatrix2x2 confusion_from_pairs(std::span<const std::uint8_t> rater_r,
                                                      std::span<const std::uint8_t> rater_s);

[[nodiscard]] double observed_agreement(const ConfusionMatrix2x2& m);
[[nodiscard]] double chance_agreement(const ConfusionMatrix2x2& m);

/// Cohen's Kappa. When chance agreement is 1 (both raters constant and equal
/// on every subject) the ratio is 0/0; it is defined as 1.0 if observed
/// agreement is 1 and 0.0 otherwise.
[[nodiscard]] double cohen_kappa(const ConfusionMatrix2x2& m);

/// Prevalence-adjusted bias-adjusted kappa, 2 * p_o - 1.
[[nodiscard]] double pabak(const ConfusionMatrix2x2& m);

/// (b - c) / n.
[[nodiscard]] double bias_index(const ConfusionMatrix2x2& m);

/// (a - d) / n.
[[nodiscard]] double prevalence_index(const ConfusionMatrix2x2& m);

/// Kappa expressed through PABAK, BI and PI:
///   CK = (PABAK - PI^2 + BI^2) / (1 - PI^2 + BI^2)
/// together with the two partial corrections obtained by zeroing one index.
/// Fields whose denominator is not above kDecompositionFloor are empty.
struct KappaDecomposition {
  double ck = 0.0;
  double pabak = 0.0;
  double bi = 0.0;
  double pi = 0.0;
  std::optional<double> ck_bias_only;        // PI forced to 0
  std::optional<double> ck_prevalence_only;  // BI forced to 0
  std::optional<double> ck_reconstructed;    // full right-hand side
};

inline constexpr double kDecompositionFloor = 1e-12;

[[nodiscard]] KappaDecomposition kappa_decomposition(const ConfusionMatrix2x2& m);

/// Two-way ANOVA with one observation per cell (subjects x raters).
struct AnovaMeanSquares {
  double msr = 0.0;  // between subjects
  double msc = 0.0;  // between raters
  double mse = 0.0;  // residual
  double ssr = 0.0;
  double ssc = 0.0;
  double sse = 0.0;
  double sst = 0.0;
  std::size_t n_subjects = 0;
  std::size_t k_raters = 2;
};

/// Throws std::invalid_argument("insufficient subjects") for fewer than two
/// subjects, and on length mismatch or non-finite values.
[[nodiscard]] AnovaMeanSquares anova_mean_squares(std::span<const double> rater_r,
                                                  std::span<const double> rater_s);

inline constexpr double kIccDenominatorFloor = 1e-12;

/// McGraw-Wong ICC(A,1): two-way, single rater, absolute agreement.
///   (MSR - MSE) / (MSR + (k-1) MSE + (k/n) (MSC - MSE))
/// Returned unclamped. If the denominator vanishes, an all-constant table
/// yields 1.0 and any other table yields an empty optional.
[[nodiscard]] std::optional<double> icc_a1(std::span<const double> rater_r,
                                           std::span<const double> rater_s);

[[nodiscard]] std::optional<double> icc_a1(const AnovaMeanSquares& ms);

}  // namespace reliagap::irr
