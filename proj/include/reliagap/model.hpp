#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "reliagap/data.hpp"

// Stand-in risk assessment instrument: standardisation of the numeric
// features followed by l2-regularised logistic regression.

namespace reliagap::model {

/// Per-feature standardisation fitted on a training split. Only numeric
/// features are scaled; binary and one-hot columns pass through.
struct Scaler {
  std::vector<std::string> feature_names;  // full input layout, for schema checks
  std::vector<std::size_t> columns;        // scaled column indices
  std::vector<double> mean;
  std::vector<double> stddev;  // population convention (divide by n)
};

/// Throws std::invalid_argument on an empty training set or a constant
/// numeric column.
[[nodiscard]] Scaler fit_scaler(const data::Dataset& train);

/// Rows x features matrix with numeric columns mapped to (x - mean) / stddev.
/// Throws std::invalid_argument when the dataset's feature layout differs
/// from the one the scaler was fitted on.
[[nodiscard]] Eigen::MatrixXd apply_scaler(const Scaler& s, const data::Dataset& ds);

[[nodiscard]] Eigen::MatrixXd invert_scaler(const Scaler& s, const Eigen::MatrixXd& scaled);

/// Regularised negative log-likelihood over parameters theta = [w; b]:
///   sum_i log(1 + exp(-y_i (w . x_i + b))) + (lambda / 2) |w|^2
/// with y_i in {-1, +1} and the intercept unpenalised.
class LogisticObjective {
 public:
  LogisticObjective(Eigen::MatrixXd x, std::span<const std::uint8_t> labels, double lambda);

  [[nodiscard]] std::size_t dim() const noexcept { return static_cast<std::size_t>(x_.cols()) + 1; }
  [[nodiscard]] double value(const Eigen::VectorXd& theta) const;
  double value_and_gradient(const Eigen::VectorXd& theta, Eigen::VectorXd& gradient) const;

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd sign_;  // +1 / -1
  double lambda_;
};

struct FitOptions {
  double regularization = 1.0;  // lambda
  double tolerance = 1e-8;      // on the Euclidean gradient norm
  int max_iterations = 500;
  int history = 10;  // L-BFGS memory
};

struct ConvergenceReport {
  int iterations = 0;
  double gradient_norm = 0.0;
  double objective = 0.0;
  bool converged = false;
};

struct LogisticModel {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  double regularization = 1.0;
  ConvergenceReport report;
};

class FitError : public std::runtime_error {
 public:
  FitError(const std::string& what, ConvergenceReport report)
      : std::runtime_error(what), report_(report) {}
  [[nodiscard]] const ConvergenceReport& report() const noexcept { return report_; }

 private:
  ConvergenceReport report_;
};

/// L-BFGS with backtracking line search from `initial` (zeros when empty).
/// When `objective_trace` is given, the objective after every accepted
/// iteration is appended to it (starting with the initial value).
/// Throws std::invalid_argument for fewer than two rows or a single class,
/// and FitError if the gradient-norm target is not met in max_iterations.
[[nodiscard]] LogisticModel fit_logistic(const Eigen::MatrixXd& x, std::span<const std::uint8_t> labels,
                                         const FitOptions& options,
                                         const Eigen::VectorXd& initial = Eigen::VectorXd(),
                                         std::vector<double>* objective_trace = nullptr);

struct Predictions {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;  // 1 iff score >= threshold
};

[[nodiscard]] double sigmoid(double z) noexcept;

/// Throws std::invalid_argument when x.cols() differs from the weight count.
[[nodiscard]] Predictions predict(const LogisticModel& m, const Eigen::MatrixXd& x,
                                  double threshold = 0.5);

void to_json(nlohmann::json& j, const Scaler& s);
void from_json(const nlohmann::json& j, Scaler& s);
void to_json(nlohmann::json& j, const LogisticModel& m);
void from_json(const nlohmann::json& j, LogisticModel& m);

}  // namespace reliagap::model
