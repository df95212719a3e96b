#include "reliagap/model.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include <fmt/format.h>

namespace reliagap::model {

Scaler fit_scaler(const data::Dataset& train) {
  if (train.rows() == 0) throw std::invalid_argument("cannot fit scaler on an empty training set");
  Scaler s;
  const auto& features = train.schema().features;
  for (std::size_t c = 0; c < features.size(); ++c) {
    s.feature_names.push_back(features[c].name);
    if (features[c].kind != data::FeatureKind::NumericInteger) continue;
    const auto col = train.column(c);
    double sum = 0.0;
    for (const auto v : col) sum += v;
    const double mean = sum / static_cast<double>(col.size());
    double ss = 0.0;
    for (const auto v : col) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(col.size()));
    if (!(sd > 0.0)) {
      throw std::invalid_argument("numeric feature '" + features[c].name +
                                  "' is constant on the training split");
    }
    s.columns.push_back(c);
    s.mean.push_back(mean);
    s.stddev.push_back(sd);
  }
  return s;
}

Eigen::MatrixXd apply_scaler(const Scaler& s, const data::Dataset& ds) {
  const auto& features = ds.schema().features;
  bool match = features.size() == s.feature_names.size();
  for (std::size_t c = 0; match && c < features.size(); ++c) {
    match = features[c].name == s.feature_names[c];
  }
  if (!match) throw std::invalid_argument("dataset feature layout does not match the scaler");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(ds.rows()), static_cast<Eigen::Index>(ds.cols()));
  for (std::size_t c = 0; c < ds.cols(); ++c) {
    const auto col = ds.column(c);
    for (std::size_t r = 0; r < ds.rows(); ++r) {
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = col[r];
    }
  }
  for (std::size_t k = 0; k < s.columns.size(); ++k) {
    const auto c = static_cast<Eigen::Index>(s.columns[k]);
    x.col(c) = (x.col(c).array() - s.mean[k]) / s.stddev[k];
  }
  return x;
}

Eigen::MatrixXd invert_scaler(const Scaler& s, const Eigen::MatrixXd& scaled) {
  Eigen::MatrixXd x = scaled;
  for (std::size_t k = 0; k < s.columns.size(); ++k) {
    const auto c = static_cast<Eigen::Index>(s.columns[k]);
    x.col(c) = x.col(c).array() * s.stddev[k] + s.mean[k];
  }
  return x;
}

namespace {

// log(1 + exp(-m)) without overflow.
double log1p_exp_neg(double m) {
  return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

}  // namespace

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

LogisticObjective::LogisticObjective(Eigen::MatrixXd x, std::span<const std::uint8_t> labels,
                                     double lambda)
    : x_(std::move(x)), sign_(static_cast<Eigen::Index>(labels.size())), lambda_(lambda) {
  if (static_cast<std::size_t>(x_.rows()) != labels.size()) {
    throw std::invalid_argument("feature rows and labels differ in length");
  }
  if (!(lambda_ >= 0.0)) throw std::invalid_argument("regularization must be non-negative");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sign_(static_cast<Eigen::Index>(i)) = labels[i] == 1 ? 1.0 : -1.0;
  }
}

double LogisticObjective::value(const Eigen::VectorXd& theta) const {
  const Eigen::Index p = x_.cols();
  const Eigen::VectorXd z = x_ * theta.head(p);
  double f = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) f += log1p_exp_neg(sign_(i) * (z(i) + theta(p)));
  return f + 0.5 * lambda_ * theta.head(p).squaredNorm();
}

double LogisticObjective::value_and_gradient(const Eigen::VectorXd& theta,
                                             Eigen::VectorXd& gradient) const {
  const Eigen::Index p = x_.cols();
  const Eigen::VectorXd z = x_ * theta.head(p);
  Eigen::VectorXd coef(z.size());  // d loss_i / d z_i
  double f = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double margin = sign_(i) * (z(i) + theta(p));
    f += log1p_exp_neg(margin);
    coef(i) = -sign_(i) * sigmoid(-margin);
  }
  gradient.resize(p + 1);
  gradient.head(p) = x_.transpose() * coef + lambda_ * theta.head(p);
  gradient(p) = coef.sum();
  return f + 0.5 * lambda_ * theta.head(p).squaredNorm();
}

LogisticModel fit_logistic(const Eigen::MatrixXd& x, std::span<const std::uint8_t> labels,
                           const FitOptions& options, const Eigen::VectorXd& initial,
                           std::vector<double>* objective_trace) {
  if (x.rows() < 2) throw std::invalid_argument("logistic fit needs at least two rows");
  std::size_t positives = 0;
  for (const auto y : labels) positives += y == 1 ? 1 : 0;
  if (positives == 0 || positives == labels.size()) {
    throw std::invalid_argument("logistic fit needs both classes in the training data");
  }
  if (!(options.regularization > 0.0)) throw std::invalid_argument("regularization must be positive");

  const LogisticObjective objective(x, labels, options.regularization);
  const auto dim = static_cast<Eigen::Index>(objective.dim());
  Eigen::VectorXd theta = initial.size() == 0 ? Eigen::VectorXd::Zero(dim) : initial;
  if (theta.size() != dim) throw std::invalid_argument("initial parameter vector has wrong size");

  Eigen::VectorXd grad;
  double f = objective.value_and_gradient(theta, grad);
  if (objective_trace) objective_trace->push_back(f);

  std::deque<Eigen::VectorXd> s_hist;
  std::deque<Eigen::VectorXd> y_hist;
  std::deque<double> rho_hist;

  ConvergenceReport report;
  Eigen::VectorXd direction(dim);
  Eigen::VectorXd candidate(dim);
  Eigen::VectorXd candidate_grad(dim);
  std::vector<double> alpha_buf(static_cast<std::size_t>(options.history));

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const double gnorm = grad.norm();
    if (gnorm <= options.tolerance) break;

    // Two-loop recursion.
    direction = -grad;
    const std::size_t m = s_hist.size();
    for (std::size_t k = m; k-- > 0;) {
      alpha_buf[k] = rho_hist[k] * s_hist[k].dot(direction);
      direction -= alpha_buf[k] * y_hist[k];
    }
    if (m > 0) direction *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t k = 0; k < m; ++k) {
      const double beta = rho_hist[k] * y_hist[k].dot(direction);
      direction += (alpha_buf[k] - beta) * s_hist[k];
    }
    double slope = grad.dot(direction);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      direction = -grad;
      slope = -gnorm * gnorm;
    }

    // Backtracking. Near the optimum the predicted decrease drops below the
    // rounding noise of f, so a step whose objective change is within that
    // noise is also accepted when it reduces the gradient norm.
    double step = m == 0 ? std::min(1.0, 1.0 / gnorm) : 1.0;
    const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f));
    bool accepted = false;
    double f_new = f;
    for (int tries = 0; tries < 60; ++tries) {
      candidate = theta + step * direction;
      f_new = objective.value_and_gradient(candidate, candidate_grad);
      if (std::isfinite(f_new)) {
        if (f_new <= f + 1e-4 * step * slope) {
          accepted = true;
          break;
        }
        if (std::abs(f_new - f) <= noise && candidate_grad.norm() < gnorm) {
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Eigen::VectorXd s_vec = candidate - theta;
    Eigen::VectorXd y_vec = candidate_grad - grad;
    const double sy = s_vec.dot(y_vec);
    theta = candidate;
    grad = candidate_grad;
    f = f_new;
    if (objective_trace) objective_trace->push_back(f);
    if (sy > 1e-12 * s_vec.norm() * y_vec.norm()) {
      if (static_cast<int>(s_hist.size()) == options.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      rho_hist.push_back(1.0 / sy);
      s_hist.push_back(std::move(s_vec));
      y_hist.push_back(std::move(y_vec));
    }
  }

  report.iterations = iter;
  report.gradient_norm = grad.norm();
  report.objective = f;
  report.converged = report.gradient_norm <= options.tolerance;
  if (!report.converged) {
    throw FitError(fmt::format("logistic fit stopped after {} iterations with gradient norm {:.3e} "
                               "(tolerance {:.1e})",
                               iter, report.gradient_norm, options.tolerance),
                   report);
  }

  LogisticModel model;
  model.weights = theta.head(dim - 1);
  model.intercept = theta(dim - 1);
  model.regularization = options.regularization;
  model.report = report;
  return model;
}

Predictions predict(const LogisticModel& m, const Eigen::MatrixXd& x, double threshold) {
  if (x.cols() != m.weights.size()) {
    throw std::invalid_argument(fmt::format("prediction input has {} features, model expects {}",
                                            x.cols(), m.weights.size()));
  }
  const Eigen::VectorXd z = x * m.weights;
  Predictions out;
  out.scores.resize(static_cast<std::size_t>(z.size()));
  out.labels.resize(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double score = sigmoid(z(i) + m.intercept);
    out.scores[static_cast<std::size_t>(i)] = score;
    out.labels[static_cast<std::size_t>(i)] = score >= threshold ? 1 : 0;
  }
  return out;
}

void to_json(nlohmann::json& j, const Scaler& s) {
  j = nlohmann::json{{"feature_names", s.feature_names},
                     {"columns", s.columns},
                     {"mean", s.mean},
                     {"stddev", s.stddev}};
}

void from_json(const nlohmann::json& j, Scaler& s) {
  j.at("feature_names").get_to(s.feature_names);
  j.at("columns").get_to(s.columns);
  j.at("mean").get_to(s.mean);
  j.at("stddev").get_to(s.stddev);
  if (s.columns.size() != s.mean.size() || s.columns.size() != s.stddev.size()) {
    throw std::invalid_argument("scaler JSON has inconsistent lengths");
  }
}

void to_json(nlohmann::json& j, const LogisticModel& m) {
  j = nlohmann::json{{"weights", std::vector<double>(m.weights.data(), m.weights.data() + m.weights.size())},
                     {"intercept", m.intercept},
                     {"regularization", m.regularization},
                     {"convergence",
                      {{"iterations", m.report.iterations},
                       {"gradient_norm", m.report.gradient_norm},
                       {"objective", m.report.objective},
                       {"converged", m.report.converged}}}};
}

void from_json(const nlohmann::json& j, LogisticModel& m) {
  const auto w = j.at("weights").get<std::vector<double>>();
  m.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  j.at("intercept").get_to(m.intercept);
  j.at("regularization").get_to(m.regularization);
  const auto& c = j.at("convergence");
  c.at("iterations").get_to(m.report.iterations);
  c.at("gradient_norm").get_to(m.report.gradient_norm);
  c.at("objective").get_to(m.report.objective);
  c.at("converged").get_to(m.report.converged);
}

}  // namespace reliagap::model
