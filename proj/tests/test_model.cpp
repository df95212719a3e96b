#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "reliagap/data.hpp"
#include "reliagap/model.hpp"
#include "test_support.hpp"

namespace reliagap::model {
namespace {

using testing::Gen;

struct Problem {
  Eigen::MatrixXd x;
  std::vector<std::uint8_t> labels;
};

Problem random_problem(Gen& gen, std::size_t n, std::size_t d) {
  Problem p{Eigen::MatrixXd(n, d), std::vector<std::uint8_t>(n)};
  Eigen::VectorXd w(d);
  for (std::size_t j = 0; j < d; ++j) w[j] = gen.real(-2.0, 2.0);
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.3;
    for (std::size_t j = 0; j < d; ++j) {
      p.x(i, j) = gen.real(-1.5, 1.5);
      z += w[j] * p.x(i, j);
    }
    p.labels[i] = gen.coin(sigmoid(z)) ? 1 : 0;
  }
  p.labels[0] = 0;
  p.labels[1] = 1;
  return p;
}

TEST(Sigmoid, StableAtExtremes) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_DOUBLE_EQ(sigmoid(2.0) + sigmoid(-2.0), 1.0);
}

TEST(Objective, GradientMatchesCentralDifferences) {
  Gen gen(31);
  const auto p = random_problem(gen, 120, 6);
  const LogisticObjective f(p.x, p.labels, 1.0);
  const double h = 1e-5;
  double worst = 0.0;
  for (int point = 0; point < 20; ++point) {
    Eigen::VectorXd theta(f.dim());
    for (Eigen::Index j = 0; j < theta.size(); ++j) theta[j] = gen.real(-3.0, 3.0);
    Eigen::VectorXd grad;
    f.value_and_gradient(theta, grad);
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      Eigen::VectorXd up = theta;
      Eigen::VectorXd down = theta;
      up[j] += h;
      down[j] -= h;
      const double numeric = (f.value(up) - f.value(down)) / (2 * h);
      const double rel = std::abs(numeric - grad[j]) / std::max(1.0, std::abs(grad[j]));
      worst = std::max(worst, rel);
    }
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Objective, InterceptIsNotPenalised) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(4, 1);
  const std::vector<std::uint8_t> y = {1, 1, 1, 0};
  const LogisticObjective f(x, y, 10.0);
  Eigen::VectorXd a(2), b(2);
  a << 0.0, 1.0;
  b << 1.0, 1.0;
  // Weight 1 costs lambda / 2 = 5 extra; features are zero so the loss is unchanged.
  EXPECT_NEAR(f.value(b) - f.value(a), 5.0, 1e-12);
}

TEST(Fit, ConvergesToStationaryPoint) {
  Gen gen(32);
  const auto p = random_problem(gen, 400, 5);
  const auto m = fit_logistic(p.x, p.labels, {});
  EXPECT_TRUE(m.report.converged);
  EXPECT_LT(m.report.gradient_norm, 1e-8);
  Eigen::VectorXd theta(6);
  theta << m.weights, m.intercept;
  Eigen::VectorXd grad;
  LogisticObjective(p.x, p.labels, 1.0).value_and_gradient(theta, grad);
  EXPECT_LT(grad.norm(), 1e-8);
}

TEST(Fit, ConvexObjectiveGivesSameOptimumFromAnyStart) {
  Gen gen(33);
  const auto p = random_problem(gen, 300, 4);
  const auto base = fit_logistic(p.x, p.labels, {});
  for (int start = 0; start < 5; ++start) {
    Eigen::VectorXd init(5);
    for (Eigen::Index j = 0; j < 5; ++j) init[j] = gen.real(-5.0, 5.0);
    const auto m = fit_logistic(p.x, p.labels, {}, init);
    EXPECT_LT((m.weights - base.weights).norm(), 1e-6);
    EXPECT_NEAR(m.intercept, base.intercept, 1e-6);
    EXPECT_NEAR(m.report.objective, base.report.objective, 1e-9 * std::abs(base.report.objective));
  }
}

TEST(Fit, ObjectiveTraceIsNonIncreasing) {
  Gen gen(34);
  const auto p = random_problem(gen, 300, 8);
  std::vector<double> trace;
  const auto m = fit_logistic(p.x, p.labels, {}, Eigen::VectorXd(), &trace);
  ASSERT_GE(trace.size(), 2u);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    const double band = 64 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(trace[i - 1]));
    ASSERT_LE(trace[i], trace[i - 1] + band) << "iteration " << i;
  }
  EXPECT_EQ(trace.back(), m.report.objective);
}

TEST(Fit, StrongerPenaltyShrinksWeights) {
  Gen gen(35);
  const auto p = random_problem(gen, 200, 4);
  FitOptions weak;
  weak.regularization = 0.01;
  FitOptions strong;
  strong.regularization = 100.0;
  EXPECT_GT(fit_logistic(p.x, p.labels, weak).weights.norm(), fit_logistic(p.x, p.labels, strong).weights.norm());
}

TEST(Fit, RejectsDegenerateInput) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 2);
  const std::vector<std::uint8_t> same = {1, 1, 1};
  EXPECT_THROW((void)fit_logistic(x, same, {}), std::invalid_argument);
  const std::vector<std::uint8_t> short_labels = {1, 0};
  EXPECT_THROW((void)fit_logistic(x, short_labels, {}), std::invalid_argument);
}

TEST(Fit, ReportsNonConvergence) {
  Gen gen(36);
  const auto p = random_problem(gen, 200, 5);
  FitOptions opts;
  opts.max_iterations = 2;
  try {
    (void)fit_logistic(p.x, p.labels, opts);
    FAIL();
  } catch (const FitError& e) {
    EXPECT_FALSE(e.report().converged);
    EXPECT_EQ(e.report().iterations, 2);
  }
}

TEST(Predict, ThresholdIsInclusive) {
  LogisticModel m;
  m.weights = Eigen::VectorXd::Zero(1);
  m.intercept = 0.0;
  const Eigen::MatrixXd x = Eigen::MatrixXd::Zero(2, 1);
  const auto pred = predict(m, x);
  EXPECT_EQ(pred.scores[0], 0.5);
  EXPECT_EQ(pred.labels[0], 1);
  EXPECT_EQ(predict(m, x, 0.6).labels[1], 0);
  EXPECT_THROW((void)predict(m, Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
}

TEST(Scaler, StandardisesNumericColumnsOnly) {
  const auto ds = data::generate_synthetic(500, 0.3, {0.5, 0.4}, 6);
  const auto s = fit_scaler(ds);
  const auto x = apply_scaler(s, ds);
  ASSERT_EQ(static_cast<std::size_t>(x.cols()), ds.cols());
  for (std::size_t k = 0; k < s.columns.size(); ++k) {
    const auto col = x.col(static_cast<Eigen::Index>(s.columns[k]));
    const double mean = col.mean();
    const double var = (col.array() - mean).square().mean();
    EXPECT_NEAR(mean, 0.0, 1e-12);
    EXPECT_NEAR(var, 1.0, 1e-12);
  }
  const std::size_t sex = ds.schema().index_of("sex");
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    ASSERT_EQ(x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(sex)), ds.at(r, sex));
  }
  const auto back = invert_scaler(s, x);
  for (std::size_t c = 0; c < ds.cols(); ++c) {
    EXPECT_NEAR(back(3, static_cast<Eigen::Index>(c)), ds.at(3, c), 1e-9);
  }
}

TEST(Scaler, RejectsConstantNumericColumn) {
  const auto ds = data::generate_synthetic(50, 0.3, {0.5, 0.4}, 7);
  const auto flat = ds.with_column(ds.schema().index_of("age"), std::vector<std::int32_t>(ds.rows(), 30));
  EXPECT_THROW((void)fit_scaler(flat), std::invalid_argument);
}

TEST(Json, ModelAndScalerRoundTrip) {
  const auto ds = data::generate_synthetic(300, 0.3, {0.5, 0.4}, 8);
  const auto s = fit_scaler(ds);
  const auto m = fit_logistic(apply_scaler(s, ds), ds.labels(), {});
  const nlohmann::json j = {{"scaler", s}, {"model", m}};
  const auto s2 = nlohmann::json::parse(j.dump()).at("scaler").get<Scaler>();
  const auto m2 = nlohmann::json::parse(j.dump()).at("model").get<LogisticModel>();
  EXPECT_EQ(s2.mean, s.mean);
  EXPECT_EQ(s2.stddev, s.stddev);
  EXPECT_EQ(s2.feature_names, s.feature_names);
  EXPECT_EQ(m2.weights, m.weights);
  EXPECT_EQ(m2.intercept, m.intercept);
}

}  // namespace
}  // namespace reliagap::model
