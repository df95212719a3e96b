#include <cmath>
#include <numeric>
#include <set>

#include <gtest/gtest.h>

#include "reliagap/data.hpp"
#include "reliagap/noise.hpp"
#include "reliagap/rng.hpp"
#include "test_support.hpp"

namespace reliagap::noise {
namespace {

std::vector<std::int32_t> zeros(std::size_t n) { return std::vector<std::int32_t>(n, 0); }

TEST(Rng, DerivedSeedsSeparatePaths) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t a = 0; a < 5; ++a) {
    for (std::uint64_t b = 0; b < 5; ++b) seen.insert(rng::derive_seed(42, {a, b}));
  }
  EXPECT_EQ(seen.size(), 25u);
  EXPECT_NE(rng::derive_seed(42, {1, 2}), rng::derive_seed(42, {2, 1}));
  EXPECT_NE(rng::derive_seed(42, {1}), rng::derive_seed(43, {1}));
  EXPECT_EQ(rng::derive_seed(42, {1, 2}), rng::derive_seed(42, {1, 2}));
}

TEST(Rng, UniformIndexCoversRangeEvenly) {
  rng::Stream s(1);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto v = s.uniform_index(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (const int c : counts) EXPECT_NEAR(c, 10000, 450);
}

TEST(Rng, NormalMoments) {
  rng::Stream s(2);
  const int m = 200000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < m; ++i) {
    const double z = s.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / m, 0.0, 3.0 / std::sqrt(m));
  EXPECT_NEAR(sq / m, 1.0, 0.01);
}

TEST(Selection, ExactCountIsRoundedProportion) {
  EXPECT_EQ(selection_count(0.07, 831), 58u);  // 58.17
  EXPECT_EQ(selection_count(0.3, 403), 121u);  // 120.9
  EXPECT_EQ(selection_count(0.0, 1000), 0u);
  EXPECT_EQ(selection_count(1.0, 17), 17u);
}

TEST(SelectionProperty, PositionsAreDistinctSortedAndExact) {
  testing::Gen gen(41);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = static_cast<std::size_t>(gen.integer(0, 300));
    const double p = gen.real(0.0, 1.0);
    rng::Stream s(static_cast<std::uint64_t>(trial));
    const auto pos = select_positions(n, p, s);
    ASSERT_EQ(pos.size(), selection_count(p, n));
    ASSERT_TRUE(std::is_sorted(pos.begin(), pos.end()));
    ASSERT_EQ(std::set<std::size_t>(pos.begin(), pos.end()).size(), pos.size());
    if (!pos.empty()) ASSERT_LT(pos.back(), n);
  }
}

TEST(Selection, BernoulliCountIsNearExpectation) {
  rng::Stream s(3);
  const auto pos = select_positions(100000, 0.2, s, SelectionMode::Bernoulli);
  EXPECT_NEAR(static_cast<double>(pos.size()), 20000.0, 4 * std::sqrt(100000 * 0.2 * 0.8));
}

TEST(Selection, RejectsInvalidLevel) {
  rng::Stream s(4);
  EXPECT_THROW((void)select_positions(10, 1.5, s), std::invalid_argument);
  EXPECT_THROW((void)select_positions(10, -0.1, s), std::invalid_argument);
}

TEST(FlipBinary, ChangesExactlyTheSelectedShare) {
  testing::Gen gen(42);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<std::size_t>(gen.integer(1, 500));
    const double p = gen.real(0.0, 1.0);
    std::vector<std::int32_t> v(n);
    for (auto& x : v) x = gen.coin() ? 1 : 0;
    rng::Stream s(static_cast<std::uint64_t>(trial));
    const auto out = flip_binary_column(v, p, s);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_TRUE(out[i] == 0 || out[i] == 1);
      changed += out[i] != v[i];
    }
    ASSERT_EQ(changed, selection_count(p, n));
  }
}

TEST(FlipBinary, RejectsNonBinaryColumn) {
  rng::Stream s(5);
  const std::vector<std::int32_t> v = {0, 2};
  EXPECT_THROW((void)flip_binary_column(v, 0.5, s), std::invalid_argument);
}

TEST(Numeric, RoundedStandardNormalIsZeroWithExpectedProbability) {
  // P(|Z| < 0.5) = 0.3829 for Z ~ N(0, 1).
  rng::Stream s(6);
  const std::size_t m = 100000;
  const auto out = perturb_numeric_column(zeros(m), 1.0, 1.0, s);
  const auto zero = std::count(out.begin(), out.end(), 0);
  EXPECT_NEAR(static_cast<double>(zero) / m, 0.3829, 0.01);
}

TEST(Numeric, NoiseIsCentredWithRequestedSpread) {
  for (const double sigma2 : {1.0, 5.0, 10.0}) {
    rng::Stream s(7);
    const std::size_t m = 100000;
    const auto out = perturb_numeric_column(zeros(m), 1.0, sigma2, s);
    double sum = 0.0;
    double sq = 0.0;
    for (const auto v : out) {
      sum += v;
      sq += static_cast<double>(v) * v;
    }
    const double mean = sum / m;
    EXPECT_NEAR(mean, 0.0, 3.0 * std::sqrt(sigma2) / std::sqrt(static_cast<double>(m)));
    // Rounding to integers adds about 1/12 to the variance.
    EXPECT_NEAR(sq / m - mean * mean, sigma2 + 1.0 / 12.0, 0.03 * sigma2 + 0.02);
  }
}

TEST(Numeric, OnlySelectedPositionsMoveAndMinimaHold) {
  rng::Stream a(8);
  const std::vector<std::int32_t> v(1000, 0);
  const auto out = perturb_numeric_column(v, 0.2, 5.0, a);
  EXPECT_LE(std::count_if(out.begin(), out.end(), [](auto x) { return x != 0; }), 200);
  EXPECT_GT(std::count_if(out.begin(), out.end(), [](auto x) { return x < 0; }), 0);

  rng::Stream b(8);
  const auto clamped = perturb_numeric_column(v, 0.2, 5.0, b, 0);
  EXPECT_TRUE(std::all_of(clamped.begin(), clamped.end(), [](auto x) { return x >= 0; }));
  for (std::size_t i = 0; i < out.size(); ++i) ASSERT_EQ(clamped[i], std::max(out[i], 0));

  rng::Stream c(9);
  EXPECT_THROW((void)perturb_numeric_column(v, 0.2, 0.0, c), std::invalid_argument);
}

NoiseSpec spec_for(double p, std::uint64_t seed) {
  NoiseSpec s;
  s.p = p;
  s.sigma2 = 5.0;
  s.seed = seed;
  return s;
}

TEST(PerturbDataset, ZeroNoiseIsIdentity) {
  const auto ds = data::generate_synthetic(400, 0.3, {0.5, 0.4}, 1);
  const auto out = perturb_dataset(ds, spec_for(0.0, 3));
  EXPECT_EQ(out.data, ds);
  for (const auto& e : out.log) {
    EXPECT_EQ(e.selected, 0u);
    EXPECT_EQ(e.changed, 0u);
  }
}

TEST(PerturbDatasetProperty, PerGroupCountsAndUntouchedColumns) {
  testing::Gen gen(43);
  for (int trial = 0; trial < 30; ++trial) {
    const auto ds = data::generate_synthetic(static_cast<std::size_t>(gen.integer(20, 600)), gen.real(0.1, 0.9),
                                             {0.5, 0.4}, static_cast<std::uint64_t>(trial));
    const double p = gen.real(0.0, 0.5);
    const auto out = perturb_dataset(ds, spec_for(p, static_cast<std::uint64_t>(trial)));
    const auto& schema = ds.schema();
    for (std::size_t c = 0; c < ds.cols(); ++c) {
      if (schema.features[c].perturbable) continue;
      ASSERT_TRUE(std::equal(ds.column(c).begin(), ds.column(c).end(), out.data.column(c).begin()))
          << schema.features[c].name;
    }
    ASSERT_TRUE(std::equal(ds.labels().begin(), ds.labels().end(), out.data.labels().begin()));
    for (const auto& e : out.log) {
      ASSERT_TRUE(e.group.has_value());
      ASSERT_EQ(e.block_size, ds.group_count(*e.group));
      ASSERT_EQ(e.selected, selection_count(p, e.block_size));
      ASSERT_LE(e.changed, e.selected);
      if (schema.features[e.column].kind == data::FeatureKind::CategoricalBinary) {
        ASSERT_EQ(e.changed, e.selected);
      }
    }
  }
}

TEST(PerturbDataset, PresetsTouchOnlyTheirFeatureKinds) {
  const auto ds = data::generate_synthetic(500, 0.3, {0.5, 0.4}, 2);
  auto spec = spec_for(0.3, 4);
  spec.perturb_numeric = false;
  for (const auto& e : perturb_dataset(ds, spec).log) {
    EXPECT_EQ(ds.schema().features[e.column].kind, data::FeatureKind::CategoricalBinary);
  }
  spec.perturb_numeric = true;
  spec.perturb_categorical = false;
  const auto out = perturb_dataset(ds, spec);
  const std::size_t sex = ds.schema().index_of("sex");
  EXPECT_TRUE(std::equal(ds.column(sex).begin(), ds.column(sex).end(), out.data.column(sex).begin()));
}

TEST(PerturbDataset, MinimaOnlyWhenRequested) {
  const auto ds = data::generate_synthetic(2000, 0.3, {0.5, 0.4}, 3);
  auto spec = spec_for(0.3, 5);
  spec.sigma2 = 10.0;
  const std::size_t priors = ds.schema().index_of("priors_count");
  const auto perturbed = perturb_dataset(ds, spec);
  const auto raw = perturbed.data.column(priors);
  EXPECT_LT(*std::min_element(raw.begin(), raw.end()), 0);
  spec.apply_minima = true;
  const auto floored = perturb_dataset(ds, spec);
  const auto col = floored.data.column(priors);
  EXPECT_EQ(*std::min_element(col.begin(), col.end()), 0);
  const auto age = floored.data.column(ds.schema().index_of("age"));
  EXPECT_GE(*std::min_element(age.begin(), age.end()), 18);
}

TEST(PerturbDataset, SeedDeterminesOutput) {
  const auto ds = data::generate_synthetic(300, 0.3, {0.5, 0.4}, 4);
  EXPECT_EQ(perturb_dataset(ds, spec_for(0.2, 9)).data, perturb_dataset(ds, spec_for(0.2, 9)).data);
  EXPECT_NE(perturb_dataset(ds, spec_for(0.2, 9)).data, perturb_dataset(ds, spec_for(0.2, 10)).data);
}

TEST(PerturbDataset, GroupBlocksAreIndependent) {
  // Dropping rows of group 1 must not change the noise group 0 receives.
  const auto ds = data::generate_synthetic(400, 0.4, {0.5, 0.4}, 5);
  std::vector<std::size_t> keep;
  bool drop = false;
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    if (ds.groups()[r] == 1 && (drop = !drop)) continue;
    keep.push_back(r);
  }
  const auto smaller = ds.subset(keep);
  const auto full = perturb_dataset(ds, spec_for(0.25, 6)).data;
  const auto part = perturb_dataset(smaller, spec_for(0.25, 6)).data;
  std::size_t j = 0;
  for (const std::size_t r : keep) {
    if (ds.groups()[r] == 0) {
      for (std::size_t c = 0; c < ds.cols(); ++c) ASSERT_EQ(full.at(r, c), part.at(j, c));
    }
    ++j;
  }
}

TEST(PerturbDataset, UnstratifiedUsesOneBlock) {
  const auto ds = data::generate_synthetic(300, 0.3, {0.5, 0.4}, 6);
  auto spec = spec_for(0.1, 7);
  spec.group_stratified = false;
  for (const auto& e : perturb_dataset(ds, spec).log) {
    EXPECT_FALSE(e.group.has_value());
    EXPECT_EQ(e.selected, 30u);
  }
}

TEST(NoiseSpec, JsonRoundTripAndValidation) {
  NoiseSpec s = spec_for(0.07, 123);
  s.selection = SelectionMode::Bernoulli;
  s.apply_minima = true;
  const nlohmann::json j = s;
  EXPECT_EQ(j.get<NoiseSpec>(), s);
  EXPECT_EQ(j.at("selection"), "bernoulli");
  auto bad = j;
  bad["p"] = 1.2;
  EXPECT_THROW((void)bad.get<NoiseSpec>(), std::invalid_argument);
  bad = j;
  bad["sigma2"] = 0.0;
  EXPECT_THROW((void)bad.get<NoiseSpec>(), std::invalid_argument);
  EXPECT_THROW((void)selection_mode_from_string("sometimes"), std::invalid_argument);
}

}  // namespace
}  // namespace reliagap::noise
