#include <regex>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "reliagap/report.hpp"
#include "test_support.hpp"

namespace reliagap::report {
namespace {

using experiment::CurvePoint;
using experiment::GapCurve;
using experiment::Statistic;

std::size_t count(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

PlotSpec two_series() {
  PlotSpec spec;
  spec.title = "t";
  spec.y_label = "y";
  spec.x = {0.0, 0.1, 0.2};
  spec.series = {{"a", {0.9, 0.8, 0.7}}, {"b", {0.95, std::nullopt, 0.75}}};
  return spec;
}

TEST(RenderSvg, ConstantSeriesGiveOverlappingHorizontalLines) {
  PlotSpec spec;
  spec.x = {0.0, 0.1, 0.2, 0.3};
  spec.series = {{"group 0", {1.0, 1.0, 1.0, 1.0}}, {"group 1", {1.0, 1.0, 1.0, 1.0}}};
  const auto svg = render_gap_plot(spec);
  std::regex polyline("<polyline points=\"([^\"]*)\"/>");
  std::vector<std::string> lines;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), polyline); it != std::sregex_iterator(); ++it) {
    lines.push_back((*it)[1]);
  }
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0], lines[1]);
  std::regex point("[0-9.]+,([0-9.]+)");
  std::set<std::string> ys;
  for (auto it = std::sregex_iterator(lines[0].begin(), lines[0].end(), point); it != std::sregex_iterator(); ++it) {
    ys.insert((*it)[1]);
  }
  EXPECT_EQ(ys.size(), 1u);
}

TEST(RenderSvg, IsDeterministicAndStandalone) {
  const auto a = render_gap_plot(two_series());
  const auto b = render_gap_plot(two_series());
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.rfind("<svg xmlns=\"http://www.w3.org/2000/svg\"", 0), 0u);
  EXPECT_EQ(a.substr(a.size() - 7), "</svg>\n");
  EXPECT_EQ(count(a, "<g class=\"series\""), 2u);
  EXPECT_EQ(count(a, "class=\"x-axis\""), 1u);
  EXPECT_EQ(count(a, "class=\"y-axis\""), 1u);
}

TEST(RenderSvg, GapsSplitPolylinesAndValuesAreVerbatim) {
  const auto svg = render_gap_plot(two_series());
  EXPECT_NE(svg.find("data-label=\"b\" data-values=\"0.95 NA 0.75\""), std::string::npos);
  EXPECT_NE(svg.find("data-label=\"a\" data-values=\"0.9 0.8 0.7\""), std::string::npos);
  // Series a draws one polyline, series b two single-point pieces.
  EXPECT_EQ(count(svg, "<polyline"), 3u);
}

TEST(RenderSvg, EscapesText) {
  auto spec = two_series();
  spec.title = "a<b & \"c\"";
  const auto svg = render_gap_plot(spec);
  EXPECT_NE(svg.find("a&lt;b &amp; &quot;c&quot;"), std::string::npos);
  EXPECT_EQ(svg.find("a<b"), std::string::npos);
}

TEST(RenderSvg, FixedRangeIsHonoured) {
  auto spec = two_series();
  spec.y_range = std::make_pair(0.0, 1.0);
  const auto svg = render_gap_plot(spec);
  EXPECT_NE(svg.find(">0.0</text>"), std::string::npos);
  EXPECT_NE(svg.find(">1.0</text>"), std::string::npos);
}

TEST(RenderSvg, RejectsInvalidSpecs) {
  auto spec = two_series();
  spec.series.clear();
  EXPECT_THROW((void)render_gap_plot(spec), std::invalid_argument);

  spec = two_series();
  spec.series[1].label = "a";
  EXPECT_THROW((void)render_gap_plot(spec), std::invalid_argument);

  spec = two_series();
  spec.series[0].values.pop_back();
  EXPECT_THROW((void)render_gap_plot(spec), std::invalid_argument);

  spec = two_series();
  spec.series[0].values = {std::nullopt, std::nullopt, std::nullopt};
  EXPECT_THROW((void)render_gap_plot(spec), std::invalid_argument);

  spec = two_series();
  spec.x.clear();
  EXPECT_THROW((void)render_gap_plot(spec), std::invalid_argument);
}

GapCurve curve(Statistic s, double base) {
  GapCurve c;
  c.statistic = s;
  c.sigma2 = 5.0;
  for (int k = 0; k < 4; ++k) {
    const double p = 0.1 * k;
    c.points.push_back(CurvePoint{p, {base - p, base - 2 * p}, {5, 5}});
  }
  return c;
}

TEST(Builders, StatisticPlotHasTwoGroupSeries) {
  const auto spec = statistic_plot(curve(Statistic::PABAK, 1.0), "all-features");
  ASSERT_EQ(spec.series.size(), 2u);
  EXPECT_EQ(spec.series[0].label, "group 0");
  EXPECT_EQ(spec.series[1].label, "group 1");
  EXPECT_EQ(spec.output, "all-features_sigma2-5_pabak.svg");
  EXPECT_EQ(spec.x.size(), 4u);
}

experiment::AggregatedTable table_of_all_statistics() {
  experiment::AggregatedTable t;
  t.preset_name = "all-features";
  double base = 1.0;
  for (const auto s : experiment::kAllStatistics) t.curves.push_back(curve(s, base -= 0.01));
  return t;
}

TEST(Builders, DecompositionPlotHasFourSeriesPerGroup) {
  const auto t = table_of_all_statistics();
  const auto parts = experiment::decompose_correction(std::span<const GapCurve>(t.curves), 5.0);
  for (const auto& d : parts) {
    const auto spec = decomposition_plot(d, t.preset_name);
    ASSERT_EQ(spec.series.size(), 4u);
    EXPECT_EQ(spec.series[0].label, "CK");
    EXPECT_EQ(spec.series[1].label, "PABAK");
    EXPECT_NE(spec.output.string().find(fmt::format("decomposition_group{}", d.group)), std::string::npos);
  }
}

TEST(WritePlots, WritesThreePanelsAndOptionalDecomposition) {
  testing::TempDir dir;
  const auto t = table_of_all_statistics();
  const auto basic = write_plots(t, dir.path(), false);
  ASSERT_EQ(basic.size(), 3u);
  EXPECT_EQ(basic[0].filename(), "all-features_sigma2-5_ck.svg");
  EXPECT_EQ(basic[1].filename(), "all-features_sigma2-5_pabak.svg");
  EXPECT_EQ(basic[2].filename(), "all-features_sigma2-5_icc_a1.svg");
  for (const auto& p : basic) EXPECT_TRUE(std::filesystem::exists(p));
  EXPECT_EQ(write_plots(t, dir.path(), true).size(), 5u);
}

TEST(WritePlots, PlottedValuesComeFromTheTable) {
  testing::TempDir dir;
  const auto t = table_of_all_statistics();
  const auto paths = write_plots(t, dir.path(), false);
  const auto svg = testing::read_text(paths[0]);
  const auto& ck = experiment::find_curve(t.curves, Statistic::CK, 5.0);
  std::string expected;
  for (const auto& p : ck.points) expected += (expected.empty() ? "" : " ") + experiment::format_value(p.value[1]);
  EXPECT_NE(svg.find("data-label=\"group 1\" data-values=\"" + expected + "\""), std::string::npos);
}

}  // namespace
}  // namespace reliagap::report
