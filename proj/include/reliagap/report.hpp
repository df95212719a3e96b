#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "reliagap/experiment.hpp"

namespace reliagap::report {

struct Series {
  std::string label;
  std::vector<std::optional<double>> values;  // one per x; gaps break the line
};

struct PlotSpec {
  std::string title;
  std::string x_label = "noise level p";
  std::string y_label;
  std::vector<double> x;
  std::vector<Series> series;
  std::optional<std::pair<double, double>> y_range;  // auto when empty
  std::filesystem::path output;
};

/// Standalone SVG with axes, ticks, legend and one polyline group per series.
/// Each series group carries its values verbatim in a data-values attribute
/// (same formatting as the CSV files). Output is a pure function of `spec`.
/// Throws std::invalid_argument for no series, a series without values, a
/// length mismatch with x, or duplicate labels.
[[nodiscard]] std::string render_gap_plot(const PlotSpec& spec);

/// Group 0 vs group 1 for one statistic.
[[nodiscard]] PlotSpec statistic_plot(const experiment::GapCurve& curve, const std::string& preset_name);

/// CK, PABAK and the two partial corrections for one group.
[[nodiscard]] PlotSpec decomposition_plot(const experiment::DecompositionCurves& d,
                                          const std::string& preset_name);

/// Renders CK, PABAK and ICC panels for every sigma2 in the table (and the
/// per-group decomposition panels when requested) into out_dir. Returns the
/// written paths in a fixed order.
std::vector<std::filesystem::path> write_plots(const experiment::AggregatedTable& table,
                                               const std::filesystem::path& out_dir, bool decomposition);

}  // namespace reliagap::report
