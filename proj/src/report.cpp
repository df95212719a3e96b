#include "reliagap/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

namespace reliagap::report {

namespace {

constexpr double kWidth = 680.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 220.0;  // legend column
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;

constexpr std::array<const char*, 6> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                                 "#8c564b"};
constexpr std::array<const char*, 4> kDash = {"", "6 3", "2 2", "8 3 2 3"};

std::string escape(const std::string& s) {
  std::string out;
  for (const char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

// Step from {1, 2, 5} x 10^k giving roughly `target` intervals.
double nice_step(double span, int target) {
  const double raw = span / target;
  const double magnitude = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / magnitude;
  const double m = r <= 1.0 ? 1.0 : r <= 2.0 ? 2.0 : r <= 5.0 ? 5.0 : 10.0;
  return m * magnitude;
}

std::vector<double> ticks(double lo, double hi, double step) {
  std::vector<double> out;
  const long first = std::lround(std::ceil(lo / step - 1e-9));
  const long last = std::lround(std::floor(hi / step + 1e-9));
  for (long i = first; i <= last; ++i) out.push_back(static_cast<double>(i) * step);
  return out;
}

std::string tick_label(double v, double step) {
  const int decimals = std::max(0, static_cast<int>(std::ceil(-std::log10(step) - 1e-9)));
  if (std::abs(v) < step * 1e-6) v = 0.0;
  return fmt::format("{:.{}f}", v, decimals);
}

std::string sigma_tag(std::optional<double> sigma2) {
  return sigma2 ? fmt::format("sigma2-{}", *sigma2) : std::string("sigma2-NA");
}

std::string sigma_title(std::optional<double> sigma2) {
  return sigma2 ? fmt::format("σ² = {}", *sigma2) : std::string("σ² n/a");
}

std::string display_name(experiment::Statistic s) {
  using experiment::Statistic;
  switch (s) {
    case Statistic::CK: return "Cohen's Kappa";
    case Statistic::PABAK: return "PABAK";
    case Statistic::ICC: return "ICC(A,1)";
    default: return std::string(experiment::statistic_name(s));
  }
}

}  // namespace

std::string render_gap_plot(const PlotSpec& spec) {
  if (spec.series.empty()) throw std::invalid_argument("plot needs at least one series");
  if (spec.x.empty()) throw std::invalid_argument("plot needs a non-empty x grid");
  std::set<std::string> labels;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& s : spec.series) {
    if (!labels.insert(s.label).second) throw std::invalid_argument("duplicate series label '" + s.label + "'");
    if (s.values.size() != spec.x.size()) {
      throw std::invalid_argument("series '" + s.label + "' does not match the x grid");
    }
    bool any = false;
    for (const auto& v : s.values) {
      if (!v) continue;
      any = true;
      lo = std::min(lo, *v);
      hi = std::max(hi, *v);
    }
    if (!any) throw std::invalid_argument("series '" + s.label + "' is empty");
  }
  if (spec.y_range) {
    lo = spec.y_range->first;
    hi = spec.y_range->second;
  } else {
    const double pad = hi > lo ? 0.05 * (hi - lo) : 0.05 * std::max(1.0, std::abs(hi));
    lo -= pad;
    hi += pad;
  }
  const double x_lo = spec.x.front();
  const double x_hi = spec.x.back() > x_lo ? spec.x.back() : x_lo + 1.0;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * plot_w; };
  auto py = [&](double y) { return kTop + (hi - y) / (hi - lo) * plot_h; };

  std::string svg;
  svg += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"sans-serif\" font-size=\"12\">\n",
      kWidth, kHeight);
  svg += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n", kWidth, kHeight);
  svg += fmt::format("<text x=\"{:.2f}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
                     kLeft + plot_w / 2, escape(spec.title));

  // Grid and ticks.
  const double y_step = nice_step(hi - lo, 5);
  svg += "<g class=\"y-axis\" stroke=\"#dddddd\">\n";
  for (const double t : ticks(lo, hi, y_step)) {
    svg += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\"/>\n", kLeft, py(t),
                       kLeft + plot_w, py(t));
    svg += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\" stroke=\"none\" fill=\"black\">{}</text>\n",
        kLeft - 6, py(t) + 4, tick_label(t, y_step));
  }
  svg += "</g>\n";
  const double x_step = nice_step(x_hi - x_lo, 6);
  svg += "<g class=\"x-axis\" stroke=\"#dddddd\">\n";
  for (const double t : ticks(x_lo, x_hi, x_step)) {
    svg += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\"/>\n", px(t), kTop, px(t),
                       kTop + plot_h);
    svg += fmt::format(
        "<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" stroke=\"none\" fill=\"black\">{}</text>\n",
        px(t), kTop + plot_h + 18, tick_label(t, x_step));
  }
  svg += "</g>\n";
  svg += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" "
                     "stroke=\"black\"/>\n",
                     kLeft, kTop, plot_w, plot_h);
  svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", kLeft + plot_w / 2,
                     kHeight - 12, escape(spec.x_label));
  svg += fmt::format("<text x=\"16\" y=\"{:.2f}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2f})\">{}"
                     "</text>\n",
                     kTop + plot_h / 2, kTop + plot_h / 2, escape(spec.y_label));

  // Series.
  for (std::size_t i = 0; i < spec.series.size(); ++i) {
    const auto& s = spec.series[i];
    const char* color = kPalette[i % kPalette.size()];
    const char* dash = kDash[i % kDash.size()];
    std::string values;
    for (std::size_t k = 0; k < s.values.size(); ++k) {
      if (k > 0) values += ' ';
      values += experiment::format_value(s.values[k]);
    }
    svg += fmt::format("<g class=\"series\" data-label=\"{}\" data-values=\"{}\" fill=\"none\" stroke=\"{}\" "
                       "stroke-width=\"1.8\"{}>\n",
                       escape(s.label), values, color,
                       *dash ? fmt::format(" stroke-dasharray=\"{}\"", dash) : std::string());
    std::string points;
    auto flush = [&] {
      if (!points.empty()) svg += fmt::format("<polyline points=\"{}\"/>\n", points);
      points.clear();
    };
    for (std::size_t k = 0; k < s.values.size(); ++k) {
      if (!s.values[k]) {
        flush();
        continue;
      }
      if (!points.empty()) points += ' ';
      points += fmt::format("{:.2f},{:.2f}", px(spec.x[k]), py(*s.values[k]));
    }
    flush();
    svg += "</g>\n";

    const double ly = kTop + 10 + 20.0 * static_cast<double>(i);
    const double lx = kLeft + plot_w + 14;
    svg += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" "
                       "stroke-width=\"1.8\"{}/>\n",
                       lx, ly, lx + 24, ly, color,
                       *dash ? fmt::format(" stroke-dasharray=\"{}\"", dash) : std::string());
    svg += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", lx + 30, ly + 4, escape(s.label));
  }
  svg += "</svg>\n";
  return svg;
}

PlotSpec statistic_plot(const experiment::GapCurve& curve, const std::string& preset_name) {
  PlotSpec spec;
  spec.title = fmt::format("{}, {}, {}", display_name(curve.statistic), preset_name, sigma_title(curve.sigma2));
  spec.y_label = display_name(curve.statistic);
  Series g0{"group 0", {}};
  Series g1{"group 1", {}};
  for (const auto& point : curve.points) {
    spec.x.push_back(point.p);
    g0.values.push_back(point.value[0]);
    g1.values.push_back(point.value[1]);
  }
  spec.series = {std::move(g0), std::move(g1)};
  spec.output = fmt::format("{}_{}_{}.svg", preset_name, sigma_tag(curve.sigma2),
                            experiment::statistic_name(curve.statistic));
  return spec;
}

PlotSpec decomposition_plot(const experiment::DecompositionCurves& d, const std::string& preset_name) {
  PlotSpec spec;
  spec.title = fmt::format("PI and BI correction, group {}, {}, {}", d.group, preset_name, sigma_title(d.sigma2));
  spec.y_label = "kappa";
  spec.x = d.p;
  spec.series = {
      {"CK", d.ck},
      {"PABAK", d.pabak},
      {"bias-only (PI = 0)", d.ck_bias_only},
      {"prevalence-only (BI = 0)", d.ck_prevalence_only},
  };
  spec.output = fmt::format("{}_{}_decomposition_group{}.svg", preset_name, sigma_tag(d.sigma2), d.group);
  return spec;
}

std::vector<std::filesystem::path> write_plots(const experiment::AggregatedTable& table,
                                               const std::filesystem::path& out_dir, bool decomposition) {
  using experiment::Statistic;
  std::filesystem::create_directories(out_dir);
  std::vector<std::optional<double>> sigmas;
  for (const auto& c : table.curves) {
    if (std::find(sigmas.begin(), sigmas.end(), c.sigma2) == sigmas.end()) sigmas.push_back(c.sigma2);
  }

  std::vector<std::filesystem::path> written;
  auto emit = [&](const PlotSpec& spec) {
    const auto path = out_dir / spec.output;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << render_gap_plot(spec);
    written.push_back(path);
  };
  for (const auto& sigma2 : sigmas) {
    for (const auto stat : {Statistic::CK, Statistic::PABAK, Statistic::ICC}) {
      emit(statistic_plot(experiment::find_curve(table.curves, stat, sigma2), table.preset_name));
    }
    if (decomposition) {
      for (const auto& d : experiment::decompose_correction(std::span<const experiment::GapCurve>(table.curves),
                                                            sigma2)) {
        emit(decomposition_plot(d, table.preset_name));
      }
    }
  }
  return written;
}

}  // namespace reliagap::report
