#include "reliagap/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "reliagap/irr_stats.hpp"
#include "reliagap/rng.hpp"

namespace reliagap::experiment {

void ExperimentPreset::validate() const {
  if (p_grid.empty()) throw std::invalid_argument("preset '" + name + "' has an empty p grid");
  for (std::size_t i = 0; i < p_grid.size(); ++i) {
    if (!(p_grid[i] >= 0.0 && p_grid[i] <= 1.0)) {
      throw std::invalid_argument("preset '" + name + "': p values must lie in [0, 1]");
    }
    if (i > 0 && !(p_grid[i] > p_grid[i - 1])) {
      throw std::invalid_argument("preset '" + name + "': p grid must be strictly increasing");
    }
  }
  if (sigma2_applicable) {
    if (sigma2_values.empty()) throw std::invalid_argument("preset '" + name + "' has no sigma2 values");
    for (const double s : sigma2_values) {
      if (!(s > 0.0)) throw std::invalid_argument("preset '" + name + "': sigma2 must be positive");
    }
  }
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"all-features", "all-features-minima", "numeric-only",
                                                 "categorical-only"};
  return names;
}

ExperimentPreset preset(const std::string& name) {
  ExperimentPreset p;
  p.name = name;
  p.sigma2_values = {1.0, 5.0, 10.0};
  p.p_grid = make_p_grid(0.0, 0.3, 0.01);
  if (name == "all-features") {
  } else if (name == "all-features-minima") {
    p.apply_minima = true;
  } else if (name == "numeric-only") {
    p.perturb_categorical = false;
  } else if (name == "categorical-only") {
    p.perturb_numeric = false;
    p.sigma2_applicable = false;
    p.sigma2_values.clear();
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  return p;
}

std::vector<double> make_p_grid(double p_min, double p_max, double p_step) {
  if (!(p_step > 0.0)) throw std::invalid_argument("p step must be positive");
  if (!(p_min >= 0.0 && p_max <= 1.0 && p_min <= p_max)) {
    throw std::invalid_argument("p range must satisfy 0 <= p_min <= p_max <= 1");
  }
  std::vector<double> grid;
  for (std::size_t i = 0;; ++i) {
    const double raw = p_min + static_cast<double>(i) * p_step;
    if (raw > p_max + 1e-9) break;
    grid.push_back(std::round(raw * 1e12) / 1e12);
  }
  return grid;
}

std::string_view statistic_name(Statistic s) {
  switch (s) {
    case Statistic::CK: return "ck";
    case Statistic::PABAK: return "pabak";
    case Statistic::BI: return "bi";
    case Statistic::PI: return "pi";
    case Statistic::CKBiasOnly: return "ck_bias_only";
    case Statistic::CKPrevalenceOnly: return "ck_prevalence_only";
    case Statistic::ICC: return "icc_a1";
    case Statistic::MeanScore: return "mean_score";
    case Statistic::PredictionPrevalence: return "prediction_prevalence";
  }
  return "?";
}

Statistic statistic_from_name(std::string_view name) {
  for (const auto s : kAllStatistics) {
    if (statistic_name(s) == name) return s;
  }
  throw std::invalid_argument(fmt::format("unknown statistic '{}'", name));
}

std::optional<double> GroupStats::get(Statistic s) const {
  switch (s) {
    case Statistic::CK: return ck;
    case Statistic::PABAK: return pabak;
    case Statistic::BI: return bi;
    case Statistic::PI: return pi;
    case Statistic::CKBiasOnly: return ck_bias_only;
    case Statistic::CKPrevalenceOnly: return ck_prevalence_only;
    case Statistic::ICC: return icc_a1;
    case Statistic::MeanScore: return mean_score;
    case Statistic::PredictionPrevalence: return prediction_prevalence;
  }
  return std::nullopt;
}

noise::NoiseSpec cell_noise_spec(const ExperimentPreset& preset, double p, std::optional<double> sigma2,
                                 std::uint64_t base_seed, std::size_t fold, std::size_t p_index,
                                 const CellOptions& options) {
  noise::NoiseSpec spec;
  spec.p = p;
  spec.sigma2 = sigma2.value_or(1.0);
  spec.perturb_categorical = preset.perturb_categorical;
  spec.perturb_numeric = preset.perturb_numeric && sigma2.has_value();
  spec.apply_minima = preset.apply_minima;
  spec.group_stratified = options.group_stratified;
  spec.selection = options.selection;
  const std::uint64_t sigma_bits = sigma2 ? std::bit_cast<std::uint64_t>(*sigma2) : 0;
  spec.seed = rng::derive_seed(base_seed, {fold, p_index, sigma_bits});
  return spec;
}

CellResult run_cell(const FoldModel& fold_model, const data::Dataset& test, const ExperimentPreset& preset,
                    std::size_t p_index, double p, std::optional<double> sigma2, std::uint64_t base_seed,
                    std::size_t fold, const CellOptions& options) {
  const auto spec = cell_noise_spec(preset, p, sigma2, base_seed, fold, p_index, options);
  auto perturbed = noise::perturb_dataset(test, spec);

  const auto x_orig = model::apply_scaler(fold_model.scaler, test);
  const auto x_pert = model::apply_scaler(fold_model.scaler, perturbed.data);
  const auto pred_orig = model::predict(fold_model.model, x_orig, options.threshold);
  const auto pred_pert = model::predict(fold_model.model, x_pert, options.threshold);

  CellResult cell;
  cell.p = p;
  cell.p_index = p_index;
  cell.sigma2 = sigma2;
  cell.fold = fold;
  cell.test_size = test.rows();
  cell.noise_log = std::move(perturbed.log);

  const auto groups = test.groups();
  for (std::uint8_t g = 0; g <= 1; ++g) {
    std::vector<std::uint8_t> label_r, label_s;
    std::vector<double> score_r, score_s;
    for (std::size_t i = 0; i < test.rows(); ++i) {
      if (groups[i] != g) continue;
      label_r.push_back(pred_orig.labels[i]);
      label_s.push_back(pred_pert.labels[i]);
      score_r.push_back(pred_orig.scores[i]);
      score_s.push_back(pred_pert.scores[i]);
    }
    GroupStats& out = cell.groups[g];
    out.n_subjects = label_r.size();
    if (label_r.empty()) continue;

    const auto m = irr::confusion_from_pairs(label_r, label_s);
    const auto k = irr::kappa_decomposition(m);
    if (k.ck_reconstructed && std::abs(k.ck - *k.ck_reconstructed) > 1e-12) {
      throw std::logic_error(fmt::format("kappa identity violated: ck={} reconstructed={}", k.ck,
                                         *k.ck_reconstructed));
    }
    out.ck = k.ck;
    out.pabak = k.pabak;
    out.bi = k.bi;
    out.pi = k.pi;
    out.ck_bias_only = k.ck_bias_only;
    out.ck_prevalence_only = k.ck_prevalence_only;
    if (score_r.size() >= 2) out.icc_a1 = irr::icc_a1(score_r, score_s);

    double score_sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < score_s.size(); ++i) {
      score_sum += score_s[i];
      positives += label_s[i];
    }
    out.mean_score = score_sum / static_cast<double>(score_s.size());
    out.prediction_prevalence = static_cast<double>(positives) / static_cast<double>(label_s.size());
  }
  return cell;
}

namespace {

// Runs task(i) for i in [0, count) on up to `jobs` threads. The first
// exception (lowest index) is rethrown after all workers finish.
template <typename Task>
void parallel_for(std::size_t count, std::size_t jobs, Task task) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < jobs; ++t) threads.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

bool sigma_less(const std::optional<double>& a, const std::optional<double>& b) {
  if (!a) return b.has_value();
  if (!b) return false;
  return *a < *b;
}

}  // namespace

std::vector<FoldModel> fit_fold_models(const data::Dataset& ds, const data::FoldAssignment& folds,
                                       const model::FitOptions& fit, std::size_t jobs) {
  std::vector<FoldModel> models(folds.n_folds());
  parallel_for(folds.n_folds(), jobs, [&](std::size_t f) {
    const auto train_rows = folds.train_indices(f);
    const auto train = ds.subset(train_rows);
    FoldModel fm;
    fm.scaler = model::fit_scaler(train);
    fm.model = model::fit_logistic(model::apply_scaler(fm.scaler, train), train.labels(), fit);
    models[f] = std::move(fm);
  });
  return models;
}

std::optional<double> CurvePoint::gap() const {
  if (value[0] && value[1]) return *value[0] - *value[1];
  return std::nullopt;
}

std::vector<GapCurve> aggregate_curves(std::span<const CellResult> cells) {
  std::vector<const CellResult*> sorted;
  for (const auto& c : cells) sorted.push_back(&c);
  std::sort(sorted.begin(), sorted.end(), [](const CellResult* a, const CellResult* b) {
    if (sigma_less(a->sigma2, b->sigma2)) return true;
    if (sigma_less(b->sigma2, a->sigma2)) return false;
    if (a->p != b->p) return a->p < b->p;
    return a->fold < b->fold;
  });

  std::vector<GapCurve> curves;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const auto sigma2 = sorted[i]->sigma2;
    std::size_t end = i;
    while (end < sorted.size() && !sigma_less(sigma2, sorted[end]->sigma2)) ++end;

    for (const auto stat : kAllStatistics) {
      GapCurve curve;
      curve.statistic = stat;
      curve.sigma2 = sigma2;
      std::size_t j = i;
      while (j < end) {
        const double p = sorted[j]->p;
        CurvePoint point;
        point.p = p;
        std::array<double, 2> sum = {0.0, 0.0};
        for (; j < end && sorted[j]->p == p; ++j) {
          for (std::size_t g = 0; g < 2; ++g) {
            if (const auto v = sorted[j]->groups[g].get(stat)) {
              sum[g] += *v;
              ++point.folds[g];
            }
          }
        }
        for (std::size_t g = 0; g < 2; ++g) {
          if (point.folds[g] > 0) point.value[g] = sum[g] / static_cast<double>(point.folds[g]);
        }
        curve.points.push_back(point);
      }
      curves.push_back(std::move(curve));
    }
    i = end;
  }
  return curves;
}

const GapCurve& find_curve(std::span<const GapCurve> curves, Statistic s, std::optional<double> sigma2) {
  for (const auto& c : curves) {
    if (c.statistic == s && c.sigma2 == sigma2) return c;
  }
  throw std::out_of_range(fmt::format("no curve for {} at sigma2={}", statistic_name(s), format_value(sigma2)));
}

std::array<DecompositionCurves, 2> decompose_correction(std::span<const CellResult> cells,
                                                        std::optional<double> sigma2) {
  std::vector<CellResult> selected;
  for (const auto& c : cells) {
    if (c.sigma2 == sigma2) selected.push_back(c);
  }
  if (selected.empty()) {
    throw std::invalid_argument("no cells for sigma2=" + format_value(sigma2));
  }
  return decompose_correction(std::span<const GapCurve>(aggregate_curves(selected)), sigma2);
}

std::array<DecompositionCurves, 2> decompose_correction(std::span<const GapCurve> curves,
                                                        std::optional<double> sigma2) {
  const auto& ck = find_curve(curves, Statistic::CK, sigma2);
  const auto& pabak = find_curve(curves, Statistic::PABAK, sigma2);
  const auto& bias_only = find_curve(curves, Statistic::CKBiasOnly, sigma2);
  const auto& prev_only = find_curve(curves, Statistic::CKPrevalenceOnly, sigma2);

  std::array<DecompositionCurves, 2> out;
  for (std::uint8_t g = 0; g < 2; ++g) {
    auto& d = out[g];
    d.sigma2 = sigma2;
    d.group = g;
    for (std::size_t k = 0; k < ck.points.size(); ++k) {
      d.p.push_back(ck.points[k].p);
      d.ck.push_back(ck.points[k].value[g]);
      d.pabak.push_back(pabak.points[k].value[g]);
      d.ck_bias_only.push_back(bias_only.points[k].value[g]);
      d.ck_prevalence_only.push_back(prev_only.points[k].value[g]);
    }
  }
  return out;
}

SweepResult run_sweep(const data::Dataset& ds, const SweepConfig& config,
                      const std::vector<FoldModel>* models) {
  config.preset.validate();
  SweepResult result;
  result.preset = config.preset;
  result.folds = data::assign_folds(ds, config.n_folds, config.base_seed, config.fold_strategy);

  if (models) {
    if (models->size() != config.n_folds) {
      throw SweepError(fmt::format("{} stored fold models for {} folds", models->size(), config.n_folds));
    }
    result.models = *models;
  } else {
    result.models = fit_fold_models(ds, result.folds, config.fit, config.jobs);
  }

  std::vector<data::Dataset> tests;
  for (std::size_t f = 0; f < config.n_folds; ++f) tests.push_back(ds.subset(result.folds.test_indices(f)));

  std::vector<std::optional<double>> sigmas;
  if (config.preset.sigma2_applicable) {
    for (const double s : config.preset.sigma2_values) sigmas.emplace_back(s);
  } else {
    sigmas.emplace_back(std::nullopt);
  }

  struct Coord {
    std::optional<double> sigma2;
    std::size_t p_index;
    std::size_t fold;
  };
  std::vector<Coord> coords;
  for (const auto& s : sigmas) {
    for (std::size_t pi = 0; pi < config.preset.p_grid.size(); ++pi) {
      for (std::size_t f = 0; f < config.n_folds; ++f) coords.push_back({s, pi, f});
    }
  }

  result.cells.resize(coords.size());
  std::mutex error_mutex;
  std::optional<std::string> first_error;
  std::size_t first_error_index = coords.size();
  parallel_for(coords.size(), config.jobs, [&](std::size_t i) {
    const auto& c = coords[i];
    const double p = config.preset.p_grid[c.p_index];
    try {
      result.cells[i] = run_cell(result.models[c.fold], tests[c.fold], config.preset, c.p_index, p, c.sigma2,
                                 config.base_seed, c.fold, config.cell);
    } catch (const std::exception& e) {
      std::lock_guard lock(error_mutex);
      if (i < first_error_index) {
        first_error_index = i;
        first_error = fmt::format("cell (sigma2={}, p={}, fold={}): {}", format_value(c.sigma2), p, c.fold,
                                  e.what());
      }
    }
  });
  if (first_error) throw SweepError(*first_error);

  result.curves = aggregate_curves(result.cells);
  return result;
}

std::string format_value(std::optional<double> v) {
  if (!v) return "NA";
  return fmt::format("{}", *v);
}

void write_results_csv(std::ostream& out, const std::string& preset_name, std::span<const CellResult> cells) {
  out << "preset,sigma2,p,fold,group,n_subjects";
  for (const auto s : kAllStatistics) out << ',' << statistic_name(s);
  out << '\n';
  for (const auto& c : cells) {
    for (std::size_t g = 0; g < 2; ++g) {
      out << preset_name << ',' << format_value(c.sigma2) << ',' << format_value(c.p) << ',' << c.fold << ','
          << g << ',' << c.groups[g].n_subjects;
      for (const auto s : kAllStatistics) out << ',' << format_value(c.groups[g].get(s));
      out << '\n';
    }
  }
}

void write_aggregated_csv(std::ostream& out, const std::string& preset_name, std::span<const GapCurve> curves) {
  out << "preset,sigma2,p,group";
  for (const auto s : kAllStatistics) out << ',' << statistic_name(s) << ',' << statistic_name(s) << "_folds";
  out << '\n';

  std::vector<std::optional<double>> sigmas;
  for (const auto& c : curves) {
    if (std::find(sigmas.begin(), sigmas.end(), c.sigma2) == sigmas.end()) sigmas.push_back(c.sigma2);
  }
  for (const auto& sigma2 : sigmas) {
    std::vector<const GapCurve*> row_curves;
    for (const auto s : kAllStatistics) row_curves.push_back(&find_curve(curves, s, sigma2));
    const std::size_t n_points = row_curves.front()->points.size();
    for (std::size_t k = 0; k < n_points; ++k) {
      for (std::size_t g = 0; g < 2; ++g) {
        out << preset_name << ',' << format_value(sigma2) << ',' << format_value(row_curves.front()->points[k].p)
            << ',' << g;
        for (const auto* curve : row_curves) {
          const auto& point = curve->points.at(k);
          out << ',' << format_value(point.value[g]) << ',' << point.folds[g];
        }
        out << '\n';
      }
    }
  }
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> parse_value(const std::string& s, std::size_t line_no) {
  if (s == "NA") return std::nullopt;
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || s.empty()) {
    throw std::runtime_error(fmt::format("aggregated CSV line {}: '{}' is not a number", line_no, s));
  }
  return v;
}

}  // namespace

AggregatedTable read_aggregated_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open aggregated results '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("'" + path.string() + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split(line);
  if (header.size() < 4 || header[0] != "preset" || header[1] != "sigma2" || header[2] != "p" ||
      header[3] != "group") {
    throw std::runtime_error("'" + path.string() + "' is not an aggregated results file");
  }
  std::vector<std::pair<Statistic, std::size_t>> stat_columns;
  for (std::size_t i = 4; i + 1 < header.size(); i += 2) {
    stat_columns.emplace_back(statistic_from_name(header[i]), i);
  }

  AggregatedTable table;
  std::map<std::pair<int, std::size_t>, GapCurve> by_key;  // (sigma index, stat index)
  std::vector<std::optional<double>> sigmas;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error(fmt::format("aggregated CSV line {}: expected {} fields", line_no, header.size()));
    }
    table.preset_name = fields[0];
    const auto sigma2 = parse_value(fields[1], line_no);
    const auto p = parse_value(fields[2], line_no);
    if (!p) throw std::runtime_error(fmt::format("aggregated CSV line {}: p is NA", line_no));
    const int group = fields[3] == "0" ? 0 : fields[3] == "1" ? 1 : -1;
    if (group < 0) throw std::runtime_error(fmt::format("aggregated CSV line {}: bad group", line_no));

    auto sit = std::find(sigmas.begin(), sigmas.end(), sigma2);
    if (sit == sigmas.end()) {
      sigmas.push_back(sigma2);
      sit = sigmas.end() - 1;
    }
    const int sigma_index = static_cast<int>(sit - sigmas.begin());
    for (std::size_t k = 0; k < stat_columns.size(); ++k) {
      auto& curve = by_key[{sigma_index, k}];
      curve.statistic = stat_columns[k].first;
      curve.sigma2 = sigma2;
      if (curve.points.empty() || curve.points.back().p != *p) {
        curve.points.push_back(CurvePoint{*p, {}, {0, 0}});
      }
      auto& point = curve.points.back();
      point.value[group] = parse_value(fields[stat_columns[k].second], line_no);
      point.folds[group] = static_cast<std::size_t>(std::stoul(fields[stat_columns[k].second + 1]));
    }
  }
  for (auto& [key, curve] : by_key) table.curves.push_back(std::move(curve));
  return table;
}

void save_fold_models(const std::filesystem::path& path, const StoredModels& models) {
  nlohmann::json j;
  j["config_hash"] = models.config_hash;
  j["folds"] = nlohmann::json::array();
  for (const auto& f : models.folds) j["folds"].push_back({{"scaler", f.scaler}, {"model", f.model}});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

StoredModels load_fold_models(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file '" + path.string() + "'");
  try {
    const auto j = nlohmann::json::parse(in);
    StoredModels out;
    out.config_hash = j.at("config_hash").get<std::string>();
    for (const auto& f : j.at("folds")) {
      FoldModel fm;
      fm.scaler = f.at("scaler").get<model::Scaler>();
      fm.model = f.at("model").get<model::LogisticModel>();
      out.folds.push_back(std::move(fm));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("model file '" + path.string() + "': " + e.what());
  }
}

}  // namespace reliagap::experiment
