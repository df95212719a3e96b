#include "reliagap/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <json.hpp>

#include "reliagap/data.hpp"
#include "reliagap/experiment.hpp"
#include "reliagap/hash.hpp"
#include "reliagap/irr_stats.hpp"
#include "reliagap/report.hpp"

namespace reliagap {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr const char* kDefaultData = "data/propublica-recidivism_numerical-binsensitive.csv";
constexpr const char* kDefaultSchemaMap = "data/compas_schema_map.json";

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt_value(std::optional<double> v) { return experiment::format_value(v); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << bytes;
}

// ---- stats -----------------------------------------------------------------

struct PairColumns {
  std::vector<double> r;
  std::vector<double> s;
};

PairColumns read_pairs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pairs file '" + path.string() + "'");
  PairColumns out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw std::runtime_error(fmt::format("'{}' line {}: expected two comma-separated values", path.string(),
                                           line_no));
    }
    const std::string a = line.substr(0, comma);
    const std::string b = line.substr(comma + 1);
    double x = 0.0;
    double y = 0.0;
    std::size_t ua = 0;
    std::size_t ub = 0;
    try {
      x = std::stod(a, &ua);
      y = std::stod(b, &ub);
    } catch (const std::exception&) {
      ua = 0;
    }
    if (ua != a.size() || ub != b.size() || a.empty() || b.empty()) {
      if (line_no == 1 && out.r.empty()) continue;  // header
      throw std::runtime_error(fmt::format("'{}' line {}: '{}' is not a pair of numbers", path.string(),
                                           line_no, line));
    }
    out.r.push_back(x);
    out.s.push_back(y);
  }
  if (out.r.empty()) throw std::runtime_error("'" + path.string() + "' contains no pairs");
  return out;
}

void print_binary_stats(std::ostream& out, std::span<const std::uint8_t> r, std::span<const std::uint8_t> s) {
  const auto m = irr::confusion_from_pairs(r, s);
  const auto d = irr::kappa_decomposition(m);
  out << "n=" << m.n() << '\n';
  out << "a=" << m.a() << '\n' << "b=" << m.b() << '\n' << "c=" << m.c() << '\n' << "d=" << m.d() << '\n';
  out << "p_o=" << fmt_value(irr::observed_agreement(m)) << '\n';
  out << "p_c=" << fmt_value(irr::chance_agreement(m)) << '\n';
  out << "ck=" << fmt_value(d.ck) << '\n';
  out << "pabak=" << fmt_value(d.pabak) << '\n';
  out << "bi=" << fmt_value(d.bi) << '\n';
  out << "pi=" << fmt_value(d.pi) << '\n';
  out << "ck_bias_only=" << fmt_value(d.ck_bias_only) << '\n';
  out << "ck_prevalence_only=" << fmt_value(d.ck_prevalence_only) << '\n';
  out << "ck_reconstructed=" << fmt_value(d.ck_reconstructed) << '\n';
}

int cmd_stats(const std::string& mode, const fs::path& input, std::optional<double> threshold,
              std::ostream& out) {
  const auto pairs = read_pairs(input);
  if (mode == "binary") {
    std::vector<std::uint8_t> r;
    std::vector<std::uint8_t> s;
    for (std::size_t i = 0; i < pairs.r.size(); ++i) {
      const double x = pairs.r[i];
      const double y = pairs.s[i];
      if ((x != 0.0 && x != 1.0) || (y != 0.0 && y != 1.0)) {
        throw std::runtime_error(fmt::format("'{}' pair {}: binary mode needs values 0 or 1 (use --mode score)",
                                             input.string(), i + 1));
      }
      r.push_back(static_cast<std::uint8_t>(x));
      s.push_back(static_cast<std::uint8_t>(y));
    }
    print_binary_stats(out, r, s);
    return 0;
  }
  const auto ms = irr::anova_mean_squares(pairs.r, pairs.s);
  out << "n=" << ms.n_subjects << '\n';
  out << "msr=" << fmt_value(ms.msr) << '\n';
  out << "msc=" << fmt_value(ms.msc) << '\n';
  out << "mse=" << fmt_value(ms.mse) << '\n';
  out << "icc_a1=" << fmt_value(irr::icc_a1(ms)) << '\n';
  if (threshold) {
    std::vector<std::uint8_t> r;
    std::vector<std::uint8_t> s;
    for (std::size_t i = 0; i < pairs.r.size(); ++i) {
      r.push_back(pairs.r[i] >= *threshold ? 1 : 0);
      s.push_back(pairs.s[i] >= *threshold ? 1 : 0);
    }
    print_binary_stats(out, r, s);
  }
  return 0;
}

// ---- shared configuration ----------------------------------------------------

struct DataOptions {
  std::string data = kDefaultData;
  std::string schema_map = kDefaultSchemaMap;
};

struct LoadedData {
  data::Dataset ds;
  std::string hash;
  fs::path path;
};

LoadedData load_data(const std::string& data_path, const std::string& schema_map_path) {
  const fs::path path(data_path);
  if (!fs::exists(path)) throw std::runtime_error("data file not found: '" + path.string() + "'");
  data::SchemaMap remap;
  if (!schema_map_path.empty()) {
    if (!fs::exists(schema_map_path)) {
      throw std::runtime_error("schema map not found: '" + schema_map_path + "' (pass --schema-map \"\" to skip)");
    }
    remap = data::load_schema_map(schema_map_path);
  }
  return {data::load_dataset(path, data::compas_schema(), remap), data::file_hash(path), path};
}

// Everything that determines which models get fitted.
json model_config(const std::string& data_hash, std::uint64_t seed, std::size_t folds,
                  data::FoldStrategy strategy, const model::FitOptions& fit) {
  return json{{"data_fnv1a64", data_hash},
              {"seed", seed},
              {"folds", folds},
              {"fold_strategy", data::to_string(strategy)},
              {"regularization", fit.regularization},
              {"tolerance", fit.tolerance},
              {"max_iterations", fit.max_iterations},
              {"history", fit.history}};
}

json convergence_json(const std::vector<experiment::FoldModel>& models) {
  json out = json::array();
  for (std::size_t f = 0; f < models.size(); ++f) {
    const auto& r = models[f].model.report;
    out.push_back({{"fold", f},
                   {"iterations", r.iterations},
                   {"gradient_norm", r.gradient_norm},
                   {"objective", r.objective},
                   {"converged", r.converged}});
  }
  return out;
}

// Flag value when given, else config-file value when present, else fallback.
template <class T>
T pick(const CLI::Option* flag, const T& flag_value, const json& config, const char* key, const T& fallback) {
  if (flag->count() > 0) return flag_value;
  if (config.contains(key)) {
    try {
      return config.at(key).get<T>();
    } catch (const json::exception& e) {
      throw UsageError(fmt::format("config key '{}': {}", key, e.what()));
    }
  }
  return fallback;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  if (!fs::exists(path)) throw std::runtime_error("config file not found: '" + path + "'");
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw std::runtime_error("config file '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("config file '" + path + "' must hold a JSON object");
  static const std::set<std::string> known = {
      "data",      "schema_map",    "preset",    "sigma2",           "p_min",     "p_max",
      "p_step",    "seed",          "folds",     "jobs",             "selection", "fold_strategy",
      "threshold", "regularization", "group_stratified", "models"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw UsageError("config file '" + path + "': unknown key '" + key + "'");
  }
  return j;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  return fmt::format("{:%Y%m%dT%H%M%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(now)));
}

fs::path fresh_run_dir(const fs::path& root, const std::string& stem) {
  fs::path dir = root / stem;
  for (int i = 2; fs::exists(dir); ++i) dir = root / fmt::format("{}-{}", stem, i);
  fs::create_directories(dir);
  return dir;
}

// ---- fit -------------------------------------------------------------------

struct FitArgs {
  DataOptions data;
  std::uint64_t seed = 42;
  std::size_t folds = 5;
  std::string fold_strategy = "shuffle";
  double regularization = 1.0;
  std::size_t jobs = 1;
  std::string out;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  const auto loaded = load_data(a.data.data, a.data.schema_map);
  model::FitOptions fit;
  fit.regularization = a.regularization;
  const auto strategy = data::fold_strategy_from_string(a.fold_strategy);
  const auto folds = data::assign_folds(loaded.ds, a.folds, a.seed, strategy);
  const auto models = experiment::fit_fold_models(loaded.ds, folds, fit, a.jobs);
  experiment::StoredModels stored;
  stored.config_hash = fnv1a_hex(model_config(loaded.hash, a.seed, a.folds, strategy, fit).dump());
  stored.folds = models;
  const fs::path path(a.out);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  experiment::save_fold_models(path, stored);
  for (std::size_t f = 0; f < models.size(); ++f) {
    const auto& r = models[f].model.report;
    out << fmt::format("fold {}: iterations={} gradient_norm={} objective={}\n", f, r.iterations,
                       r.gradient_norm, r.objective);
  }
  out << "config_hash=" << stored.config_hash << '\n';
  out << "models=" << path.string() << '\n';
  return 0;
}

// ---- simulate ----------------------------------------------------------------

struct SimulateFlags {
  std::string data = kDefaultData;
  std::string schema_map = kDefaultSchemaMap;
  std::string preset = "all-features";
  std::vector<double> sigma2;
  double p_min = 0.0;
  double p_max = 0.3;
  double p_step = 0.01;
  std::uint64_t seed = 42;
  std::size_t folds = 5;
  std::size_t jobs = 1;
  std::string out_dir = "runs";
  std::string config;
  std::string models;
  std::string fold_strategy = "shuffle";
  std::string selection = "exact-count";
  double threshold = 0.5;
  double regularization = 1.0;
  bool plot = false;
  bool decomposition = false;
};

struct SimulateOptions {
  CLI::Option* data;
  CLI::Option* schema_map;
  CLI::Option* preset;
  CLI::Option* sigma2;
  CLI::Option* p_min;
  CLI::Option* p_max;
  CLI::Option* p_step;
  CLI::Option* seed;
  CLI::Option* folds;
  CLI::Option* jobs;
  CLI::Option* models;
  CLI::Option* fold_strategy;
  CLI::Option* selection;
  CLI::Option* threshold;
  CLI::Option* regularization;
};

int cmd_simulate(const SimulateFlags& f, const SimulateOptions& o, std::ostream& out, std::ostream& err) {
  const json cfg = load_config(f.config);

  const auto preset_name = pick(o.preset, f.preset, cfg, "preset", std::string("all-features"));
  auto preset = experiment::preset(preset_name);

  std::vector<double> sigma2 = preset.sigma2_values;
  if (o.sigma2->count() > 0) {
    sigma2 = f.sigma2;
  } else if (cfg.contains("sigma2")) {
    sigma2 = cfg["sigma2"].is_array() ? cfg["sigma2"].get<std::vector<double>>()
                                      : std::vector<double>{cfg["sigma2"].get<double>()};
  }
  if (!preset.sigma2_applicable && sigma2 != preset.sigma2_values) {
    throw UsageError("preset '" + preset_name + "' adds no numeric noise; drop --sigma2");
  }
  preset.sigma2_values = sigma2;

  const double p_min = pick(o.p_min, f.p_min, cfg, "p_min", 0.0);
  const double p_max = pick(o.p_max, f.p_max, cfg, "p_max", 0.3);
  const double p_step = pick(o.p_step, f.p_step, cfg, "p_step", 0.01);
  preset.p_grid = experiment::make_p_grid(p_min, p_max, p_step);
  preset.validate();

  experiment::SweepConfig sweep;
  sweep.preset = preset;
  sweep.base_seed = pick(o.seed, f.seed, cfg, "seed", std::uint64_t{42});
  sweep.n_folds = pick(o.folds, f.folds, cfg, "folds", std::size_t{5});
  sweep.jobs = std::max<std::size_t>(1, pick(o.jobs, f.jobs, cfg, "jobs", std::size_t{1}));
  sweep.fold_strategy =
      data::fold_strategy_from_string(pick(o.fold_strategy, f.fold_strategy, cfg, "fold_strategy",
                                           std::string("shuffle")));
  sweep.cell.selection = noise::selection_mode_from_string(
      pick(o.selection, f.selection, cfg, "selection", std::string("exact-count")));
  sweep.cell.threshold = pick(o.threshold, f.threshold, cfg, "threshold", 0.5);
  sweep.cell.group_stratified = cfg.value("group_stratified", true);
  sweep.fit.regularization = pick(o.regularization, f.regularization, cfg, "regularization", 1.0);

  const auto data_path = pick(o.data, f.data, cfg, "data", std::string(kDefaultData));
  const auto schema_map = pick(o.schema_map, f.schema_map, cfg, "schema_map", std::string(kDefaultSchemaMap));
  const auto models_path = pick(o.models, f.models, cfg, "models", std::string());
  const auto loaded = load_data(data_path, schema_map);

  // Effective configuration; everything here except `jobs` affects results.
  json effective = {
      {"preset", preset.name},
      {"perturb_categorical", preset.perturb_categorical},
      {"perturb_numeric", preset.perturb_numeric},
      {"apply_minima", preset.apply_minima},
      {"sigma2", preset.sigma2_applicable ? json(preset.sigma2_values) : json(nullptr)},
      {"p_min", p_min},
      {"p_max", p_max},
      {"p_step", p_step},
      {"p_grid", preset.p_grid},
      {"seed", sweep.base_seed},
      {"folds", sweep.n_folds},
      {"fold_strategy", data::to_string(sweep.fold_strategy)},
      {"selection", noise::to_string(sweep.cell.selection)},
      {"group_stratified", sweep.cell.group_stratified},
      {"threshold", sweep.cell.threshold},
      {"regularization", sweep.fit.regularization},
      {"tolerance", sweep.fit.tolerance},
      {"max_iterations", sweep.fit.max_iterations},
      {"history", sweep.fit.history},
      {"data_fnv1a64", loaded.hash},
  };
  const std::string config_hash = fnv1a_hex(effective.dump());
  const std::string model_hash = fnv1a_hex(
      model_config(loaded.hash, sweep.base_seed, sweep.n_folds, sweep.fold_strategy, sweep.fit).dump());

  std::optional<experiment::StoredModels> stored;
  if (!models_path.empty()) {
    stored = experiment::load_fold_models(models_path);
    if (stored->config_hash != model_hash) {
      throw std::runtime_error("model file '" + models_path +
                               "' was fitted with different data, seed, folds or regularization (config hash " +
                               stored->config_hash + ", expected " + model_hash + ")");
    }
  }

  err << fmt::format("running preset {} on {} rows ({} cells, {} jobs)\n", preset.name, loaded.ds.rows(),
                     (preset.sigma2_applicable ? preset.sigma2_values.size() : 1) * preset.p_grid.size() *
                         sweep.n_folds,
                     sweep.jobs);
  const auto result = experiment::run_sweep(loaded.ds, sweep, stored ? &stored->folds : nullptr);

  std::ostringstream results_csv;
  experiment::write_results_csv(results_csv, preset.name, result.cells);
  std::ostringstream aggregated_csv;
  experiment::write_aggregated_csv(aggregated_csv, preset.name, result.curves);

  const std::string timestamp = utc_timestamp();
  const fs::path run_dir = fresh_run_dir(f.out_dir, timestamp + "-" + config_hash.substr(0, 8));
  write_file(run_dir / "results.csv", results_csv.str());
  write_file(run_dir / "aggregated.csv", aggregated_csv.str());

  json outputs = {
      {"results.csv", {{"fnv1a64", fnv1a_hex(results_csv.str())}}},
      {"aggregated.csv", {{"fnv1a64", fnv1a_hex(aggregated_csv.str())}}},
  };
  if (f.plot) {
    experiment::AggregatedTable table{preset.name, result.curves};
    for (const auto& path : report::write_plots(table, run_dir, f.decomposition)) {
      outputs[path.filename().string()] = {{"fnv1a64", fnv1a_hex(read_file(path))}};
    }
  }

  std::size_t group_counts[2] = {0, 0};
  for (const auto g : loaded.ds.groups()) ++group_counts[g];

  json cells = json::array();
  for (const auto& c : result.cells) {
    json audit = json::array();
    for (const auto& e : c.noise_log) {
      audit.push_back({{"group", e.group ? json(*e.group) : json(nullptr)},
                       {"column", loaded.ds.schema().features[e.column].name},
                       {"block_size", e.block_size},
                       {"selected", e.selected},
                       {"changed", e.changed}});
    }
    cells.push_back({{"sigma2", c.sigma2 ? json(*c.sigma2) : json(nullptr)},
                     {"p", c.p},
                     {"fold", c.fold},
                     {"noise", experiment::cell_noise_spec(preset, c.p, c.sigma2, sweep.base_seed, c.fold, c.p_index,
                                                           sweep.cell)},
                     {"noise_log", audit}});
  }

  json manifest = {
      {"tool", "reliagap"},
      {"timestamp", timestamp},
      {"config_hash", config_hash},
      {"config", effective},
      {"jobs", sweep.jobs},
      {"seeds",
       {{"base_seed", sweep.base_seed},
        {"fold_seed", sweep.base_seed},
        {"cell_seed", "derive_seed(base_seed, fold, p_index, sigma2 bits), then (group, column) per block"}}},
      {"data",
       {{"path", loaded.path.string()},
        {"schema_map", schema_map},
        {"fnv1a64", loaded.hash},
        {"rows", loaded.ds.rows()},
        {"group_counts", {{"0", group_counts[0]}, {"1", group_counts[1]}}}}},
      {"folds", {{"strategy", data::to_string(sweep.fold_strategy)}, {"sizes", result.folds.fold_sizes()}}},
      {"models",
       {{"source", stored ? models_path : std::string("fitted")},
        {"config_hash", model_hash},
        {"convergence", convergence_json(result.models)}}},
      {"cells", cells},
      {"outputs", outputs},
  };
  // Content hash over everything that defines the run's results.
  manifest["content_hash"] = fnv1a_hex(effective.dump() + outputs.dump());
  write_file(run_dir / "manifest.json", manifest.dump(2) + "\n");

  out << run_dir.string() << '\n';
  return 0;
}

// ---- plot / manifest ---------------------------------------------------------

int cmd_plot(const std::string& input, const std::string& run, const std::string& out_dir, bool decomposition,
             std::ostream& out) {
  if (input.empty() == run.empty()) throw UsageError("plot needs exactly one of --input or --run");
  const fs::path csv = input.empty() ? fs::path(run) / "aggregated.csv" : fs::path(input);
  if (!fs::exists(csv)) throw std::runtime_error("aggregated results not found: '" + csv.string() + "'");
  const fs::path dir = !out_dir.empty() ? fs::path(out_dir) : csv.has_parent_path() ? csv.parent_path() : ".";
  const auto table = experiment::read_aggregated_csv(csv);
  if (table.curves.empty()) throw std::runtime_error("'" + csv.string() + "' contains no rows");
  for (const auto& path : report::write_plots(table, dir, decomposition)) out << path.string() << '\n';
  return 0;
}

int cmd_manifest(const std::string& run, bool verify, std::ostream& out, std::ostream& err) {
  const fs::path path = fs::path(run) / "manifest.json";
  if (!fs::exists(path)) throw std::runtime_error("no manifest in run directory: '" + path.string() + "'");
  json manifest;
  try {
    manifest = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw std::runtime_error("'" + path.string() + "': " + e.what());
  }
  json summary = manifest;
  summary.erase("cells");
  out << summary.dump(2) << '\n';
  if (!verify) return 0;
  int status = 0;
  for (const auto& [name, entry] : manifest.at("outputs").items()) {
    const fs::path file = fs::path(run) / name;
    if (!fs::exists(file)) {
      err << "missing output: " << file.string() << '\n';
      status = 1;
    } else if (fnv1a_hex(read_file(file)) != entry.at("fnv1a64").get<std::string>()) {
      err << "hash mismatch: " << file.string() << '\n';
      status = 1;
    }
  }
  if (status == 0) err << "all outputs match the manifest\n";
  return status;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Group-wise inter-rater reliability under injected noise"};
  app.name("reliagap");
  app.require_subcommand(1);

  auto* stats = app.add_subcommand("stats", "Agreement statistics for a CSV of paired predictions");
  std::string stats_mode = "binary";
  std::string stats_input;
  std::optional<double> stats_threshold;
  stats->add_option("--mode", stats_mode, "binary (0/1 predictions) or score (continuous)")
      ->check(CLI::IsMember({"binary", "score"}));
  stats->add_option("--input", stats_input, "Two-column CSV, one subject per row, optional header")->required();
  stats->add_option("--threshold", stats_threshold, "Score mode: also report kappa statistics at this cut-off");

  auto* fit = app.add_subcommand("fit", "Fit and store one model per fold");
  FitArgs fit_args;
  fit->add_option("--data", fit_args.data.data, "Dataset CSV")->capture_default_str();
  fit->add_option("--schema-map", fit_args.data.schema_map, "Header rename map (JSON)")->capture_default_str();
  fit->add_option("--seed", fit_args.seed, "Fold assignment seed")->capture_default_str();
  fit->add_option("--folds", fit_args.folds, "Number of folds")->capture_default_str();
  fit->add_option("--fold-strategy", fit_args.fold_strategy, "shuffle, stratify-label or stratify-group")
      ->capture_default_str();
  fit->add_option("--regularization", fit_args.regularization, "L2 penalty lambda")->capture_default_str();
  fit->add_option("--jobs", fit_args.jobs, "Worker threads")->capture_default_str();
  fit->add_option("--out", fit_args.out, "Output model file (JSON)")->required();

  auto* simulate = app.add_subcommand("simulate", "Run a noise sweep and write results to a new run directory");
  SimulateFlags sim;
  SimulateOptions so{};
  so.data = simulate->add_option("--data", sim.data, "Dataset CSV")->capture_default_str();
  so.schema_map = simulate->add_option("--schema-map", sim.schema_map, "Header rename map (JSON)")
                      ->capture_default_str();
  so.preset = simulate->add_option("--preset", sim.preset, "Experiment preset")
                  ->check(CLI::IsMember(experiment::preset_names()))
                  ->capture_default_str();
  so.sigma2 = simulate->add_option("--sigma2", sim.sigma2, "Noise variance(s) for numeric features");
  so.p_min = simulate->add_option("--p-min", sim.p_min, "Smallest noise level")->capture_default_str();
  so.p_max = simulate->add_option("--p-max", sim.p_max, "Largest noise level")->capture_default_str();
  so.p_step = simulate->add_option("--p-step", sim.p_step, "Noise level increment")->capture_default_str();
  so.seed = simulate->add_option("--seed", sim.seed, "Base seed")->capture_default_str();
  so.folds = simulate->add_option("--folds", sim.folds, "Number of folds")->capture_default_str();
  so.jobs = simulate->add_option("--jobs", sim.jobs, "Worker threads")->capture_default_str();
  simulate->add_option("--out-dir", sim.out_dir, "Parent directory for run directories")
      ->envname("RELIAGAP_OUT")
      ->capture_default_str();
  simulate->add_option("--config", sim.config, "JSON config; flags take precedence over it");
  so.models = simulate->add_option("--models", sim.models, "Reuse fold models written by `fit`");
  so.fold_strategy = simulate->add_option("--fold-strategy", sim.fold_strategy,
                                          "shuffle, stratify-label or stratify-group")
                         ->capture_default_str();
  so.selection = simulate->add_option("--selection", sim.selection, "exact-count or bernoulli")
                     ->capture_default_str();
  so.threshold = simulate->add_option("--threshold", sim.threshold, "Score cut-off for binary predictions")
                     ->capture_default_str();
  so.regularization = simulate->add_option("--regularization", sim.regularization, "L2 penalty lambda")
                          ->capture_default_str();
  simulate->add_flag("--plot", sim.plot, "Also render CK, PABAK and ICC plots into the run directory");
  simulate->add_flag("--decomposition", sim.decomposition, "With --plot: add decomposition panels");

  auto* plot = app.add_subcommand("plot", "Render aggregated results as SVG");
  std::string plot_input;
  std::string plot_run;
  std::string plot_out;
  bool plot_decomposition = false;
  plot->add_option("--input", plot_input, "aggregated.csv to render");
  plot->add_option("--run", plot_run, "Run directory (reads its aggregated.csv)");
  plot->add_option("--out-dir", plot_out, "Where to write SVGs (default: next to the CSV)");
  plot->add_flag("--decomposition", plot_decomposition, "Add per-group decomposition panels");

  auto* manifest = app.add_subcommand("manifest", "Print a run's provenance");
  std::string manifest_run;
  bool manifest_verify = false;
  manifest->add_option("--run", manifest_run, "Run directory")->required();
  manifest->add_flag("--verify", manifest_verify, "Check output files against recorded hashes");

  std::vector<const char*> argv;
  argv.push_back("reliagap");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*stats) return cmd_stats(stats_mode, stats_input, stats_threshold, out);
    if (*fit) return cmd_fit(fit_args, out);
    if (*simulate) return cmd_simulate(sim, so, out, err);
    if (*plot) return cmd_plot(plot_input, plot_run, plot_out, plot_decomposition, out);
    if (*manifest) return cmd_manifest(manifest_run, manifest_verify, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace reliagap
