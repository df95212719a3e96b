#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "reliagap/data.hpp"
#include "reliagap/model.hpp"
#include "reliagap/noise.hpp"

// The simulation protocol: perturb a test split, score both copies with the
// fold model, split by group, pair the predictions and compute reliability
// statistics per group; repeated over folds, noise levels and variances.

namespace reliagap::experiment {

struct ExperimentPreset {
  std::string name;
  bool perturb_categorical = true;
  bool perturb_numeric = true;
  bool apply_minima = false;
  std::vector<double> sigma2_values;
  std::vector<double> p_grid;
  /// False for presets that never draw numeric noise; their sweep runs once
  /// and records sigma2 as not applicable.
  bool sigma2_applicable = true;

  /// Throws std::invalid_argument when p_grid is empty, not strictly
  /// increasing or outside [0, 1], or a variance is not positive.
  void validate() const;
};

/// all-features, all-features-minima, numeric-only, categorical-only.
[[nodiscard]] const std::vector<std::string>& preset_names();
[[nodiscard]] ExperimentPreset preset(const std::string& name);

/// p_min, p_min + step, ... up to p_max inclusive (with 1e-9 slack), each
/// value rounded to 12 decimals so that e.g. 0.07 is the literal 0.07.
[[nodiscard]] std::vector<double> make_p_grid(double p_min, double p_max, double p_step);

enum class Statistic {
  CK,
  PABAK,
  BI,
  PI,
  CKBiasOnly,
  CKPrevalenceOnly,
  ICC,
  MeanScore,
  PredictionPrevalence,
};

inline constexpr std::array kAllStatistics = {
    Statistic::CK,         Statistic::PABAK,            Statistic::BI,
    Statistic::PI,         Statistic::CKBiasOnly,       Statistic::CKPrevalenceOnly,
    Statistic::ICC,        Statistic::MeanScore,        Statistic::PredictionPrevalence,
};

[[nodiscard]] std::string_view statistic_name(Statistic s);
[[nodiscard]] Statistic statistic_from_name(std::string_view name);

/// Statistics for one group in one cell. Means and prevalences refer to the
/// perturbed rater's predictions; at p = 0 these are the unperturbed ones.
struct GroupStats {
  std::size_t n_subjects = 0;
  std::optional<double> ck, pabak, bi, pi, ck_bias_only, ck_prevalence_only, icc_a1, mean_score,
      prediction_prevalence;

  [[nodiscard]] std::optional<double> get(Statistic s) const;
};

struct CellResult {
  double p = 0.0;
  std::size_t p_index = 0;
  std::optional<double> sigma2;
  std::size_t fold = 0;
  std::size_t test_size = 0;
  std::array<GroupStats, 2> groups;
  std::vector<noise::PerturbationEntry> noise_log;
};

struct FoldModel {
  model::Scaler scaler;
  model::LogisticModel model;
};

struct CellOptions {
  double threshold = 0.5;
  noise::SelectionMode selection = noise::SelectionMode::ExactCount;
  bool group_stratified = true;
};

/// The noise specification of one sweep cell. Its seed is derived from
/// (base_seed, fold, p_index, sigma2), and perturb_dataset extends the path
/// with (group, column).
[[nodiscard]] noise::NoiseSpec cell_noise_spec(const ExperimentPreset& preset, double p,
                                               std::optional<double> sigma2, std::uint64_t base_seed,
                                               std::size_t fold, std::size_t p_index,
                                               const CellOptions& options);

/// One (p, sigma2, fold) cell. A group absent from the test split gets
/// n_subjects = 0 and no statistics. Throws std::logic_error if the kappa
/// decomposition identity fails to hold to 1e-12.
[[nodiscard]] CellResult run_cell(const FoldModel& fold_model, const data::Dataset& test,
                                  const ExperimentPreset& preset, std::size_t p_index, double p,
                                  std::optional<double> sigma2, std::uint64_t base_seed,
                                  std::size_t fold, const CellOptions& options = {});

/// Fits scaler and model on each fold's training rows.
[[nodiscard]] std::vector<FoldModel> fit_fold_models(const data::Dataset& ds,
                                                     const data::FoldAssignment& folds,
                                                     const model::FitOptions& fit, std::size_t jobs = 1);

struct CurvePoint {
  double p = 0.0;
  std::array<std::optional<double>, 2> value;  // fold means per group
  std::array<std::size_t, 2> folds = {0, 0};   // contributing folds per group

  /// value[0] - value[1] when both exist.
  [[nodiscard]] std::optional<double> gap() const;
};

struct GapCurve {
  Statistic statistic = Statistic::CK;
  std::optional<double> sigma2;
  std::vector<CurvePoint> points;  // ascending p
};

/// Fold means for every (sigma2, statistic), skipping missing values.
/// Output order: sigma2 ascending (not-applicable first), then kAllStatistics
/// order. Independent of the order of `cells`.
[[nodiscard]] std::vector<GapCurve> aggregate_curves(std::span<const CellResult> cells);

[[nodiscard]] const GapCurve& find_curve(std::span<const GapCurve> curves, Statistic s,
                                         std::optional<double> sigma2);

/// The four kappa curves of one group: CK, PABAK and the two partial
/// corrections. Missing points stay missing.
struct DecompositionCurves {
  std::optional<double> sigma2;
  std::uint8_t group = 0;
  std::vector<double> p;
  std::vector<std::optional<double>> ck, pabak, ck_bias_only, ck_prevalence_only;
};

[[nodiscard]] std::array<DecompositionCurves, 2> decompose_correction(std::span<const GapCurve> curves,
                                                                      std::optional<double> sigma2);
[[nodiscard]] std::array<DecompositionCurves, 2> decompose_correction(std::span<const CellResult> cells,
                                                                      std::optional<double> sigma2);

class SweepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SweepConfig {
  ExperimentPreset preset;
  std::uint64_t base_seed = 42;
  std::size_t n_folds = 5;
  data::FoldStrategy fold_strategy = data::FoldStrategy::Shuffle;
  std::size_t jobs = 1;
  model::FitOptions fit;
  CellOptions cell;
};

struct SweepResult {
  ExperimentPreset preset;
  data::FoldAssignment folds{{}, 2};
  std::vector<FoldModel> models;
  std::vector<CellResult> cells;  // sigma2, then p, then fold order
  std::vector<GapCurve> curves;
};

/// Runs every cell. Fold models are fitted here unless `models` supplies
/// one per fold (fitted on the same fold assignment). Cells run on `jobs`
/// threads; results are collected by cell index, so output does not depend
/// on scheduling. Cell failures are rethrown as SweepError naming the cell.
[[nodiscard]] SweepResult run_sweep(const data::Dataset& ds, const SweepConfig& config,
                                    const std::vector<FoldModel>* models = nullptr);

// ---- files ---------------------------------------------------------------

/// One row per (sigma2, p, fold, group). Missing values are written as NA.
void write_results_csv(std::ostream& out, const std::string& preset_name,
                       std::span<const CellResult> cells);

/// One row per (sigma2, p, group): fold means and contributing-fold counts.
void write_aggregated_csv(std::ostream& out, const std::string& preset_name,
                          std::span<const GapCurve> curves);

struct AggregatedTable {
  std::string preset_name;
  std::vector<GapCurve> curves;
};

/// Inverse of write_aggregated_csv. Throws std::runtime_error on malformed input.
[[nodiscard]] AggregatedTable read_aggregated_csv(const std::filesystem::path& path);

/// Shortest round-trip decimal, or NA.
[[nodiscard]] std::string format_value(std::optional<double> v);

struct StoredModels {
  std::string config_hash;
  std::vector<FoldModel> folds;
};

void save_fold_models(const std::filesystem::path& path, const StoredModels& models);
[[nodiscard]] StoredModels load_fold_models(const std::filesystem::path& path);

}  // namespace reliagap::experiment
