#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace reliagap::data {

/// Raised for malformed or schema-violating input. The message names the
/// offending line and column where one exists.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FeatureKind { CategoricalBinary, NumericInteger };

struct FeatureSchema {
  std::string name;
  FeatureKind kind = FeatureKind::CategoricalBinary;
  bool perturbable = false;
  std::optional<std::int32_t> minimum;  // clamp floor; numeric features only

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

/// Model inputs in column order, plus the label column and the name of the
/// (binary) feature that defines group membership.
struct DatasetSchema {
  std::vector<FeatureSchema> features;
  std::string label_column;
  std::string group_column;

  [[nodiscard]] std::optional<std::size_t> find(const std::string& name) const;
  /// Throws DataError when the name is unknown.
  [[nodiscard]] std::size_t index_of(const std::string& name) const;
  /// Throws DataError on duplicate names, a missing or perturbable group
  /// column, a label that is also a feature, or minima on categorical
  /// features.
  void validate() const;

  friend bool operator==(const DatasetSchema&, const DatasetSchema&) = default;
};

/// Canonical COMPAS layout: 13 model inputs, label `two_year_recid`, group
/// `race` (1 = White, 0 = non-White).
[[nodiscard]] DatasetSchema compas_schema();

/// Source column name -> canonical column name.
using SchemaMap = std::map<std::string, std::string>;

/// Reads a JSON object of string -> string.
[[nodiscard]] SchemaMap load_schema_map(const std::filesystem::path& path);

/// Column-major table of integer features with a binary label. Immutable
/// after construction apart from whole-column replacement on copies.
class Dataset {
 public:
  Dataset() = default;

  /// `columns` holds one vector per schema feature, all of length n.
  /// Throws DataError on shape mismatch, non-binary categorical or label
  /// values. Declared minima are checked by load_dataset, not here, because
  /// perturbed copies may legitimately cross them.
  Dataset(DatasetSchema schema, std::vector<std::vector<std::int32_t>> columns,
          std::vector<std::uint8_t> labels);

  [[nodiscard]] const DatasetSchema& schema() const noexcept { return schema_; }
  [[nodiscard]] std::size_t rows() const noexcept { return labels_.size(); }
  [[nodiscard]] std::size_t cols() const noexcept { return columns_.size(); }

  [[nodiscard]] std::span<const std::int32_t> column(std::size_t c) const { return columns_.at(c); }
  [[nodiscard]] std::int32_t at(std::size_t row, std::size_t c) const { return columns_.at(c).at(row); }
  [[nodiscard]] std::span<const std::uint8_t> labels() const noexcept { return labels_; }
  /// Group membership per row (values of the group column as 0/1).
  [[nodiscard]] std::span<const std::uint8_t> groups() const noexcept { return groups_; }

  [[nodiscard]] std::size_t group_count(std::uint8_t group) const;

  /// Rows in the given order, duplicates allowed.
  [[nodiscard]] Dataset subset(std::span<const std::size_t> row_indices) const;

  /// Copy with column c replaced. Replacing the group column is refused.
  [[nodiscard]] Dataset with_column(std::size_t c, std::vector<std::int32_t> values) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  void check_column(std::size_t c) const;

  DatasetSchema schema_;
  std::vector<std::vector<std::int32_t>> columns_;
  std::vector<std::uint8_t> labels_;
  std::vector<std::uint8_t> groups_;
};

/// Reads a comma-separated file with a header row. Header names are first
/// passed through `remap` (when given); extra columns are ignored.
/// Values must be integers, binary for categorical features and the label,
/// and at or above each declared minimum.
[[nodiscard]] Dataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema,
                                   const SchemaMap& remap = {});

/// Writes canonical headers (features, then label).
void save_dataset(const std::filesystem::path& path, const Dataset& ds);

enum class FoldStrategy { Shuffle, StratifyLabel, StratifyGroup };

[[nodiscard]] std::string to_string(FoldStrategy s);
[[nodiscard]] FoldStrategy fold_strategy_from_string(const std::string& s);

class FoldAssignment {
 public:
  FoldAssignment(std::vector<std::size_t> fold_of_row, std::size_t n_folds);

  [[nodiscard]] std::size_t n_folds() const noexcept { return n_folds_; }
  [[nodiscard]] std::span<const std::size_t> fold_of_row() const noexcept { return fold_of_row_; }
  /// Ascending row indices.
  [[nodiscard]] std::vector<std::size_t> test_indices(std::size_t fold) const;
  [[nodiscard]] std::vector<std::size_t> train_indices(std::size_t fold) const;
  [[nodiscard]] std::vector<std::size_t> fold_sizes() const;

 private:
  std::vector<std::size_t> fold_of_row_;
  std::size_t n_folds_;
};

/// Seeded shuffle of row indices dealt into n_folds folds whose sizes differ
/// by at most one. Stratified variants shuffle within each stratum and deal
/// strata consecutively, so each fold gets a near-equal share of every
/// stratum. Throws std::invalid_argument unless 2 <= n_folds <= rows.
[[nodiscard]] FoldAssignment assign_folds(const Dataset& ds, std::size_t n_folds, std::uint64_t seed,
                                          FoldStrategy strategy = FoldStrategy::Shuffle);

/// COMPAS-shaped synthetic data for tests. Labels are drawn per group with
/// the requested prevalence; features are drawn conditionally on label and
/// group so that a linear model has signal.
[[nodiscard]] Dataset generate_synthetic(std::size_t n, double group_fraction,
                                         std::pair<double, double> prevalence_by_group,
                                         std::uint64_t seed);

/// FNV-1a 64-bit hash of a file's bytes, as 16 hex digits.
[[nodiscard]] std::string file_hash(const std::filesystem::path& path);

}  // namespace reliagap::data
