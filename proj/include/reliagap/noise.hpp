#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "reliagap/data.hpp"
#include "reliagap/rng.hpp"

// Synthetic second raters: controlled noise on the perturbable features.
//
// Binary features are flipped; integer features receive an additive draw
// from N(0, sigma2) rounded to the nearest integer. The noise level p is the
// share of a column's entries (per group, by default) that are selected.

namespace reliagap::noise {

/// How the perturbed positions of a column are chosen.
///   ExactCount: round(p * n) positions, uniformly without replacement.
///   Bernoulli:  each position independently with probability p.
enum class SelectionMode { ExactCount, Bernoulli };

[[nodiscard]] std::string to_string(SelectionMode m);
[[nodiscard]] SelectionMode selection_mode_from_string(const std::string& s);

struct NoiseSpec {
  double p = 0.0;
  double sigma2 = 1.0;
  bool perturb_categorical = true;
  bool perturb_numeric = true;
  bool apply_minima = false;
  std::uint64_t seed = 0;
  bool group_stratified = true;
  SelectionMode selection = SelectionMode::ExactCount;

  /// Throws std::invalid_argument unless p in [0, 1] and sigma2 > 0.
  void validate() const;

  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

void to_json(nlohmann::json& j, const NoiseSpec& s);
void from_json(const nlohmann::json& j, NoiseSpec& s);

/// round(p * n), the exact-count selection size.
[[nodiscard]] std::size_t selection_count(double p, std::size_t n);

/// Ascending positions in [0, n) chosen according to `mode`.
[[nodiscard]] std::vector<std::size_t> select_positions(std::size_t n, double p, rng::Stream& stream,
                                                        SelectionMode mode = SelectionMode::ExactCount);

/// Adds a vector with a proportion p of ones, modulo 2.
[[nodiscard]] std::vector<std::int32_t> flip_binary_column(std::span<const std::int32_t> values, double p,
                                                           rng::Stream& stream,
                                                           SelectionMode mode = SelectionMode::ExactCount);

/// Adds rint(N(0, sigma2)) at the selected positions, then raises anything
/// below `minimum` to it. Note that a rounded draw can be 0, so the share of
/// changed entries is at most p.
[[nodiscard]] std::vector<std::int32_t> perturb_numeric_column(
    std::span<const std::int32_t> values, double p, double sigma2, rng::Stream& stream,
    std::optional<std::int32_t> minimum = std::nullopt, SelectionMode mode = SelectionMode::ExactCount);

/// Audit record for one (group, column) block.
struct PerturbationEntry {
  std::optional<std::uint8_t> group;  // empty when not group-stratified
  std::size_t column = 0;
  std::size_t block_size = 0;  // rows in the block
  std::size_t selected = 0;    // positions that received noise
  std::size_t changed = 0;     // positions whose value actually changed
};

struct Perturbed {
  data::Dataset data;
  std::vector<PerturbationEntry> log;
};

/// Builds X_pert from X_orig. Only perturbable features are touched, and only
/// the kinds enabled in `spec`. Each (group, column) block draws from its own
/// stream derived from spec.seed, so results do not depend on column order
/// or on the other group's size.
[[nodiscard]] Perturbed perturb_dataset(const data::Dataset& ds, const NoiseSpec& spec);

}  // namespace reliagap::noise
