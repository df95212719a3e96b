#include "reliagap/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace reliagap::noise {

std::string to_string(SelectionMode m) {
  return m == SelectionMode::ExactCount ? "exact-count" : "bernoulli";
}

SelectionMode selection_mode_from_string(const std::string& s) {
  if (s == "exact-count") return SelectionMode::ExactCount;
  if (s == "bernoulli") return SelectionMode::Bernoulli;
  throw std::invalid_argument("unknown selection mode '" + s + "'");
}

void NoiseSpec::validate() const {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("noise level p must be in [0, 1]");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw std::invalid_argument("noise variance sigma2 must be positive");
  }
}

void to_json(nlohmann::json& j, const NoiseSpec& s) {
  j = nlohmann::json{{"p", s.p},
                     {"sigma2", s.sigma2},
                     {"perturb_categorical", s.perturb_categorical},
                     {"perturb_numeric", s.perturb_numeric},
                     {"apply_minima", s.apply_minima},
                     {"seed", s.seed},
                     {"group_stratified", s.group_stratified},
                     {"selection", to_string(s.selection)}};
}

void from_json(const nlohmann::json& j, NoiseSpec& s) {
  NoiseSpec out;
  j.at("p").get_to(out.p);
  j.at("sigma2").get_to(out.sigma2);
  out.perturb_categorical = j.value("perturb_categorical", true);
  out.perturb_numeric = j.value("perturb_numeric", true);
  out.apply_minima = j.value("apply_minima", false);
  out.seed = j.value("seed", std::uint64_t{0});
  out.group_stratified = j.value("group_stratified", true);
  out.selection = selection_mode_from_string(j.value("selection", std::string("exact-count")));
  out.validate();
  s = out;
}

std::size_t selection_count(double p, std::size_t n) {
  return static_cast<std::size_t>(std::llround(p * static_cast<double>(n)));
}

std::vector<std::size_t> select_positions(std::size_t n, double p, rng::Stream& stream,
                                          SelectionMode mode) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("noise level p must be in [0, 1]");
  std::vector<std::size_t> chosen;
  if (mode == SelectionMode::Bernoulli) {
    for (std::size_t i = 0; i < n; ++i) {
      if (stream.bernoulli(p)) chosen.push_back(i);
    }
    return chosen;
  }
  const std::size_t k = std::min(selection_count(p, n), n);
  if (k == 0) return chosen;
  // Partial Fisher-Yates: the first k slots end up a uniform k-subset.
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + stream.uniform_index(n - i);
    std::swap(pool[i], pool[j]);
  }
  chosen.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

namespace {

void check_binary(std::span<const std::int32_t> values) {
  for (const std::int32_t v : values) {
    if (v != 0 && v != 1) throw std::invalid_argument("flip_binary_column expects values in {0,1}");
  }
}

void apply_flips(std::vector<std::int32_t>& values, std::span<const std::size_t> positions) {
  for (const std::size_t i : positions) values[i] = (values[i] + 1) % 2;
}

void apply_numeric(std::vector<std::int32_t>& values, std::span<const std::size_t> positions,
                   double sigma2, rng::Stream& stream, std::optional<std::int32_t> minimum) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("noise variance sigma2 must be positive");
  const double sd = std::sqrt(sigma2);
  for (const std::size_t i : positions) {
    values[i] += static_cast<std::int32_t>(std::nearbyint(sd * stream.normal()));
    if (minimum && values[i] < *minimum) values[i] = *minimum;
  }
}

}  // namespace

std::vector<std::int32_t> flip_binary_column(std::span<const std::int32_t> values, double p,
                                             rng::Stream& stream, SelectionMode mode) {
  check_binary(values);
  std::vector<std::int32_t> out(values.begin(), values.end());
  apply_flips(out, select_positions(out.size(), p, stream, mode));
  return out;
}

std::vector<std::int32_t> perturb_numeric_column(std::span<const std::int32_t> values, double p,
                                                 double sigma2, rng::Stream& stream,
                                                 std::optional<std::int32_t> minimum,
                                                 SelectionMode mode) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("noise variance sigma2 must be positive");
  std::vector<std::int32_t> out(values.begin(), values.end());
  apply_numeric(out, select_positions(out.size(), p, stream, mode), sigma2, stream, minimum);
  return out;
}

Perturbed perturb_dataset(const data::Dataset& ds, const NoiseSpec& spec) {
  spec.validate();
  const auto& features = ds.schema().features;
  const auto groups = ds.groups();

  // Row blocks that receive noise independently.
  struct Block {
    std::optional<std::uint8_t> group;
    std::vector<std::size_t> rows;
  };
  std::vector<Block> blocks;
  if (spec.group_stratified) {
    for (std::uint8_t g = 0; g <= 1; ++g) {
      Block b{g, {}};
      for (std::size_t r = 0; r < ds.rows(); ++r) {
        if (groups[r] == g) b.rows.push_back(r);
      }
      blocks.push_back(std::move(b));
    }
  } else {
    Block b{std::nullopt, std::vector<std::size_t>(ds.rows())};
    std::iota(b.rows.begin(), b.rows.end(), std::size_t{0});
    blocks.push_back(std::move(b));
  }

  Perturbed result{ds, {}};
  for (std::size_t c = 0; c < features.size(); ++c) {
    const auto& f = features[c];
    if (!f.perturbable) continue;
    const bool categorical = f.kind == data::FeatureKind::CategoricalBinary;
    if (categorical && !spec.perturb_categorical) continue;
    if (!categorical && !spec.perturb_numeric) continue;

    const auto original = ds.column(c);
    std::vector<std::int32_t> column(original.begin(), original.end());
    for (const auto& block : blocks) {
      const std::uint64_t group_id = block.group ? *block.group : 2;
      rng::Stream stream(rng::derive_seed(spec.seed, {group_id, c}));

      std::vector<std::int32_t> values;
      values.reserve(block.rows.size());
      for (const std::size_t r : block.rows) values.push_back(original[r]);

      std::vector<std::int32_t> noisy = values;
      const auto positions = select_positions(values.size(), spec.p, stream, spec.selection);
      if (categorical) {
        check_binary(values);
        apply_flips(noisy, positions);
      } else {
        apply_numeric(noisy, positions, spec.sigma2, stream, spec.apply_minima ? f.minimum : std::nullopt);
      }

      PerturbationEntry entry;
      entry.group = block.group;
      entry.column = c;
      entry.block_size = block.rows.size();
      entry.selected = positions.size();
      for (std::size_t i = 0; i < block.rows.size(); ++i) {
        if (noisy[i] != values[i]) ++entry.changed;
        column[block.rows[i]] = noisy[i];
      }
      result.log.push_back(entry);
    }
    result.data = result.data.with_column(c, std::move(column));
  }
  return result;
}

}  // namespace reliagap::noise
