#include "reliagap/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "reliagap/hash.hpp"
#include "reliagap/rng.hpp"

namespace reliagap::data {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

std::optional<std::int32_t> parse_int(std::string_view s) {
  std::int32_t value = 0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || first == last) return std::nullopt;
  return value;
}

}  // namespace

std::optional<std::size_t> DatasetSchema::find(const std::string& name) const {
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t DatasetSchema::index_of(const std::string& name) const {
  if (auto idx = find(name)) return *idx;
  throw DataError("unknown feature '" + name + "'");
}

void DatasetSchema::validate() const {
  std::set<std::string> seen;
  for (const auto& f : features) {
    if (!seen.insert(f.name).second) throw DataError("duplicate feature '" + f.name + "'");
    if (f.minimum && f.kind != FeatureKind::NumericInteger) {
      throw DataError("minimum declared on categorical feature '" + f.name + "'");
    }
  }
  if (seen.contains(label_column)) throw DataError("label '" + label_column + "' is also a feature");
  const auto group = find(group_column);
  if (!group) throw DataError("group column '" + group_column + "' is not a feature");
  if (features[*group].kind != FeatureKind::CategoricalBinary) {
    throw DataError("group column '" + group_column + "' must be binary");
  }
  if (features[*group].perturbable) {
    throw DataError("group column '" + group_column + "' must not be perturbable");
  }
}

DatasetSchema compas_schema() {
  using K = FeatureKind;
  DatasetSchema s;
  s.label_column = "two_year_recid";
  s.group_column = "race";
  s.features = {
      {"charge_misdemeanor", K::CategoricalBinary, true, std::nullopt},
      {"charge_felony", K::CategoricalBinary, true, std::nullopt},
      {"sex", K::CategoricalBinary, true, std::nullopt},
      {"race", K::CategoricalBinary, false, std::nullopt},
      {"sex_race", K::CategoricalBinary, false, std::nullopt},
      {"age_lt25", K::CategoricalBinary, false, std::nullopt},
      {"age_25_45", K::CategoricalBinary, false, std::nullopt},
      {"age_gt45", K::CategoricalBinary, false, std::nullopt},
      {"age", K::NumericInteger, true, 18},
      {"juv_fel_count", K::NumericInteger, true, 0},
      {"juv_misd_count", K::NumericInteger, true, 0},
      {"juv_other_count", K::NumericInteger, true, 0},
      {"priors_count", K::NumericInteger, true, 0},
  };
  return s;
}

SchemaMap load_schema_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema map '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("schema map '" + path.string() + "': " + e.what());
  }
  if (!j.is_object()) throw DataError("schema map '" + path.string() + "' must be a JSON object");
  SchemaMap map;
  for (const auto& [source, target] : j.items()) {
    if (!target.is_string()) {
      throw DataError("schema map entry '" + source + "' must map to a string");
    }
    map.emplace(source, target.get<std::string>());
  }
  return map;
}

Dataset::Dataset(DatasetSchema schema, std::vector<std::vector<std::int32_t>> columns,
                 std::vector<std::uint8_t> labels)
    : schema_(std::move(schema)), columns_(std::move(columns)), labels_(std::move(labels)) {
  schema_.validate();
  if (columns_.size() != schema_.features.size()) {
    throw DataError(fmt::format("dataset has {} columns, schema declares {}", columns_.size(),
                                schema_.features.size()));
  }
  for (std::size_t c = 0; c < columns_.size(); ++c) check_column(c);
  for (std::size_t r = 0; r < labels_.size(); ++r) {
    if (labels_[r] > 1) throw DataError(fmt::format("row {}: label is not binary", r));
  }
  const auto& g = columns_[schema_.index_of(schema_.group_column)];
  groups_.assign(g.begin(), g.end());
}

void Dataset::check_column(std::size_t c) const {
  const auto& col = columns_[c];
  const auto& f = schema_.features[c];
  if (col.size() != labels_.size()) {
    throw DataError(fmt::format("column '{}' has {} rows, expected {}", f.name, col.size(),
                                labels_.size()));
  }
  if (f.kind == FeatureKind::CategoricalBinary) {
    for (std::size_t r = 0; r < col.size(); ++r) {
      if (col[r] != 0 && col[r] != 1) {
        throw DataError(fmt::format("row {}, column '{}': value {} is not binary", r, f.name, col[r]));
      }
    }
  }
}

std::size_t Dataset::group_count(std::uint8_t group) const {
  return static_cast<std::size_t>(std::count(groups_.begin(), groups_.end(), group));
}

Dataset Dataset::subset(std::span<const std::size_t> row_indices) const {
  std::vector<std::vector<std::int32_t>> cols(columns_.size());
  for (std::size_t c = 0; c < columns_.size(); ++c) {
    cols[c].reserve(row_indices.size());
    for (const std::size_t r : row_indices) cols[c].push_back(columns_[c].at(r));
  }
  std::vector<std::uint8_t> labels;
  labels.reserve(row_indices.size());
  for (const std::size_t r : row_indices) labels.push_back(labels_.at(r));
  return Dataset(schema_, std::move(cols), std::move(labels));
}

Dataset Dataset::with_column(std::size_t c, std::vector<std::int32_t> values) const {
  if (c >= columns_.size()) throw DataError("column index out of range");
  if (schema_.features[c].name == schema_.group_column) {
    throw DataError("group column '" + schema_.group_column + "' is immutable");
  }
  Dataset out = *this;
  out.columns_[c] = std::move(values);
  out.check_column(c);
  return out;
}

Dataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema,
                     const SchemaMap& remap) {
  schema.validate();
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path.string() + "' is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);

  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::string name(header[i]);
    if (auto it = remap.find(name); it != remap.end()) name = it->second;
    if (!position.emplace(name, i).second) {
      throw DataError(fmt::format("'{}': duplicate column '{}' after remapping", path.string(), name));
    }
  }
  auto require = [&](const std::string& name) {
    auto it = position.find(name);
    if (it == position.end()) {
      throw DataError(fmt::format("'{}': missing column '{}'", path.string(), name));
    }
    return it->second;
  };
  std::vector<std::size_t> source_of_feature;
  for (const auto& f : schema.features) source_of_feature.push_back(require(f.name));
  const std::size_t label_pos = require(schema.label_column);

  std::vector<std::vector<std::int32_t>> columns(schema.features.size());
  std::vector<std::uint8_t> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError(fmt::format("'{}' line {}: expected {} fields, found {}", path.string(), line_no,
                                  header.size(), fields.size()));
    }
    auto field_int = [&](std::size_t pos, const std::string& name) {
      auto v = parse_int(fields[pos]);
      if (!v) {
        throw DataError(fmt::format("'{}' line {}, column '{}': '{}' is not an integer", path.string(),
                                    line_no, name, fields[pos]));
      }
      return *v;
    };
    for (std::size_t f = 0; f < schema.features.size(); ++f) {
      const auto& feat = schema.features[f];
      const std::int32_t v = field_int(source_of_feature[f], feat.name);
      if (feat.kind == FeatureKind::CategoricalBinary && v != 0 && v != 1) {
        throw DataError(fmt::format("'{}' line {}, column '{}': value {} is not binary", path.string(),
                                    line_no, feat.name, v));
      }
      if (feat.minimum && v < *feat.minimum) {
        throw DataError(fmt::format("'{}' line {}, column '{}': value {} is below minimum {}",
                                    path.string(), line_no, feat.name, v, *feat.minimum));
      }
      columns[f].push_back(v);
    }
    const std::int32_t y = field_int(label_pos, schema.label_column);
    if (y != 0 && y != 1) {
      throw DataError(fmt::format("'{}' line {}, column '{}': value {} is not binary", path.string(),
                                  line_no, schema.label_column, y));
    }
    labels.push_back(static_cast<std::uint8_t>(y));
  }
  if (labels.empty()) throw DataError("'" + path.string() + "' has no data rows");
  return Dataset(schema, std::move(columns), std::move(labels));
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  const auto& schema = ds.schema();
  for (const auto& f : schema.features) out << f.name << ',';
  out << schema.label_column << '\n';
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    for (std::size_t c = 0; c < ds.cols(); ++c) out << ds.at(r, c) << ',';
    out << static_cast<int>(ds.labels()[r]) << '\n';
  }
}

std::string to_string(FoldStrategy s) {
  switch (s) {
    case FoldStrategy::Shuffle: return "shuffle";
    case FoldStrategy::StratifyLabel: return "stratify-label";
    case FoldStrategy::StratifyGroup: return "stratify-group";
  }
  return "shuffle";
}

FoldStrategy fold_strategy_from_string(const std::string& s) {
  if (s == "shuffle") return FoldStrategy::Shuffle;
  if (s == "stratify-label") return FoldStrategy::StratifyLabel;
  if (s == "stratify-group") return FoldStrategy::StratifyGroup;
  throw std::invalid_argument("unknown fold strategy '" + s + "'");
}

FoldAssignment::FoldAssignment(std::vector<std::size_t> fold_of_row, std::size_t n_folds)
    : fold_of_row_(std::move(fold_of_row)), n_folds_(n_folds) {
  for (const auto f : fold_of_row_) {
    if (f >= n_folds_) throw std::invalid_argument("fold index out of range");
  }
}

std::vector<std::size_t> FoldAssignment::test_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < fold_of_row_.size(); ++r) {
    if (fold_of_row_[r] == fold) out.push_back(r);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < fold_of_row_.size(); ++r) {
    if (fold_of_row_[r] != fold) out.push_back(r);
  }
  return out;
}

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
  std::vector<std::size_t> sizes(n_folds_, 0);
  for (const auto f : fold_of_row_) ++sizes[f];
  return sizes;
}

FoldAssignment assign_folds(const Dataset& ds, std::size_t n_folds, std::uint64_t seed,
                            FoldStrategy strategy) {
  const std::size_t n = ds.rows();
  if (n_folds < 2 || n_folds > n) {
    throw std::invalid_argument(fmt::format("n_folds must be in [2, {}], got {}", n, n_folds));
  }
  rng::Stream stream(seed);
  auto shuffle = [&](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[stream.uniform_index(i)]);
    }
  };

  std::vector<std::size_t> order;
  if (strategy == FoldStrategy::Shuffle) {
    order.resize(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order);
  } else {
    const auto key = strategy == FoldStrategy::StratifyLabel ? ds.labels() : ds.groups();
    for (std::uint8_t stratum = 0; stratum <= 1; ++stratum) {
      std::vector<std::size_t> members;
      for (std::size_t r = 0; r < n; ++r) {
        if (key[r] == stratum) members.push_back(r);
      }
      shuffle(members);
      order.insert(order.end(), members.begin(), members.end());
    }
  }

  std::vector<std::size_t> fold_of_row(n);
  if (strategy == FoldStrategy::Shuffle) {
    // Contiguous blocks; the first n % n_folds folds take one extra row.
    const std::size_t base = n / n_folds;
    const std::size_t extra = n % n_folds;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < n_folds; ++f) {
      const std::size_t size = base + (f < extra ? 1 : 0);
      for (std::size_t i = 0; i < size; ++i) fold_of_row[order[pos++]] = f;
    }
  } else {
    // Round-robin dealing keeps strata balanced and sizes within one.
    for (std::size_t i = 0; i < n; ++i) fold_of_row[order[i]] = i % n_folds;
  }
  return FoldAssignment(std::move(fold_of_row), n_folds);
}

namespace {

std::int32_t poisson(rng::Stream& s, double lambda) {
  const double limit = std::exp(-lambda);
  std::int32_t k = 0;
  double prod = s.uniform01();
  while (prod > limit) {
    ++k;
    prod *= s.uniform01();
  }
  return k;
}

}  // namespace

Dataset generate_synthetic(std::size_t n, double group_fraction,
                           std::pair<double, double> prevalence_by_group, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("synthetic dataset needs n >= 1");
  if (!(group_fraction > 0.0 && group_fraction < 1.0)) {
    throw std::invalid_argument("group_fraction must be in (0, 1)");
  }
  for (const double p : {prevalence_by_group.first, prevalence_by_group.second}) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("prevalences must be in (0, 1)");
  }

  const DatasetSchema schema = compas_schema();
  const std::size_t n_features = schema.features.size();
  std::vector<std::vector<std::int32_t>> cols(n_features);
  for (auto& c : cols) c.reserve(n);
  std::vector<std::uint8_t> labels;
  labels.reserve(n);

  const auto idx = [&](const char* name) { return schema.index_of(name); };
  const std::size_t i_misd = idx("charge_misdemeanor"), i_fel = idx("charge_felony"),
                    i_sex = idx("sex"), i_race = idx("race"), i_sex_race = idx("sex_race"),
                    i_lt25 = idx("age_lt25"), i_25_45 = idx("age_25_45"), i_gt45 = idx("age_gt45"),
                    i_age = idx("age"), i_jf = idx("juv_fel_count"), i_jm = idx("juv_misd_count"),
                    i_jo = idx("juv_other_count"), i_priors = idx("priors_count");

  rng::Stream s(seed);
  std::vector<std::int32_t> row(n_features);
  for (std::size_t r = 0; r < n; ++r) {
    const int group = s.bernoulli(group_fraction) ? 1 : 0;
    const double prevalence = group == 1 ? prevalence_by_group.second : prevalence_by_group.first;
    const int y = s.bernoulli(prevalence) ? 1 : 0;

    const int sex = s.bernoulli(0.8) ? 1 : 0;
    const double age_scale = y == 1 ? 11.0 : 17.0;
    const int age = std::min(80, 18 + static_cast<int>(-age_scale * std::log(1.0 - s.uniform01())));
    const int felony = s.bernoulli(y == 1 ? 0.7 : 0.58) ? 1 : 0;

    row[i_misd] = 1 - felony;
    row[i_fel] = felony;
    row[i_sex] = sex;
    row[i_race] = group;
    row[i_sex_race] = sex * group;
    row[i_lt25] = age < 25 ? 1 : 0;
    row[i_25_45] = age >= 25 && age <= 45 ? 1 : 0;
    row[i_gt45] = age > 45 ? 1 : 0;
    row[i_age] = age;
    row[i_jf] = poisson(s, y == 1 ? 0.1 : 0.03);
    row[i_jm] = poisson(s, y == 1 ? 0.14 : 0.05);
    row[i_jo] = poisson(s, y == 1 ? 0.15 : 0.08);
    row[i_priors] = poisson(s, y == 1 ? 4.7 : 2.0);

    for (std::size_t c = 0; c < n_features; ++c) cols[c].push_back(row[c]);
    labels.push_back(static_cast<std::uint8_t>(y));
  }
  return Dataset(schema, std::move(cols), std::move(labels));
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  Fnv1a64 h;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    h.update(std::string_view(buf, static_cast<std::size_t>(in.gcount())));
  }
  return h.hex();
}

}  // namespace reliagap::data
