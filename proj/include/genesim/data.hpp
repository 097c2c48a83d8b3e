#pragma once

// Tabular datasets: CSV loading with feature typing and imputation, stratified
// repeated k-fold plans and stratified half splits.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "genesim/error.hpp"
#include "genesim/random.hpp"

namespace genesim {

using Index = std::size_t;
using IndexList = std::vector<Index>;

enum class FeatureKind { continuous, discrete };

inline std::string_view to_string(FeatureKind kind) {
  return kind == FeatureKind::continuous ? "continuous" : "discrete";
}

inline FeatureKind parse_feature_kind(std::string_view text) {
  if (text == "continuous") return FeatureKind::continuous;
  if (text == "discrete") return FeatureKind::discrete;
  throw ConfigError("unknown feature kind '" + std::string(text) +
                    "' (expected continuous or discrete)");
}

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  double min = 0.0;  // observed range
  double max = 0.0;
  // Discrete only: code i decodes to categories[i].
  std::vector<std::string> categories;

  std::size_t category_count() const { return categories.size(); }

  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<FeatureSpec> features, std::vector<double> values,
          std::vector<int> labels, std::vector<std::string> class_names)
      : features_(std::move(features)),
        values_(std::move(values)),
        labels_(std::move(labels)),
        class_names_(std::move(class_names)) {
    validate();
  }

  std::size_t n_samples() const { return labels_.size(); }
  std::size_t n_features() const { return features_.size(); }
  std::size_t n_classes() const { return class_names_.size(); }

  std::span<const double> row(Index i) const {
    return {values_.data() + i * n_features(), n_features()};
  }
  double value(Index i, std::size_t feature) const {
    return values_[i * n_features() + feature];
  }
  int label(Index i) const { return labels_[i]; }

  const std::vector<FeatureSpec>& features() const { return features_; }
  const std::vector<int>& labels() const { return labels_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  const std::vector<double>& values() const { return values_; }

  std::vector<std::size_t> class_counts() const {
    std::vector<std::size_t> counts(n_classes(), 0);
    for (int y : labels_) ++counts[static_cast<std::size_t>(y)];
    return counts;
  }

  std::size_t count_kind(FeatureKind kind) const {
    return static_cast<std::size_t>(std::count_if(
        features_.begin(), features_.end(),
        [kind](const FeatureSpec& f) { return f.kind == kind; }));
  }

  IndexList all_indices() const {
    IndexList out(n_samples());
    for (Index i = 0; i < out.size(); ++i) out[i] = i;
    return out;
  }

  // Original category text of a discrete feature value.
  const std::string& decode(std::size_t feature, double code) const {
    const auto& spec = features_.at(feature);
    if (spec.kind != FeatureKind::discrete)
      throw ValidationError("feature '" + spec.name + "' is not discrete");
    const auto c = static_cast<std::size_t>(code);
    if (code < 0 || static_cast<double>(c) != code || c >= spec.categories.size())
      throw ValidationError("invalid code for feature '" + spec.name + "'");
    return spec.categories[c];
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;

 private:
  void validate() const {
    const std::size_t k = n_features();
    if (values_.size() != labels_.size() * k)
      throw ValidationError("dataset matrix does not have " + std::to_string(k) +
                            " values per row");
    if (class_names_.size() < 2)
      throw ValidationError("dataset needs at least 2 classes");
    std::vector<std::size_t> counts(class_names_.size(), 0);
    for (int y : labels_) {
      if (y < 0 || static_cast<std::size_t>(y) >= class_names_.size())
        throw ValidationError("label index out of range");
      ++counts[static_cast<std::size_t>(y)];
    }
    for (std::size_t c = 0; c < counts.size(); ++c)
      if (counts[c] == 0)
        throw ValidationError("class '" + class_names_[c] + "' has no samples");
    for (double v : values_)
      if (std::isnan(v)) throw ValidationError("dataset contains missing values");
    for (const auto& f : features_)
      if (f.min > f.max) throw ValidationError("feature '" + f.name + "' has an inverted range");
  }

  std::vector<FeatureSpec> features_;
  std::vector<double> values_;  // row-major, n_samples x n_features
  std::vector<int> labels_;
  std::vector<std::string> class_names_;
};

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

inline bool is_missing(std::string_view cell) { return cell.empty() || cell == "?"; }

inline std::optional<double> parse_number(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

// RFC 4180-style records. Quoted fields may contain commas, doubled quotes
// and newlines. Each record carries the line number it started on.
struct CsvRecord {
  long line;
  std::vector<std::string> cells;
};

inline std::vector<CsvRecord> parse_csv(std::istream& in) {
  std::vector<CsvRecord> records;
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (text.size() >= 3 && text.compare(0, 3, "\xEF\xBB\xBF") == 0) text.erase(0, 3);

  long line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    CsvRecord rec{line, {}};
    std::string cell;
    bool blank = true;
    for (;;) {
      if (i < text.size() && text[i] == '"') {
        blank = false;
        const long quote_line = line;
        ++i;
        for (;;) {
          if (i >= text.size()) throw ParseError("unterminated quoted field", quote_line);
          if (text[i] == '"') {
            if (i + 1 < text.size() && text[i + 1] == '"') {
              cell += '"';
              i += 2;
              continue;
            }
            ++i;
            break;
          }
          if (text[i] == '\n') ++line;
          cell += text[i++];
        }
        while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\r'))
          ++i;
        if (i < text.size() && text[i] != ',' && text[i] != '\n')
          throw ParseError("unexpected character after closing quote", line);
      } else {
        while (i < text.size() && text[i] != ',' && text[i] != '\n') {
          if (text[i] == '"') throw ParseError("stray quote in unquoted field", line);
          if (text[i] != '\r' && text[i] != ' ' && text[i] != '\t') blank = false;
          cell += text[i++];
        }
        cell = trim(cell);
      }
      rec.cells.push_back(std::move(cell));
      cell.clear();
      if (i < text.size() && text[i] == ',') {
        blank = false;
        ++i;
        continue;
      }
      break;
    }
    if (i < text.size() && text[i] == '\n') ++i;
    if (!blank) records.push_back(std::move(rec));
    ++line;
  }
  return records;
}

}  // namespace detail

// Per-column options read from a JSON manifest:
//   {"columns": {"age": {"kind": "continuous"}, "class": {"label_column": true}}}
struct Manifest {
  std::optional<std::string> label_column;
  std::map<std::string, FeatureKind> kinds;
};

inline Manifest parse_manifest(const nlohmann::json& doc) {
  Manifest m;
  if (!doc.is_object() || !doc.contains("columns") || !doc["columns"].is_object())
    throw ConfigError("manifest must be an object with a 'columns' object");
  for (const auto& [name, entry] : doc["columns"].items()) {
    if (!entry.is_object()) throw ConfigError("manifest entry for '" + name + "' must be an object");
    if (entry.contains("kind")) {
      if (!entry["kind"].is_string()) throw ConfigError("manifest kind for '" + name + "' must be a string");
      m.kinds[name] = parse_feature_kind(entry["kind"].get<std::string>());
    }
    if (entry.value("label_column", false)) {
      if (m.label_column) throw ConfigError("manifest marks more than one label column");
      m.label_column = name;
    }
  }
  return m;
}

inline Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  try {
    return parse_manifest(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest '" + path + "': " + e.what());
  }
}

// Columns with more than this many distinct numeric values are continuous.
inline constexpr std::size_t kDiscreteDistinctLimit = 10;

inline Dataset read_csv(std::istream& in, const std::string& label_column,
                        const std::map<std::string, FeatureKind>& kind_overrides = {}) {
  auto records = detail::parse_csv(in);
  if (records.empty()) throw ParseError("missing header row", 1);
  const auto header = std::move(records.front().cells);
  records.erase(records.begin());

  for (const auto& rec : records)
    if (rec.cells.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(rec.cells.size()),
                       rec.line);

  const auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end())
    throw ConfigError("label column '" + label_column + "' not found in header");
  const std::size_t label_col = static_cast<std::size_t>(label_it - header.begin());

  for (const auto& [name, kind] : kind_overrides)
    if (std::find(header.begin(), header.end(), name) == header.end())
      throw ConfigError("kind override for unknown column '" + name + "'");

  const std::size_t n = records.size();

  // labels, first-appearance order
  std::vector<std::string> class_names;
  std::vector<int> labels;
  labels.reserve(n);
  {
    std::unordered_map<std::string, int> ids;
    for (const auto& rec : records) {
      const auto& cell = rec.cells[label_col];
      if (detail::is_missing(cell))
        throw ValidationError("line " + std::to_string(rec.line) + ": missing class label");
      auto [it, inserted] = ids.emplace(cell, static_cast<int>(class_names.size()));
      if (inserted) class_names.push_back(cell);
      labels.push_back(it->second);
    }
  }

  std::vector<FeatureSpec> features;
  std::vector<std::vector<double>> columns;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == label_col) continue;
    FeatureSpec spec;
    spec.name = header[c];

    bool numeric = true;
    bool any_present = false;
    std::vector<std::optional<double>> parsed(n);
    for (std::size_t r = 0; r < n; ++r) {
      const auto& cell = records[r].cells[c];
      if (detail::is_missing(cell)) continue;
      any_present = true;
      parsed[r] = detail::parse_number(cell);
      if (!parsed[r]) numeric = false;
    }
    if (!any_present) throw ValidationError("column '" + spec.name + "' has no values");

    std::optional<FeatureKind> kind;
    if (auto it = kind_overrides.find(spec.name); it != kind_overrides.end()) kind = it->second;
    if (kind == FeatureKind::continuous && !numeric)
      throw ConfigError("column '" + spec.name + "' is not numeric but was declared continuous");

    std::vector<double> column(n, std::nan(""));
    if (numeric) {
      std::vector<double> distinct;
      for (const auto& v : parsed)
        if (v) distinct.push_back(*v);
      std::sort(distinct.begin(), distinct.end());
      distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
      if (!kind)
        kind = (distinct.size() > kDiscreteDistinctLimit || distinct.size() < 2)
                   ? FeatureKind::continuous
                   : FeatureKind::discrete;
      if (*kind == FeatureKind::continuous) {
        for (std::size_t r = 0; r < n; ++r)
          if (parsed[r]) column[r] = *parsed[r];
      } else {
        // numeric categories keep their numeric order
        std::map<double, std::size_t> code;
        for (std::size_t i = 0; i < distinct.size(); ++i) code[distinct[i]] = i;
        std::unordered_map<double, std::string> text;
        for (std::size_t r = 0; r < n; ++r)
          if (parsed[r]) {
            column[r] = static_cast<double>(code[*parsed[r]]);
            text.emplace(*parsed[r], records[r].cells[c]);
          }
        for (double v : distinct) spec.categories.push_back(text[v]);
      }
    } else {
      kind = FeatureKind::discrete;
      std::unordered_map<std::string, std::size_t> code;
      for (std::size_t r = 0; r < n; ++r) {
        const auto& cell = records[r].cells[c];
        if (detail::is_missing(cell)) continue;
        auto [it, inserted] = code.emplace(cell, spec.categories.size());
        if (inserted) spec.categories.push_back(cell);
        column[r] = static_cast<double>(it->second);
      }
    }
    spec.kind = *kind;

    // impute: median for continuous, mode (lowest code on ties) for discrete
    std::vector<double> present;
    for (double v : column)
      if (!std::isnan(v)) present.push_back(v);
    if (present.size() < n) {
      double fill = 0.0;
      if (spec.kind == FeatureKind::continuous) {
        std::sort(present.begin(), present.end());
        const std::size_t m = present.size();
        fill = m % 2 == 1 ? present[m / 2] : 0.5 * (present[m / 2 - 1] + present[m / 2]);
      } else {
        std::vector<std::size_t> counts(spec.categories.size(), 0);
        for (double v : present) ++counts[static_cast<std::size_t>(v)];
        fill = static_cast<double>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      }
      for (double& v : column)
        if (std::isnan(v)) v = fill;
    }
    const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
    spec.min = n ? *lo : 0.0;
    spec.max = n ? *hi : 0.0;

    features.push_back(std::move(spec));
    columns.push_back(std::move(column));
  }

  std::vector<double> values(n * features.size());
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t f = 0; f < features.size(); ++f) values[r * features.size() + f] = columns[f][r];

  return Dataset(std::move(features), std::move(values), std::move(labels), std::move(class_names));
}

inline Dataset load_csv(const std::string& path, const std::string& label_column,
                        const std::map<std::string, FeatureKind>& kind_overrides = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return read_csv(in, label_column, kind_overrides);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Folds and splits

namespace detail {

template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

// Indices grouped by class (ascending class id), each group shuffled. Dealing
// the concatenation round-robin yields per-class and total counts that differ
// by at most one between bins.
inline IndexList stratified_order(const Dataset& data, std::span<const Index> indices, Rng& rng) {
  std::vector<IndexList> by_class(data.n_classes());
  for (Index i : indices) by_class[static_cast<std::size_t>(data.label(i))].push_back(i);
  IndexList order;
  order.reserve(indices.size());
  for (auto& group : by_class) {
    shuffle(group, rng);
    order.insert(order.end(), group.begin(), group.end());
  }
  return order;
}

}  // namespace detail

struct FoldPlan {
  std::size_t n_folds = 0;
  std::size_t n_repeats = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> assignments;  // [repeat][sample] -> fold

  IndexList test_indices(std::size_t repeat, std::size_t fold) const {
    IndexList out;
    const auto& a = assignments.at(repeat);
    for (Index i = 0; i < a.size(); ++i)
      if (a[i] == fold) out.push_back(i);
    return out;
  }

  IndexList train_indices(std::size_t repeat, std::size_t fold) const {
    IndexList out;
    const auto& a = assignments.at(repeat);
    for (Index i = 0; i < a.size(); ++i)
      if (a[i] != fold) out.push_back(i);
    return out;
  }

  // Fingerprint of one repeat's assignment, used to check the paired design.
  std::uint64_t fingerprint(std::size_t repeat) const {
    std::uint64_t h = mix64(n_folds);
    for (std::size_t f : assignments.at(repeat)) h = mix64(h ^ f);
    return h;
  }
};

inline FoldPlan make_folds(const Dataset& data, std::size_t n_folds, std::size_t n_repeats,
                           std::uint64_t seed) {
  if (n_folds < 2) throw ValidationError("n_folds must be at least 2");
  if (n_repeats < 1) throw ValidationError("n_repeats must be at least 1");
  const auto counts = data.class_counts();
  for (std::size_t c = 0; c < counts.size(); ++c)
    if (counts[c] < n_folds)
      throw ValidationError("class '" + data.class_names()[c] + "' has " +
                            std::to_string(counts[c]) + " samples, fewer than " +
                            std::to_string(n_folds) + " folds");

  FoldPlan plan{n_folds, n_repeats, seed, {}};
  const auto all = data.all_indices();
  for (std::size_t r = 0; r < n_repeats; ++r) {
    Rng rng = make_rng(derive_seed(seed, {0xF01D, r}));
    const auto order = detail::stratified_order(data, all, rng);
    std::vector<std::size_t> assignment(data.n_samples());
    for (std::size_t pos = 0; pos < order.size(); ++pos) assignment[order[pos]] = pos % n_folds;
    plan.assignments.push_back(std::move(assignment));
  }
  return plan;
}

struct HalfSplit {
  IndexList grow;
  IndexList validation;
};

inline HalfSplit split_half(const Dataset& data, std::span<const Index> indices, std::uint64_t seed) {
  if (indices.size() < 2) throw ValidationError("split_half needs at least 2 samples");
  Rng rng = make_rng(derive_seed(seed, {0x5B117}));
  const auto order = detail::stratified_order(data, indices, rng);
  HalfSplit split;
  for (std::size_t pos = 0; pos < order.size(); ++pos)
    (pos % 2 == 0 ? split.grow : split.validation).push_back(order[pos]);
  std::sort(split.grow.begin(), split.grow.end());
  std::sort(split.validation.begin(), split.validation.end());
  return split;
}

}  // namespace genesim
