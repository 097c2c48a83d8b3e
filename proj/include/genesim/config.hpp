#pragma once

// JSON experiment configuration.
//
// {
//   "datasets": [{"name": "iris", "csv": "data/iris.csv", "label": "species",
//                 "manifest": "optional/path.json"}],
//   "algorithms": [
//     {"name": "CART", "kind": "single_tree", "induce": {"criterion": "gini"}},
//     {"name": "Bagging", "kind": "bagged_committee", "rounds": 25},
//     {"name": "GENESIM", "kind": "genesim",
//      "ga": {"iterations": 20}, "ensemble": {"bagging_rounds": 10}}
//   ],
//   "n_folds": 3, "n_repeats": 10, "seed": 1, "output": "results",
//   "alpha": 0.05, "resamples": 10000, "jobs": 1
// }
//
// Relative paths are resolved against the config file's directory. Unknown
// keys are rejected.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "genesim/data.hpp"
#include "genesim/error.hpp"
#include "genesim/eval.hpp"
#include "genesim/genetic.hpp"
#include "genesim/induce.hpp"

namespace genesim {

struct DatasetEntry {
  std::string name;
  std::filesystem::path csv;
  std::string label;
  std::optional<std::filesystem::path> manifest;
};

struct ExperimentConfig {
  std::vector<DatasetEntry> datasets;
  std::vector<AlgorithmSpec> algorithms;
  std::size_t n_folds = 3;
  std::size_t n_repeats = 10;
  std::uint64_t seed = 0;
  std::filesystem::path output = "results";
  double alpha = kDefaultAlpha;
  std::size_t resamples = kDefaultResamples;
  std::size_t jobs = 1;
};

namespace detail {

using Json = nlohmann::json;

inline void check_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + ": '" + key + "' has the wrong type");
  }
}

inline void read_count(const Json& j, const char* key, std::size_t& out, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& v = j[key];
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) throw ConfigError(where + ": '" + key + "' must be a non-negative integer");
  out = j[key].get<std::size_t>();
}

}  // namespace detail

inline InduceConfig parse_induce_config(const nlohmann::json& j, InduceConfig c = {},
                                        const std::string& where = "induce") {
  detail::check_keys(j, where, {"criterion", "max_depth", "min_samples_leaf", "min_samples_split"});
  if (j.contains("criterion")) {
    if (!j["criterion"].is_string()) throw ConfigError(where + ": 'criterion' must be a string");
    c.criterion = parse_criterion(j["criterion"].get<std::string>());
  }
  if (j.contains("max_depth")) {
    if (j["max_depth"].is_null()) {
      c.max_depth.reset();
    } else {
      std::size_t depth = 0;
      detail::read_count(j, "max_depth", depth, where);
      c.max_depth = depth;
    }
  }
  detail::read_count(j, "min_samples_leaf", c.min_samples_leaf, where);
  detail::read_count(j, "min_samples_split", c.min_samples_split, where);
  c.validate();
  return c;
}

inline GAConfig parse_ga_config(const nlohmann::json& j, GAConfig c = {}) {
  detail::check_keys(j, "ga", {"population_size", "iterations", "tournament_size", "offspring_per_iteration",
                               "mutation_probability", "seed"});
  detail::read_count(j, "population_size", c.population_size, "ga");
  detail::read_count(j, "iterations", c.iterations, "ga");
  detail::read_count(j, "tournament_size", c.tournament_size, "ga");
  detail::read_count(j, "offspring_per_iteration", c.offspring_per_iteration, "ga");
  detail::read(j, "mutation_probability", c.mutation_probability, "ga");
  detail::read(j, "seed", c.seed, "ga");
  c.validate();
  return c;
}

inline EnsembleConfig parse_ensemble_config(const nlohmann::json& j, EnsembleConfig c = {}) {
  detail::check_keys(j, "ensemble", {"bagging_rounds", "boosting_rounds", "boost_max_depth", "base_configs", "seed"});
  detail::read_count(j, "bagging_rounds", c.bagging_rounds, "ensemble");
  detail::read_count(j, "boosting_rounds", c.boosting_rounds, "ensemble");
  detail::read_count(j, "boost_max_depth", c.boost_max_depth, "ensemble");
  detail::read(j, "seed", c.seed, "ensemble");
  if (j.contains("base_configs")) {
    if (!j["base_configs"].is_array()) throw ConfigError("ensemble: 'base_configs' must be an array");
    c.base_configs.clear();
    for (const auto& b : j["base_configs"])
      c.base_configs.push_back(parse_induce_config(b, InduceConfig{}, "ensemble.base_configs"));
  }
  c.validate();
  return c;
}

inline AlgorithmSpec parse_algorithm(const nlohmann::json& j) {
  detail::check_keys(j, "algorithm", {"name", "kind", "induce", "rounds", "boost_max_depth", "ga", "ensemble"});
  AlgorithmSpec spec;
  if (!j.contains("name") || !j["name"].is_string()) throw ConfigError("algorithm needs a string 'name'");
  spec.name = j["name"].get<std::string>();
  const std::string where = "algorithm '" + spec.name + "'";
  if (!j.contains("kind") || !j["kind"].is_string()) throw ConfigError(where + " needs a string 'kind'");
  spec.kind = parse_algorithm_kind(j["kind"].get<std::string>());
  if (j.contains("induce")) spec.induce = parse_induce_config(j["induce"], InduceConfig{}, where + ".induce");
  detail::read_count(j, "rounds", spec.rounds, where);
  detail::read_count(j, "boost_max_depth", spec.boost_max_depth, where);
  if (j.contains("ga")) spec.ga = parse_ga_config(j["ga"]);
  if (j.contains("ensemble")) spec.ensemble = parse_ensemble_config(j["ensemble"]);
  if ((spec.kind == AlgorithmKind::bagged_committee || spec.kind == AlgorithmKind::boosted_committee) &&
      spec.rounds < 1)
    throw ConfigError(where + ": 'rounds' must be at least 1");
  if (spec.kind == AlgorithmKind::boosted_committee && spec.boost_max_depth < 1)
    throw ConfigError(where + ": 'boost_max_depth' must be at least 1");
  return spec;
}

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  detail::check_keys(j, "config", {"datasets", "algorithms", "n_folds", "n_repeats", "seed", "output", "alpha",
                                   "resamples", "jobs"});
  ExperimentConfig c;
  const auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };

  if (!j.contains("datasets") || !j["datasets"].is_array() || j["datasets"].empty())
    throw ConfigError("config needs a non-empty 'datasets' array");
  for (const auto& d : j["datasets"]) {
    detail::check_keys(d, "dataset", {"name", "csv", "label", "manifest"});
    DatasetEntry e;
    if (!d.contains("csv") || !d["csv"].is_string()) throw ConfigError("dataset needs a string 'csv'");
    e.csv = resolve(d["csv"].get<std::string>());
    e.name = d.value("name", e.csv.stem().string());
    if (d.contains("label")) {
      if (!d["label"].is_string()) throw ConfigError("dataset '" + e.name + "': 'label' must be a string");
      e.label = d["label"].get<std::string>();
    }
    if (d.contains("manifest")) {
      if (!d["manifest"].is_string()) throw ConfigError("dataset '" + e.name + "': 'manifest' must be a string");
      e.manifest = resolve(d["manifest"].get<std::string>());
    }
    if (e.label.empty() && !e.manifest)
      throw ConfigError("dataset '" + e.name + "' needs a 'label' column or a manifest naming one");
    c.datasets.push_back(std::move(e));
  }

  if (!j.contains("algorithms") || !j["algorithms"].is_array() || j["algorithms"].empty())
    throw ConfigError("config needs a non-empty 'algorithms' array");
  for (const auto& a : j["algorithms"]) c.algorithms.push_back(parse_algorithm(a));
  for (std::size_t i = 0; i < c.algorithms.size(); ++i)
    for (std::size_t k = i + 1; k < c.algorithms.size(); ++k)
      if (c.algorithms[i].name == c.algorithms[k].name)
        throw ConfigError("duplicate algorithm name '" + c.algorithms[i].name + "'");

  detail::read_count(j, "n_folds", c.n_folds, "config");
  detail::read_count(j, "n_repeats", c.n_repeats, "config");
  detail::read(j, "seed", c.seed, "config");
  if (j.contains("output")) {
    if (!j["output"].is_string()) throw ConfigError("config: 'output' must be a string");
    c.output = resolve(j["output"].get<std::string>());
  } else {
    c.output = base_dir / c.output;
  }
  detail::read(j, "alpha", c.alpha, "config");
  detail::read_count(j, "resamples", c.resamples, "config");
  detail::read_count(j, "jobs", c.jobs, "config");

  if (c.n_folds < 2) throw ConfigError("n_folds must be at least 2");
  if (c.n_repeats < 2) throw ConfigError("n_repeats must be at least 2 for significance testing");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (c.resamples < 1) throw ConfigError("resamples must be at least 1");
  if (c.jobs < 1) throw ConfigError("jobs must be at least 1");
  return c;
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("config '" + path.string() + "': " + e.what());
  }
  return parse_experiment_config(j, path.parent_path());
}

// Loads every dataset of the config; fails before any computation when a file
// is missing or malformed.
inline std::vector<NamedDataset> load_datasets(const ExperimentConfig& c) {
  std::vector<NamedDataset> out;
  for (const auto& e : c.datasets) {
    if (!std::filesystem::exists(e.csv)) throw IoError("dataset file not found: '" + e.csv.string() + "'");
    std::string label = e.label;
    std::map<std::string, FeatureKind> kinds;
    if (e.manifest) {
      const Manifest m = load_manifest(e.manifest->string());
      kinds = m.kinds;
      if (label.empty() && m.label_column) label = *m.label_column;
    }
    out.push_back({e.name, load_csv(e.csv.string(), label, kinds)});
  }
  return out;
}

}  // namespace genesim
