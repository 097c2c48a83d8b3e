#pragma once

// Benchmark protocol: repeated stratified k-fold cross-validation over several
// algorithms, per-repeat mean accuracy and model complexity, paired bootstrap
// significance tests and Win-Tie-Loss matrices.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "genesim/data.hpp"
#include "genesim/error.hpp"
#include "genesim/genetic.hpp"
#include "genesim/induce.hpp"
#include "genesim/random.hpp"
#include "genesim/tree.hpp"

namespace genesim {

enum class AlgorithmKind { single_tree, bagged_committee, boosted_committee, genesim, majority_class };

inline std::string_view to_string(AlgorithmKind k) {
  switch (k) {
    case AlgorithmKind::single_tree: return "single_tree";
    case AlgorithmKind::bagged_committee: return "bagged_committee";
    case AlgorithmKind::boosted_committee: return "boosted_committee";
    case AlgorithmKind::genesim: return "genesim";
    case AlgorithmKind::majority_class: return "majority_class";
  }
  return "?";
}

inline AlgorithmKind parse_algorithm_kind(std::string_view text) {
  for (auto k : {AlgorithmKind::single_tree, AlgorithmKind::bagged_committee, AlgorithmKind::boosted_committee,
                 AlgorithmKind::genesim, AlgorithmKind::majority_class})
    if (to_string(k) == text) return k;
  throw ConfigError("unknown algorithm kind '" + std::string(text) +
                    "' (valid: single_tree, bagged_committee, boosted_committee, genesim, majority_class)");
}

struct AlgorithmSpec {
  std::string name;
  AlgorithmKind kind = AlgorithmKind::single_tree;
  InduceConfig induce;          // single_tree, bagged/boosted committee base learner
  std::size_t rounds = 10;      // committee size (boosting may stop early)
  std::size_t boost_max_depth = 3;
  GAConfig ga;                  // genesim
  EnsembleConfig ensemble;      // genesim
};

// A trained model: one tree, or a committee of trees. Complexity counts nodes
// for a single tree and members for a committee.
struct Model {
  enum class Vote { single, average, weighted } vote = Vote::single;
  std::vector<DecisionTree> trees;
  std::vector<double> weights;  // weighted vote only

  int predict(std::span<const double> row) const {
    if (vote == Vote::single) return trees.front().predict(row);
    Distribution score(trees.front().n_classes(), 0.0);
    for (std::size_t t = 0; t < trees.size(); ++t) {
      if (vote == Vote::average) {
        const auto& p = trees[t].leaf_distribution(row);
        for (std::size_t c = 0; c < score.size(); ++c) score[c] += p[c];
      } else {
        score[static_cast<std::size_t>(trees[t].predict(row))] += weights[t];
      }
    }
    return argmax(score);
  }

  double complexity() const {
    return vote == Vote::single ? static_cast<double>(trees.front().node_count()) : static_cast<double>(trees.size());
  }

  double accuracy(const Dataset& data, std::span<const Index> indices) const {
    if (indices.empty()) throw ValidationError("accuracy needs a non-empty index list");
    std::size_t hits = 0;
    for (Index i : indices)
      if (predict(data.row(i)) == data.label(i)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(indices.size());
  }
};

inline Model train_model(const AlgorithmSpec& spec, const Dataset& data, std::span<const Index> train,
                         std::uint64_t seed) {
  Model m;
  switch (spec.kind) {
    case AlgorithmKind::single_tree: {
      InduceConfig c = spec.induce;
      c.seed = seed;
      m.trees.push_back(induce_tree(data, train, c));
      break;
    }
    case AlgorithmKind::majority_class: {
      std::vector<std::size_t> counts(data.n_classes(), 0);
      for (Index i : train) ++counts[static_cast<std::size_t>(data.label(i))];
      m.trees.push_back(DecisionTree::leaf(smoothed_distribution(counts)));
      break;
    }
    case AlgorithmKind::bagged_committee:
      m.vote = Model::Vote::average;
      m.trees = bag(data, train, spec.induce, spec.rounds, seed);
      break;
    case AlgorithmKind::boosted_committee:
      m.vote = Model::Vote::weighted;
      for (auto& r : boost_rounds(data, train, spec.induce, spec.rounds, spec.boost_max_depth, seed)) {
        m.trees.push_back(std::move(r.tree));
        m.weights.push_back(r.vote_weight);
      }
      if (m.trees.empty()) {
        // every round was worse than chance: fall back to the prior
        std::vector<std::size_t> counts(data.n_classes(), 0);
        for (Index i : train) ++counts[static_cast<std::size_t>(data.label(i))];
        m.trees.push_back(DecisionTree::leaf(smoothed_distribution(counts)));
        m.weights.push_back(1.0);
      }
      break;
    case AlgorithmKind::genesim: {
      GAConfig ga = spec.ga;
      ga.seed = derive_seed(seed, {spec.ga.seed});
      m.trees.push_back(run_genesim(data, train, ga, spec.ensemble).tree);
      break;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Experiment

struct NamedDataset {
  std::string name;
  Dataset data;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation (n - 1)
};

inline Summary summarize(std::span<const double> xs) {
  Summary s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

// Results for one (dataset, algorithm) pair. Each measurement is the mean
// over the folds of one repeat.
struct ReportCell {
  std::string dataset;
  std::string algorithm;
  std::vector<double> accuracy;
  std::vector<double> complexity;
  std::vector<std::uint64_t> fold_fingerprints;  // one per repeat
  std::optional<std::string> error;

  bool complete() const { return !error; }
  Summary accuracy_summary() const { return summarize(accuracy); }
  Summary complexity_summary() const { return summarize(complexity); }
};

struct ExperimentReport {
  std::size_t n_folds = 0;
  std::size_t n_repeats = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> datasets;
  std::vector<std::string> algorithms;
  std::vector<ReportCell> cells;  // dataset-major

  const ReportCell& cell(std::size_t d, std::size_t a) const { return cells.at(d * algorithms.size() + a); }
  ReportCell& cell(std::size_t d, std::size_t a) { return cells.at(d * algorithms.size() + a); }
};

using ProgressFn = std::function<void(const ReportCell&)>;

// Every algorithm of a repeat sees the same fold assignment (paired design).
// Jobs are (dataset, algorithm, repeat) units; results land in fixed slots so
// the report does not depend on scheduling. A failing unit marks its cell
// with the error and leaves the rest of the run alone.
inline ExperimentReport run_experiment(const std::vector<NamedDataset>& datasets,
                                       const std::vector<AlgorithmSpec>& algorithms, std::size_t n_folds,
                                       std::size_t n_repeats, std::uint64_t seed, std::size_t jobs = 1,
                                       const ProgressFn& progress = {}) {
  if (datasets.empty()) throw ConfigError("experiment needs at least one dataset");
  if (algorithms.empty()) throw ConfigError("experiment needs at least one algorithm");
  for (std::size_t i = 0; i < algorithms.size(); ++i)
    for (std::size_t j = i + 1; j < algorithms.size(); ++j)
      if (algorithms[i].name == algorithms[j].name)
        throw ConfigError("duplicate algorithm name '" + algorithms[i].name + "'");

  ExperimentReport report{n_folds, n_repeats, seed, {}, {}, {}};
  for (const auto& d : datasets) report.datasets.push_back(d.name);
  for (const auto& a : algorithms) report.algorithms.push_back(a.name);

  std::vector<FoldPlan> plans;
  for (std::size_t d = 0; d < datasets.size(); ++d)
    plans.push_back(make_folds(datasets[d].data, n_folds, n_repeats, derive_seed(seed, {0xDA7A, d})));

  const std::size_t n_alg = algorithms.size();
  for (const auto& d : datasets)
    for (const auto& a : algorithms)
      report.cells.push_back({d.name, a.name, std::vector<double>(n_repeats), std::vector<double>(n_repeats),
                              std::vector<std::uint64_t>(n_repeats), std::nullopt});

  struct UnitResult {
    std::optional<std::string> error;
  };
  const std::size_t n_units = datasets.size() * n_alg * n_repeats;
  std::vector<UnitResult> unit_results(n_units);
  std::vector<std::size_t> remaining(report.cells.size(), n_repeats);
  std::mutex progress_mutex;

  auto run_unit = [&](std::size_t u) {
    const std::size_t r = u % n_repeats;
    const std::size_t a = (u / n_repeats) % n_alg;
    const std::size_t d = u / (n_repeats * n_alg);
    const auto& data = datasets[d].data;
    ReportCell& cell = report.cell(d, a);
    try {
      double acc = 0.0, cx = 0.0;
      for (std::size_t f = 0; f < n_folds; ++f) {
        const auto train = plans[d].train_indices(r, f);
        const auto test = plans[d].test_indices(r, f);
        const Model m = train_model(algorithms[a], data, train, derive_seed(seed, {0xA1, d, r, f}));
        acc += m.accuracy(data, test);
        cx += m.complexity();
      }
      cell.accuracy[r] = acc / static_cast<double>(n_folds);
      cell.complexity[r] = cx / static_cast<double>(n_folds);
      cell.fold_fingerprints[r] = plans[d].fingerprint(r);
    } catch (const std::exception& e) {
      unit_results[u].error = "repeat " + std::to_string(r) + ": " + e.what();
    }
    std::lock_guard lock(progress_mutex);
    const std::size_t c = d * n_alg + a;
    if (--remaining[c] == 0) {
      for (std::size_t rr = 0; rr < n_repeats; ++rr)
        if (auto& err = unit_results[(c * n_repeats) + rr].error; err && !cell.error) cell.error = *err;
      if (progress) progress(cell);
    }
  };

  if (jobs <= 1) {
    for (std::size_t u = 0; u < n_units; ++u) run_unit(u);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> workers;
    for (std::size_t w = 0; w < std::min(jobs, n_units); ++w)
      workers.emplace_back([&] {
        for (std::size_t u = next++; u < n_units; u = next++) run_unit(u);
      });
  }
  return report;
}

// ---------------------------------------------------------------------------
// Significance

// Two-sided paired bootstrap test on the differences d_i = x_i - y_i.
// The differences are centred on zero (the null hypothesis) and resampled
// with replacement; each resample yields the studentized mean
// t* = mean* / (sd* / sqrt(n)). The p-value is the fraction of resamples with
// |t*| >= |t_observed|. Swapping xs and ys negates every t and leaves p
// unchanged.
inline double bootstrap_p(std::span<const double> xs, std::span<const double> ys, std::size_t resamples,
                          std::uint64_t seed) {
  if (xs.size() != ys.size()) throw ValidationError("bootstrap_p needs equally many measurements");
  if (xs.size() < 2) throw ValidationError("bootstrap_p needs at least 2 measurements");
  if (resamples < 1) throw ValidationError("bootstrap_p needs at least one resample");
  const std::size_t n = xs.size();
  std::vector<double> diff(n);
  bool all_zero = true;
  for (std::size_t i = 0; i < n; ++i) {
    diff[i] = xs[i] - ys[i];
    if (diff[i] != 0.0) all_zero = false;
  }
  if (all_zero) return 1.0;

  const auto studentized = [n](std::span<const double> v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return mean / std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  };

  // Constant nonzero differences: every resample is degenerate and the
  // observed shift is as consistent as it gets.
  if (std::all_of(diff.begin(), diff.end(), [&](double d) { return d == diff.front(); })) return 0.0;

  const double observed = std::abs(studentized(diff));
  double mean = 0.0;
  for (double d : diff) mean += d;
  mean /= static_cast<double>(n);
  std::vector<double> centred(n);
  for (std::size_t i = 0; i < n; ++i) centred[i] = diff[i] - mean;

  // Resamples that draw one index n times have no spread and no t statistic;
  // they are left out of the count.
  Rng rng = make_rng(seed);
  std::vector<double> sample(n);
  std::size_t extreme = 0, used = 0;
  for (std::size_t b = 0; b < resamples; ++b) {
    bool degenerate = true;
    std::size_t first = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t pick = uniform_index(rng, n);
      if (i == 0) first = pick;
      if (centred[pick] != centred[first]) degenerate = false;
      sample[i] = centred[pick];
    }
    if (degenerate) continue;
    ++used;
    if (std::abs(studentized(sample)) >= observed) ++extreme;
  }
  if (used == 0) return 1.0;
  return std::clamp(static_cast<double>(extreme) / static_cast<double>(used), 0.0, 1.0);
}

inline constexpr std::size_t kDefaultResamples = 10000;
inline constexpr double kDefaultAlpha = 0.05;

enum class Metric { accuracy, complexity };

inline std::string_view to_string(Metric m) { return m == Metric::accuracy ? "accuracy" : "complexity"; }

struct WTLCell {
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t losses = 0;

  friend bool operator==(const WTLCell&, const WTLCell&) = default;
};

struct WTLMatrix {
  Metric metric = Metric::accuracy;
  std::vector<std::string> algorithms;
  std::vector<std::vector<WTLCell>> cells;  // [a][b]: record of a against b
  // (dataset, a, b) pairs counted as ties because a cell was missing
  std::vector<std::tuple<std::string, std::string, std::string>> flagged;
};

// A wins over B on a dataset when its mean is better (higher accuracy, or
// lower complexity) and the paired bootstrap p-value is below alpha.
inline WTLMatrix build_wtl(const ExperimentReport& report, double alpha, Metric metric = Metric::accuracy,
                           std::size_t resamples = kDefaultResamples) {
  const std::size_t n_alg = report.algorithms.size();
  WTLMatrix m{metric, report.algorithms, std::vector<std::vector<WTLCell>>(n_alg, std::vector<WTLCell>(n_alg)), {}};
  const auto values = [metric](const ReportCell& c) -> const std::vector<double>& {
    return metric == Metric::accuracy ? c.accuracy : c.complexity;
  };
  for (std::size_t d = 0; d < report.datasets.size(); ++d) {
    for (std::size_t a = 0; a < n_alg; ++a) {
      for (std::size_t b = a + 1; b < n_alg; ++b) {
        const auto& ca = report.cell(d, a);
        const auto& cb = report.cell(d, b);
        int outcome = 0;  // +1: a wins, -1: b wins
        if (!ca.complete() || !cb.complete()) {
          m.flagged.emplace_back(report.datasets[d], report.algorithms[a], report.algorithms[b]);
        } else {
          const auto& xa = values(ca);
          const auto& xb = values(cb);
          const double p = bootstrap_p(xa, xb, resamples, derive_seed(report.seed, {0xB007, d, a, b}));
          double ma = summarize(xa).mean, mb = summarize(xb).mean;
          if (metric == Metric::complexity) {
            ma = -ma;
            mb = -mb;
          }
          if (p < alpha && ma != mb) outcome = ma > mb ? 1 : -1;
        }
        if (outcome > 0) {
          ++m.cells[a][b].wins;
          ++m.cells[b][a].losses;
        } else if (outcome < 0) {
          ++m.cells[a][b].losses;
          ++m.cells[b][a].wins;
        } else {
          ++m.cells[a][b].ties;
          ++m.cells[b][a].ties;
        }
      }
      m.cells[a][a].ties += 1;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Output

// Shortest text that parses back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw Error("number formatting failed");
  return std::string(buf, ptr);
}

inline nlohmann::json report_to_json(const ExperimentReport& report, const std::vector<WTLMatrix>& wtl) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : report.cells) {
    nlohmann::json fps = nlohmann::json::array();
    for (auto fp : c.fold_fingerprints) {
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
      fps.push_back(buf);
    }
    const auto acc = c.accuracy_summary();
    const auto cx = c.complexity_summary();
    cells.push_back({{"dataset", c.dataset},
                     {"algorithm", c.algorithm},
                     {"accuracy", c.accuracy},
                     {"complexity", c.complexity},
                     {"accuracy_mean", acc.mean},
                     {"accuracy_std", acc.std},
                     {"complexity_mean", cx.mean},
                     {"complexity_std", cx.std},
                     {"fold_fingerprints", fps},
                     {"error", c.error ? nlohmann::json(*c.error) : nlohmann::json(nullptr)}});
  }
  nlohmann::json matrices = nlohmann::json::array();
  for (const auto& m : wtl) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t a = 0; a < m.algorithms.size(); ++a)
      for (std::size_t b = 0; b < m.algorithms.size(); ++b)
        rows.push_back({{"a", m.algorithms[a]},
                        {"b", m.algorithms[b]},
                        {"wins", m.cells[a][b].wins},
                        {"ties", m.cells[a][b].ties},
                        {"losses", m.cells[a][b].losses}});
    nlohmann::json flagged = nlohmann::json::array();
    for (const auto& [d, a, b] : m.flagged) flagged.push_back({d, a, b});
    matrices.push_back({{"metric", to_string(m.metric)}, {"cells", rows}, {"flagged", flagged}});
  }
  return {{"format", 1},
          {"n_folds", report.n_folds},
          {"n_repeats", report.n_repeats},
          {"seed", report.seed},
          {"datasets", report.datasets},
          {"algorithms", report.algorithms},
          {"cells", cells},
          {"wtl", matrices}};
}

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline std::string summary_table(const ExperimentReport& report, Metric metric) {
  std::string out = "dataset";
  for (const auto& a : report.algorithms) out += "," + csv_escape(a);
  out += '\n';
  for (std::size_t d = 0; d < report.datasets.size(); ++d) {
    out += csv_escape(report.datasets[d]);
    for (std::size_t a = 0; a < report.algorithms.size(); ++a) {
      const auto& c = report.cell(d, a);
      out += ',';
      if (!c.complete()) {
        out += "error";
        continue;
      }
      const auto s = metric == Metric::accuracy ? c.accuracy_summary() : c.complexity_summary();
      out += format_number(s.mean) + "\xC2\xB1" + format_number(s.std);
    }
    out += '\n';
  }
  return out;
}

}  // namespace detail

// Writes results.json, accuracy.csv, complexity.csv and wtl.csv into `dir`.
inline void emit_report(const ExperimentReport& report, const std::vector<WTLMatrix>& wtl,
                        const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

  detail::write_file(dir / "results.json", report_to_json(report, wtl).dump(2) + "\n");
  detail::write_file(dir / "accuracy.csv", detail::summary_table(report, Metric::accuracy));
  detail::write_file(dir / "complexity.csv", detail::summary_table(report, Metric::complexity));

  std::string wtl_csv = "metric,algorithm,opponent,wins,ties,losses\n";
  for (const auto& m : wtl)
    for (std::size_t a = 0; a < m.algorithms.size(); ++a)
      for (std::size_t b = 0; b < m.algorithms.size(); ++b)
        wtl_csv += std::string(to_string(m.metric)) + "," + detail::csv_escape(m.algorithms[a]) + "," +
                   detail::csv_escape(m.algorithms[b]) + "," + std::to_string(m.cells[a][b].wins) + "," +
                   std::to_string(m.cells[a][b].ties) + "," + std::to_string(m.cells[a][b].losses) + "\n";
  detail::write_file(dir / "wtl.csv", wtl_csv);
}

}  // namespace genesim
