// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "support.hpp"

using namespace genesim;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << name << ": " << o.detail << std::endl;
  if (!o.pass) ++failures;
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << std::fixed << v;
  return s.str();
}

// 1. sweep merge equals the all-pairs merge
Outcome merge_equivalence() {
  const auto t0 = Clock::now();
  Rng rng = make_rng(1001);
  std::size_t mismatches = 0, max_regions = 0, total_regions = 0;
  for (int pair = 0; pair < 500; ++pair) {
    const std::size_t k = 1 + static_cast<std::size_t>(pair % 4);
    const auto a = genesim::testing::random_partition(rng, k, 64, 3);
    const auto b = genesim::testing::random_partition(rng, k, 64, 3);
    max_regions = std::max({max_regions, a.regions.size(), b.regions.size()});
    total_regions += a.regions.size() + b.regions.size();
    if (!(merge_regions(a, b) == naive_merge(a, b))) ++mismatches;
  }
  const double secs = since(t0);
  return {mismatches == 0 && secs < 30.0, "500 pairs, regions per side mean " +
                                              fmt(static_cast<double>(total_regions) / 1000.0, 1) + " max " +
                                              std::to_string(max_regions) + ", mismatches " + std::to_string(mismatches) + ", " +
                                              fmt(secs, 2) + " s (limit 30 s)"};
}

// 2. tree regions partition space; the rebuilt tree predicts like the original
Outcome partition_invariants() {
  const auto t0 = Clock::now();
  Rng rng = make_rng(1002);
  std::size_t coverage_errors = 0, prediction_errors = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = 1 + static_cast<std::size_t>(trial % 5);
    const auto tree = genesim::testing::random_tree(rng, k, 6, 2 + uniform_index(rng, 3));
    const auto rs = tree_to_regions(tree, k);
    Rng build = make_rng(derive_seed(1002, {static_cast<std::uint64_t>(trial)}));
    const auto back = regions_to_tree(rs, build);
    for (int p = 0; p < 10000; ++p) {
      const auto x = genesim::testing::random_point(rng, k);
      if (rs.regions_containing(x).size() != 1) ++coverage_errors;
      if (back.predict(x) != tree.predict(x)) ++prediction_errors;
    }
  }
  const double secs = since(t0);
  return {coverage_errors == 0 && prediction_errors == 0 && secs < 60.0,
          "200 trees x 10000 points, coverage errors " + std::to_string(coverage_errors) +
              ", round-trip prediction errors " + std::to_string(prediction_errors) + ", " + fmt(secs, 2) +
              " s (limit 60 s)"};
}

// 3. recombine(t, t) predicts like t
Outcome self_merge() {
  const Dataset data = genesim::testing::iris();
  const auto all = data.all_indices();
  Rng rng = make_rng(1003);
  std::size_t errors = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Individual t(genesim::testing::random_tree(rng, data.n_features(), 6, data.n_classes()));
    const auto child = recombine(t, t, data, all, rng);
    for (int p = 0; p < 1000; ++p) {
      const auto x = genesim::testing::random_point(rng, data.n_features());
      if (child.tree().predict(x) != t.tree().predict(x)) ++errors;
    }
  }
  return {errors == 0, "100 trees x 1000 points, disagreements " + std::to_string(errors)};
}

// 4. the best fitness of every trace never gets worse
Outcome elitism(const std::vector<genesim::NamedDataset>& datasets) {
  std::size_t traces = 0, violations = 0;
  for (const auto& [name, data] : datasets) {
    const FoldPlan plan = make_folds(data, 3, 2, 1004);
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t f = 0; f < 3; ++f) {
        GAConfig ga;
        ga.seed = derive_seed(1004, {r, f});
        const auto result = run_genesim(data, plan.train_indices(r, f), ga, EnsembleConfig{});
        ++traces;
        for (std::size_t i = 1; i < result.trace.size(); ++i)
          if (fitness_order(result.trace[i].best, result.trace[i - 1].best) > 0) ++violations;
      }
  }
  return {violations == 0, std::to_string(traces) + " traces, regressions " + std::to_string(violations)};
}

struct DeskRun {
  double genesim_accuracy, genesim_nodes, tree_accuracy, tree_nodes, seconds;
};

DeskRun desk_run(const genesim::NamedDataset& dataset) {
  AlgorithmSpec tree;
  tree.name = "single_tree";
  tree.kind = AlgorithmKind::single_tree;
  AlgorithmSpec gen;
  gen.name = "genesim";
  gen.kind = AlgorithmKind::genesim;
  const auto t0 = Clock::now();
  const auto report = run_experiment({dataset}, {tree, gen}, 3, 10, 1005);
  const double secs = since(t0);
  for (const auto& c : report.cells)
    if (c.error) throw std::runtime_error(c.dataset + "/" + c.algorithm + ": " + *c.error);
  return {report.cell(0, 1).accuracy_summary().mean, report.cell(0, 1).complexity_summary().mean,
          report.cell(0, 0).accuracy_summary().mean, report.cell(0, 0).complexity_summary().mean, secs};
}

// 7. bootstrap test calibration and power
Outcome bootstrap_calibration() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(1007);
  std::normal_distribution<double> noise(0.0, 0.01);
  const auto draw = [&](double mean) {
    std::vector<double> v(10);
    for (auto& x : v) x = mean + noise(gen);
    return v;
  };
  std::size_t null_rejections = 0, shift_rejections = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto a = draw(0.8), b = draw(0.8);
    if (bootstrap_p(a, b, kDefaultResamples, derive_seed(1007, {0, i})) < kDefaultAlpha) ++null_rejections;
    const auto c = draw(0.9), d = draw(0.8);
    if (bootstrap_p(c, d, kDefaultResamples, derive_seed(1007, {1, i})) < kDefaultAlpha) ++shift_rejections;
  }
  const double null_rate = static_cast<double>(null_rejections) / 1000.0;
  const double power = static_cast<double>(shift_rejections) / 1000.0;
  const double secs = since(t0);
  return {null_rate <= 0.08 && power >= 0.99 && secs < 60.0,
          "null rejection " + fmt(null_rate, 3) + " (limit 0.08), shifted rejection " + fmt(power, 3) +
              " (min 0.99), " + fmt(secs, 2) + " s (limit 60 s)"};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GENESIM_CLI) + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 8. two benchmark runs give byte-identical results.json
Outcome benchmark_determinism() {
  const auto dir = fs::temp_directory_path() / "genesim_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const nlohmann::json config = {
      {"datasets",
       {{{"name", "iris"}, {"csv", genesim::testing::data_path("iris.csv")}, {"label", "species"}},
        {{"name", "wine"}, {"csv", genesim::testing::data_path("wine.csv")}, {"label", "class"}}}},
      {"algorithms",
       {{{"name", "single_tree"}, {"kind", "single_tree"}},
        {{"name", "bagging"}, {"kind", "bagged_committee"}},
        {{"name", "boosting"}, {"kind", "boosted_committee"}},
        {{"name", "genesim"}, {"kind", "genesim"}, {"ga", {{"iterations", 5}}}}}},
      {"n_repeats", 3},
      {"seed", 1008}};
  std::ofstream(dir / "experiment.json") << config.dump(2);
  const std::string base = "benchmark --config " + (dir / "experiment.json").string();
  const int a = run_cli(base + " --output " + (dir / "run1").string());
  const int b = run_cli(base + " --jobs 2 --output " + (dir / "run2").string());
  if (a != 0 || b != 0)
    return {false, "benchmark exit codes " + std::to_string(a) + ", " + std::to_string(b)};
  const auto first = slurp(dir / "run1" / "results.json");
  const auto second = slurp(dir / "run2" / "results.json");
  const bool same = !first.empty() && first == second;
  fs::remove_all(dir);
  return {same, "results.json " + std::to_string(first.size()) + " bytes, " + (same ? "identical" : "different")};
}

void guarded(int id, const std::string& name, const std::function<Outcome()>& fn) {
  try {
    report(id, name, fn());
  } catch (const std::exception& e) {
    report(id, name, {false, std::string("exception: ") + e.what()});
  }
}

}  // namespace

int main() {
  const std::vector<NamedDataset> datasets{{"iris", genesim::testing::iris()},
                                           {"breast", genesim::testing::breast()}};

  guarded(1, "merge equals naive merge", merge_equivalence);
  guarded(2, "partition invariants", partition_invariants);
  guarded(3, "self-merge invariance", self_merge);
  guarded(4, "GA elitism", [&] { return elitism(datasets); });

  std::optional<DeskRun> iris, breast;
  try {
    iris = desk_run(datasets[0]);
    breast = desk_run(datasets[1]);
  } catch (const std::exception& e) {
    report(5, "desk-scale accuracy", {false, std::string("exception: ") + e.what()});
    report(6, "complexity ordering", {false, std::string("exception: ") + e.what()});
  }
  if (iris && breast) {
    const bool ok5 = iris->genesim_accuracy >= 0.90 && iris->genesim_nodes <= 15.0 &&
                     breast->genesim_accuracy >= 0.92 && std::abs(iris->tree_accuracy - 0.9504) <= 0.05 &&
                     iris->seconds < 900.0 && breast->seconds < 900.0;
    report(5, "desk-scale accuracy",
           {ok5, "iris GENESIM " + fmt(iris->genesim_accuracy) + " (min 0.90), " + fmt(iris->genesim_nodes, 2) +
                     " nodes (max 15); breast GENESIM " + fmt(breast->genesim_accuracy) +
                     " (min 0.92); iris single tree " + fmt(iris->tree_accuracy) +
                     " (0.9504 +/- 0.05); runtimes " + fmt(iris->seconds, 1) + " s, " + fmt(breast->seconds, 1) +
                     " s (limit 900 s each)"});
    const bool ok6 = iris->genesim_nodes < iris->tree_nodes && breast->genesim_nodes < breast->tree_nodes;
    report(6, "complexity ordering",
           {ok6, "iris " + fmt(iris->genesim_nodes, 2) + " < " + fmt(iris->tree_nodes, 2) + ", breast " +
                     fmt(breast->genesim_nodes, 2) + " < " + fmt(breast->tree_nodes, 2) + " nodes"});
  }

  guarded(7, "bootstrap calibration", bootstrap_calibration);
  guarded(8, "benchmark determinism", benchmark_determinism);

  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
