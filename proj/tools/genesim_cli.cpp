// genesim command-line frontend.
//
//   genesim induce    --data iris.csv --label species --criterion gini
//   genesim genesim   --data iris.csv --label species --seed 7 --trace trace.csv
//   genesim benchmark --config experiment.json
//   genesim merge     a.json b.json
//
// Exit codes: 0 success, 2 usage/config/input error, 1 internal error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "genesim/genesim.hpp"

namespace {

using namespace genesim;

constexpr int kExitUsage = 2;
constexpr int kExitInternal = 1;

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("GENESIM_SEED")) {
    std::uint64_t v = 0;
    const std::string text(env);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
      throw ConfigError("GENESIM_SEED must be a non-negative integer, got '" + text + "'");
    return v;
  }
  return 0;
}

struct DataOptions {
  std::string csv;
  std::string label;
  std::string manifest;

  void add(CLI::App* app) {
    app->add_option("--data", csv, "CSV file with a header row")->required();
    app->add_option("--label", label, "name of the class column");
    app->add_option("--manifest", manifest, "JSON manifest with per-column kinds");
  }

  Dataset load() const {
    std::string label_column = label;
    std::map<std::string, FeatureKind> kinds;
    if (!manifest.empty()) {
      const Manifest m = load_manifest(manifest);
      kinds = m.kinds;
      if (label_column.empty() && m.label_column) label_column = *m.label_column;
    }
    if (label_column.empty()) throw ConfigError("--label is required (or a manifest naming the label column)");
    return load_csv(csv, label_column, kinds);
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GENESIM: merge an ensemble of decision trees into one tree with a genetic algorithm"};
  app.require_subcommand(1);

  // induce
  auto* induce_cmd = app.add_subcommand("induce", "grow one greedy decision tree on the whole dataset");
  DataOptions induce_data;
  induce_data.add(induce_cmd);
  std::string criterion = "gini";
  std::optional<std::size_t> max_depth;
  InduceConfig induce_defaults;
  std::size_t min_leaf = induce_defaults.min_samples_leaf;
  std::size_t min_split = induce_defaults.min_samples_split;
  std::string induce_out;
  induce_cmd->add_option("--criterion", criterion, "split criterion: gini or entropy");
  induce_cmd->add_option("--max-depth", max_depth, "depth cap (default: none)");
  induce_cmd->add_option("--min-samples-leaf", min_leaf, "minimum samples per leaf");
  induce_cmd->add_option("--min-samples-split", min_split, "minimum samples to split a node");
  induce_cmd->add_option("-o,--output", induce_out, "write the tree here instead of stdout");

  // genesim
  auto* ga_cmd = app.add_subcommand("genesim", "run GENESIM on a stratified train/holdout split");
  DataOptions ga_data;
  ga_data.add(ga_cmd);
  GAConfig ga;
  EnsembleConfig ensemble;
  std::optional<std::uint64_t> ga_seed;
  std::size_t holdout_folds = 3;
  std::string trace_path, ga_out;
  ga_cmd->add_option("--seed", ga_seed, "random seed (fallback: GENESIM_SEED, then 0)");
  ga_cmd->add_option("--population-size", ga.population_size);
  ga_cmd->add_option("--iterations", ga.iterations);
  ga_cmd->add_option("--tournament-size", ga.tournament_size);
  ga_cmd->add_option("--offspring", ga.offspring_per_iteration, "offspring per iteration");
  ga_cmd->add_option("--mutation-probability", ga.mutation_probability);
  ga_cmd->add_option("--bagging-rounds", ensemble.bagging_rounds);
  ga_cmd->add_option("--boosting-rounds", ensemble.boosting_rounds);
  ga_cmd->add_option("--holdout-folds", holdout_folds, "hold out 1/N of the data for testing (default 3)");
  ga_cmd->add_option("--trace", trace_path, "write the per-iteration trace CSV here");
  ga_cmd->add_option("-o,--output", ga_out, "write the tree here instead of stdout");

  // benchmark
  auto* bench_cmd = app.add_subcommand("benchmark", "run the cross-validation protocol from a JSON config");
  std::string config_path, bench_output;
  std::optional<std::uint64_t> bench_seed;
  std::optional<std::size_t> bench_jobs;
  bench_cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
  bench_cmd->add_option("--seed", bench_seed, "override the config seed");
  bench_cmd->add_option("--jobs", bench_jobs, "concurrent experiment cells");
  bench_cmd->add_option("--output", bench_output, "override the output directory");

  // merge
  auto* merge_cmd = app.add_subcommand("merge", "intersect two serialized trees and rebuild one tree");
  std::string tree_a, tree_b;
  std::optional<std::size_t> dims;
  std::optional<std::uint64_t> merge_seed;
  bool dump_regions = false;
  merge_cmd->add_option("first", tree_a, "tree JSON")->required();
  merge_cmd->add_option("second", tree_b, "tree JSON")->required();
  merge_cmd->add_option("--features", dims, "number of features (default: highest tested index + 1)");
  merge_cmd->add_option("--seed", merge_seed, "random seed for split selection");
  merge_cmd->add_flag("--regions", dump_regions, "print the merged region set instead of the tree");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*induce_cmd) {
      const Dataset data = induce_data.load();
      InduceConfig config;
      config.criterion = parse_criterion(criterion);
      config.max_depth = max_depth;
      config.min_samples_leaf = min_leaf;
      config.min_samples_split = min_split;
      const auto all = data.all_indices();
      const DecisionTree tree = induce_tree(data, all, config);
      write_text(induce_out, serialize(tree, 2) + "\n");
      std::cerr << "node_count=" << tree.node_count()
                << " training_accuracy=" << format_number(accuracy(tree, data, all)) << "\n";
    } else if (*ga_cmd) {
      const Dataset data = ga_data.load();
      ga.seed = resolve_seed(ga_seed);
      ga.validate();
      ensemble.validate();
      const FoldPlan plan = make_folds(data, holdout_folds, 1, derive_seed(ga.seed, {0x401D}));
      const auto train = plan.train_indices(0, 0);
      const auto holdout = plan.test_indices(0, 0);
      const GenesimResult result = run_genesim(data, train, ga, ensemble);
      write_text(ga_out, serialize(result.tree, 2) + "\n");
      if (!trace_path.empty()) {
        std::ofstream trace(trace_path);
        if (!trace) throw IoError("cannot write '" + trace_path + "'");
        write_trace_csv(trace, result.trace);
      }
      std::cerr << "node_count=" << result.tree.node_count()
                << " validation_accuracy=" << format_number(result.fitness.accuracy)
                << " holdout_accuracy=" << format_number(accuracy(result.tree, data, holdout)) << "\n";
    } else if (*bench_cmd) {
      ExperimentConfig config = load_experiment_config(config_path);
      if (bench_seed) config.seed = *bench_seed;
      else if (std::getenv("GENESIM_SEED")) config.seed = resolve_seed(std::nullopt);
      if (bench_jobs) {
        if (*bench_jobs < 1) throw ConfigError("--jobs must be at least 1");
        config.jobs = *bench_jobs;
      }
      if (!bench_output.empty()) config.output = bench_output;
      const auto datasets = load_datasets(config);
      for (const auto& d : datasets) make_folds(d.data, config.n_folds, 1, 0);  // precondition check

      std::size_t done = 0;
      const std::size_t total = datasets.size() * config.algorithms.size();
      const ExperimentReport report = run_experiment(
          datasets, config.algorithms, config.n_folds, config.n_repeats, config.seed, config.jobs,
          [&](const ReportCell& cell) {
            ++done;
            std::cerr << "[" << done << "/" << total << "] " << cell.dataset << " / " << cell.algorithm;
            if (cell.error) {
              std::cerr << " FAILED: " << *cell.error << "\n";
            } else {
              const auto acc = cell.accuracy_summary();
              const auto cx = cell.complexity_summary();
              std::cerr << " accuracy " << format_number(acc.mean) << " complexity " << format_number(cx.mean)
                        << "\n";
            }
          });
      std::vector<WTLMatrix> wtl{build_wtl(report, config.alpha, Metric::accuracy, config.resamples),
                                 build_wtl(report, config.alpha, Metric::complexity, config.resamples)};
      emit_report(report, wtl, config.output);
      std::cerr << "wrote " << config.output.string() << "\n";
    } else if (*merge_cmd) {
      const DecisionTree a = deserialize(read_text(tree_a));
      const DecisionTree b = deserialize(read_text(tree_b));
      const std::size_t k =
          dims ? *dims : static_cast<std::size_t>(std::max({a.max_feature(), b.max_feature(), 0}) + 1);
      const RegionSet merged = merge_regions(tree_to_regions(a, k), tree_to_regions(b, k));
      if (dump_regions) {
        std::cout << region_set_to_json(merged).dump(2) << "\n";
      } else {
        Rng rng = make_rng(resolve_seed(merge_seed));
        std::cout << serialize(regions_to_tree(merged, rng), 2) << "\n";
      }
      std::cerr << "regions=" << merged.regions.size() << "\n";
    }
  } catch (const genesim::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return 0;
}
