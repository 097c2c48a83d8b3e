#pragma once

// The genetic loop that merges a pool of trees into one tree.
//
//   pool of trees (plain, bagged, boosted)  ->  population
//   repeat: tournament-select two parents, intersect their decision spaces,
//           rebuild a tree from the intersection, maybe mutate it;
//           keep the best population_size of parents + offspring
//
// Fitness is validation accuracy, ties broken by smaller node count.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "genesim/data.hpp"
#include "genesim/error.hpp"
#include "genesim/induce.hpp"
#include "genesim/random.hpp"
#include "genesim/space.hpp"
#include "genesim/tree.hpp"

namespace genesim {

struct Fitness {
  double accuracy = 0.0;
  std::size_t node_count = 0;

  friend bool operator==(const Fitness&, const Fitness&) = default;
};

inline Fitness measure_fitness(const DecisionTree& tree, const Dataset& data, std::span<const Index> validation) {
  return {accuracy(tree, data, validation), tree.node_count()};
}

class Individual {
 public:
  explicit Individual(DecisionTree tree) : tree_(std::move(tree)) {}
  Individual(DecisionTree tree, Fitness fitness) : tree_(std::move(tree)), fitness_(fitness) {}

  const DecisionTree& tree() const { return tree_; }
  bool evaluated() const { return fitness_.has_value(); }

  const Fitness& fitness() const {
    if (!fitness_) throw ValidationError("individual has not been evaluated");
    return *fitness_;
  }

  // Computes and caches the fitness once.
  const Fitness& evaluate(const Dataset& data, std::span<const Index> validation) {
    if (!fitness_) fitness_ = measure_fitness(tree_, data, validation);
    return *fitness_;
  }

 private:
  DecisionTree tree_;
  std::optional<Fitness> fitness_;
};

// `less` means a ranks ahead of b: higher accuracy, then fewer nodes.
inline std::weak_ordering fitness_order(const Fitness& a, const Fitness& b) {
  if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy ? std::weak_ordering::less : std::weak_ordering::greater;
  if (a.node_count != b.node_count)
    return a.node_count < b.node_count ? std::weak_ordering::less : std::weak_ordering::greater;
  return std::weak_ordering::equivalent;
}

inline std::weak_ordering fitness_order(const Individual& a, const Individual& b) {
  return fitness_order(a.fitness(), b.fitness());
}

inline bool fitter(const Individual& a, const Individual& b) { return fitness_order(a, b) < 0; }

// Guesses: the only published guidance is "a limited amount of iterations".
struct GAConfig {
  std::size_t population_size = 32;
  std::size_t iterations = 20;
  std::size_t tournament_size = 3;
  std::size_t offspring_per_iteration = 32;
  double mutation_probability = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (population_size < 2) throw ConfigError("population_size must be at least 2");
    if (iterations < 1) throw ConfigError("iterations must be at least 1");
    if (tournament_size < 2) throw ConfigError("tournament_size must be at least 2");
    if (!(mutation_probability >= 0.0 && mutation_probability <= 1.0))
      throw ConfigError("mutation_probability must lie in [0, 1]");
  }
};

// Individuals sorted best first.
struct Population {
  std::vector<Individual> individuals;

  std::size_t size() const { return individuals.size(); }
  const Individual& best() const { return individuals.front(); }

  double mean_accuracy() const {
    double s = 0.0;
    for (const auto& ind : individuals) s += ind.fitness().accuracy;
    return individuals.empty() ? 0.0 : s / static_cast<double>(individuals.size());
  }
};

// Draws `tournament_size` members uniformly with replacement and returns the
// fittest. Among equally fit draws the earliest one wins.
inline const Individual& tournament_select(const Population& pop, std::size_t tournament_size, Rng& rng) {
  if (pop.individuals.empty()) throw ValidationError("tournament on an empty population");
  if (tournament_size < 1) throw ConfigError("tournament_size must be positive");
  const Individual* winner = &pop.individuals[uniform_index(rng, pop.size())];
  for (std::size_t t = 1; t < tournament_size; ++t) {
    const Individual* challenger = &pop.individuals[uniform_index(rng, pop.size())];
    if (fitter(*challenger, *winner)) winner = challenger;
  }
  return *winner;
}

// Intersects the parents' decision spaces and rebuilds a single tree from the
// result; the offspring is evaluated on the validation indices.
inline Individual recombine(const Individual& a, const Individual& b, const Dataset& data,
                            std::span<const Index> validation, Rng& rng) {
  const std::size_t k = data.n_features();
  const RegionSet merged = merge_regions(tree_to_regions(a.tree(), k), tree_to_regions(b.tree(), k));
  Individual child(regions_to_tree(merged, rng));
  child.evaluate(data, validation);
  return child;
}

enum class MutationKind { none, threshold, swap };

namespace detail {

inline std::optional<DecisionTree> mutate_threshold(const DecisionTree& tree, const Dataset& data, Rng& rng) {
  const auto internal = tree.internal_nodes();
  if (internal.empty()) return std::nullopt;
  const NodeHandle h = internal[uniform_index(rng, internal.size())];
  const auto& spec = data.features().at(static_cast<std::size_t>(tree.node(h.index).feature));
  return tree.with_threshold(h, uniform_real(rng, spec.min, spec.max));
}

inline std::optional<DecisionTree> mutate_swap(const DecisionTree& tree, Rng& rng) {
  const auto roots = tree.subtree_roots();
  std::vector<std::pair<NodeHandle, NodeHandle>> pairs;
  for (std::size_t i = 0; i < roots.size(); ++i)
    for (std::size_t j = i + 1; j < roots.size(); ++j)
      if (!tree.contains(roots[i], roots[j])) pairs.emplace_back(roots[i], roots[j]);
  if (pairs.empty()) return std::nullopt;
  const auto [a, b] = pairs[uniform_index(rng, pairs.size())];
  return tree.swap_subtrees(a, b);
}

}  // namespace detail

struct MutationOutcome {
  Individual individual;
  MutationKind applied;
};

// With probability p apply one mutation, chosen uniformly:
//  - threshold: a random internal node gets a threshold drawn uniformly from
//    its feature's observed range;
//  - swap: two random non-nested subtrees trade places (falls back to the
//    threshold mutation when no such pair exists).
// A bare leaf cannot be mutated.
inline MutationOutcome mutate_traced(const Individual& ind, const Dataset& data, std::span<const Index> validation,
                                     Rng& rng, double p) {
  if (!(uniform_unit(rng) < p)) return {ind, MutationKind::none};
  std::optional<DecisionTree> changed;
  MutationKind kind = uniform_index(rng, 2) == 0 ? MutationKind::threshold : MutationKind::swap;
  if (kind == MutationKind::swap) {
    changed = detail::mutate_swap(ind.tree(), rng);
    if (!changed) kind = MutationKind::threshold;
  }
  if (kind == MutationKind::threshold) changed = detail::mutate_threshold(ind.tree(), data, rng);
  if (!changed) return {ind, MutationKind::none};
  Individual out(std::move(*changed));
  out.evaluate(data, validation);
  return {std::move(out), kind};
}

inline Individual mutate(const Individual& ind, const Dataset& data, std::span<const Index> validation, Rng& rng,
                         double p) {
  return mutate_traced(ind, data, validation, rng, p).individual;
}

// Truncation replacement: parents and offspring sorted by fitness (stable, so
// parents stay ahead of equally fit offspring), best `population_size` kept.
inline Population replace(const Population& pop, std::vector<Individual> offspring, std::size_t population_size) {
  Population next;
  next.individuals.reserve(pop.size() + offspring.size());
  next.individuals.insert(next.individuals.end(), pop.individuals.begin(), pop.individuals.end());
  for (auto& o : offspring) next.individuals.push_back(std::move(o));
  std::stable_sort(next.individuals.begin(), next.individuals.end(), fitter);
  if (next.individuals.size() > population_size) next.individuals.resize(population_size, next.individuals.front());
  return next;
}

struct TraceRow {
  std::size_t iteration;  // 0 is the initial population
  Fitness best;
  double mean_accuracy;
};

inline void write_trace_csv(std::ostream& out, std::span<const TraceRow> trace) {
  out << "iteration,best_accuracy,best_node_count,mean_accuracy\n";
  const auto old_precision = out.precision(17);
  for (const auto& row : trace)
    out << row.iteration << ',' << row.best.accuracy << ',' << row.best.node_count << ',' << row.mean_accuracy
        << '\n';
  out.precision(old_precision);
}

struct GenesimResult {
  DecisionTree tree;
  Fitness fitness;
  std::vector<TraceRow> trace;
  std::size_t pool_size = 0;  // trees produced by the ensemble before fill/truncate
};

// Initial population: the ensemble pool built on `grow`, evaluated on
// `validation`, topped up with extra bagged trees or truncated by fitness to
// exactly population_size.
inline Population initial_population(const Dataset& data, std::span<const Index> grow,
                                     std::span<const Index> validation, const GAConfig& config,
                                     const EnsembleConfig& ensemble, std::size_t* pool_size = nullptr) {
  EnsembleConfig pool_config = ensemble;
  pool_config.seed = derive_seed(config.seed, {0x9001, ensemble.seed});
  auto pool = build_population_pool(data, grow, pool_config);
  if (pool_size) *pool_size = pool.size();

  for (std::size_t extra = 0; pool.size() < config.population_size; ++extra) {
    const auto& base = ensemble.base_configs[extra % ensemble.base_configs.size()];
    auto trees = bag(data, grow, base, 1, derive_seed(pool_config.seed, {0xF111, extra}));
    pool.push_back(std::move(trees.front()));
  }

  Population pop;
  pop.individuals.reserve(pool.size());
  for (auto& t : pool) {
    Individual ind(std::move(t));
    ind.evaluate(data, validation);
    pop.individuals.push_back(std::move(ind));
  }
  std::stable_sort(pop.individuals.begin(), pop.individuals.end(), fitter);
  if (pop.size() > config.population_size) pop.individuals.resize(config.population_size, pop.individuals.front());
  return pop;
}

// One generation: offspring o of iteration `iteration` draws from its own
// stream derived from (seed, iteration, o), so the result does not depend on
// the order in which offspring are produced.
inline Population evolve(const Population& pop, const Dataset& data, std::span<const Index> validation,
                         const GAConfig& config, std::size_t iteration) {
  std::vector<Individual> offspring;
  offspring.reserve(config.offspring_per_iteration);
  for (std::size_t o = 0; o < config.offspring_per_iteration; ++o) {
    Rng rng = make_rng(derive_seed(config.seed, {0x6E, iteration, o}));
    const Individual& a = tournament_select(pop, config.tournament_size, rng);
    const Individual& b = tournament_select(pop, config.tournament_size, rng);
    Individual child = recombine(a, b, data, validation, rng);
    offspring.push_back(mutate(child, data, validation, rng, config.mutation_probability));
  }
  return replace(pop, std::move(offspring), config.population_size);
}

inline GenesimResult run_genesim(const Dataset& data, std::span<const Index> train, const GAConfig& config,
                                 const EnsembleConfig& ensemble) {
  config.validate();
  ensemble.validate();
  if (train.size() < 2) throw ValidationError("GENESIM needs at least 2 training samples");
  const HalfSplit split = split_half(data, train, derive_seed(config.seed, {0x5711}));

  std::size_t pool_size = 0;
  Population pop = initial_population(data, split.grow, split.validation, config, ensemble, &pool_size);
  std::vector<TraceRow> trace{{0, pop.best().fitness(), pop.mean_accuracy()}};
  for (std::size_t it = 1; it <= config.iterations; ++it) {
    pop = evolve(pop, data, split.validation, config, it);
    trace.push_back({it, pop.best().fitness(), pop.mean_accuracy()});
  }
  return {pop.best().tree(), pop.best().fitness(), std::move(trace), pool_size};
}

}  // namespace genesim
