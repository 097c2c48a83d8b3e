#pragma once

// Greedy top-down tree induction and the bagging / boosting factories that
// produce the initial pool of trees.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "genesim/data.hpp"
#include "genesim/error.hpp"
#include "genesim/random.hpp"
#include "genesim/tree.hpp"

namespace genesim {

enum class Criterion { gini, entropy };

inline std::string_view to_string(Criterion c) { return c == Criterion::gini ? "gini" : "entropy"; }

inline Criterion parse_criterion(std::string_view text) {
  if (text == "gini") return Criterion::gini;
  if (text == "entropy") return Criterion::entropy;
  throw ConfigError("unknown criterion '" + std::string(text) + "' (valid: gini, entropy)");
}

inline double gini(std::span<const double> p) {
  double s = 0.0;
  for (double v : p) s += v * v;
  return 1.0 - s;
}

inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log2(v);
  return h;
}

// Impurity of raw class counts totalling n.
inline double impurity(Criterion c, std::span<const std::size_t> counts, std::size_t n) {
  if (n == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(n);
  double acc = 0.0;
  if (c == Criterion::gini) {
    for (std::size_t k : counts) {
      const double p = static_cast<double>(k) * inv;
      acc += p * p;
    }
    return 1.0 - acc;
  }
  for (std::size_t k : counts)
    if (k > 0) {
      const double p = static_cast<double>(k) * inv;
      acc -= p * std::log2(p);
    }
  return acc;
}

// Defaults suit the small benchmark datasets: unlimited depth, leaves of at
// least 2 samples, nodes of fewer than 4 samples are not split.
struct InduceConfig {
  Criterion criterion = Criterion::gini;
  std::optional<std::size_t> max_depth;
  std::size_t min_samples_leaf = 2;
  std::size_t min_samples_split = 4;
  std::uint64_t seed = 0;

  void validate() const {
    if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be at least 1");
    if (min_samples_split < 2) throw ConfigError("min_samples_split must be at least 2");
    if (max_depth && *max_depth < 1) throw ConfigError("max_depth must be at least 1");
  }
};

// Laplace-smoothed class frequencies.
inline Distribution smoothed_distribution(std::span<const std::size_t> counts) {
  std::size_t n = 0;
  for (std::size_t k : counts) n += k;
  const double denom = static_cast<double>(n + counts.size());
  Distribution p(counts.size());
  for (std::size_t c = 0; c < counts.size(); ++c) p[c] = static_cast<double>(counts[c] + 1) / denom;
  return p;
}

namespace detail {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

inline double midpoint(double a, double b) {
  const double m = a + (b - a) / 2.0;
  return m < b ? m : a;  // keeps a <= m < b when a and b are adjacent doubles
}

class Inducer {
 public:
  Inducer(const Dataset& data, const InduceConfig& config) : data_(data), config_(config) {}

  DecisionTree grow(IndexList idx, std::size_t depth) const {
    const auto counts = class_counts(idx);
    const bool pure = std::count_if(counts.begin(), counts.end(), [](std::size_t k) { return k > 0; }) <= 1;
    const bool depth_capped = config_.max_depth && depth >= *config_.max_depth;
    if (pure || depth_capped || idx.size() < config_.min_samples_split)
      return DecisionTree::leaf(smoothed_distribution(counts));

    const auto best = best_split(idx, counts);
    if (best.feature < 0) return DecisionTree::leaf(smoothed_distribution(counts));

    IndexList left, right;
    const auto f = static_cast<std::size_t>(best.feature);
    for (Index i : idx) (data_.value(i, f) <= best.threshold ? left : right).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    return DecisionTree::split(best.feature, best.threshold, grow(std::move(left), depth + 1),
                               grow(std::move(right), depth + 1));
  }

 private:
  std::vector<std::size_t> class_counts(const IndexList& idx) const {
    std::vector<std::size_t> counts(data_.n_classes(), 0);
    for (Index i : idx) ++counts[static_cast<std::size_t>(data_.label(i))];
    return counts;
  }

  // Highest impurity decrease over all features and midpoint thresholds.
  // Ties keep the first candidate found (lowest feature, lowest threshold).
  SplitChoice best_split(const IndexList& idx, const std::vector<std::size_t>& counts) const {
    const std::size_t n = idx.size();
    const std::size_t leaf_min = config_.min_samples_leaf;
    const double parent = impurity(config_.criterion, counts, n);
    const double inv_n = 1.0 / static_cast<double>(n);

    SplitChoice best;
    std::vector<std::pair<double, int>> column(n);
    std::vector<std::size_t> left(counts.size()), right(counts.size());
    for (std::size_t f = 0; f < data_.n_features(); ++f) {
      for (std::size_t r = 0; r < n; ++r) column[r] = {data_.value(idx[r], f), data_.label(idx[r])};
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;
      std::fill(left.begin(), left.end(), 0);
      right = counts;
      for (std::size_t p = 0; p + 1 < n; ++p) {
        const auto y = static_cast<std::size_t>(column[p].second);
        ++left[y];
        --right[y];
        const std::size_t n_left = p + 1;
        const std::size_t n_right = n - n_left;
        if (column[p].first == column[p + 1].first) continue;
        if (n_left < leaf_min || n_right < leaf_min) continue;
        const double child = static_cast<double>(n_left) * inv_n * impurity(config_.criterion, left, n_left) +
                             static_cast<double>(n_right) * inv_n * impurity(config_.criterion, right, n_right);
        const double gain = parent - child;
        if (gain > best.gain + 1e-12) {
          best = {static_cast<int>(f), midpoint(column[p].first, column[p + 1].first), gain};
        }
      }
    }
    return best;
  }

  const Dataset& data_;
  const InduceConfig& config_;
};

}  // namespace detail

inline DecisionTree induce_tree(const Dataset& data, std::span<const Index> indices, const InduceConfig& config) {
  config.validate();
  if (indices.empty()) throw ValidationError("induce_tree needs a non-empty index list");
  return detail::Inducer(data, config).grow(IndexList(indices.begin(), indices.end()), 0);
}

// Sample of |indices| draws with replacement.
inline IndexList bootstrap_sample(std::span<const Index> indices, Rng& rng) {
  IndexList out(indices.size());
  for (auto& i : out) i = indices[uniform_index(rng, indices.size())];
  return out;
}

inline std::vector<DecisionTree> bag(const Dataset& data, std::span<const Index> indices,
                                     const InduceConfig& config, std::size_t rounds, std::uint64_t seed) {
  if (rounds < 1) throw ConfigError("bagging needs at least one round");
  if (indices.empty()) throw ValidationError("bag needs a non-empty index list");
  std::vector<DecisionTree> trees;
  trees.reserve(rounds);
  for (std::size_t r = 0; r < rounds; ++r) {
    Rng rng = make_rng(derive_seed(seed, {0xBA6, r}));
    trees.push_back(induce_tree(data, bootstrap_sample(indices, rng), config));
  }
  return trees;
}

// ---------------------------------------------------------------------------
// AdaBoost.M1 with weight-proportional resampling

struct BoostRound {
  DecisionTree tree;
  double weighted_error;
  // Committee vote weight, log((1 - e) (K - 1) / e); errors are floored at
  // 1e-10 so a perfect round gets a large finite weight.
  double vote_weight;
};

using WeightObserver = std::function<void(std::size_t round, std::span<const double> weights)>;

inline std::vector<BoostRound> boost_rounds(const Dataset& data, std::span<const Index> indices,
                                            const InduceConfig& base, std::size_t rounds,
                                            std::size_t max_depth, std::uint64_t seed,
                                            const WeightObserver& observe = {}) {
  if (rounds < 1) throw ConfigError("boosting needs at least one round");
  if (max_depth < 1) throw ConfigError("boosting max_depth must be at least 1");
  if (indices.empty()) throw ValidationError("boost needs a non-empty index list");

  InduceConfig config = base;
  config.max_depth = max_depth;
  const std::size_t n = indices.size();
  const double n_classes = static_cast<double>(data.n_classes());
  const double error_cap = 1.0 - 1.0 / n_classes;

  std::vector<double> weights(n, 1.0 / static_cast<double>(n));
  std::vector<double> cumulative(n);
  std::vector<BoostRound> out;
  Rng rng = make_rng(derive_seed(seed, {0xB0057}));
  for (std::size_t r = 0; r < rounds; ++r) {
    std::partial_sum(weights.begin(), weights.end(), cumulative.begin());
    IndexList sample(n);
    for (auto& s : sample) {
      const double u = uniform_unit(rng) * cumulative.back();
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      if (it == cumulative.end()) --it;
      s = indices[static_cast<std::size_t>(it - cumulative.begin())];
    }
    DecisionTree tree = induce_tree(data, sample, config);

    std::vector<bool> wrong(n);
    double error = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      wrong[i] = tree.predict(data.row(indices[i])) != data.label(indices[i]);
      if (wrong[i]) error += weights[i];
    }
    if (error >= error_cap) break;

    const double floored = std::max(error, 1e-10);
    const double beta = (1.0 - floored) * (n_classes - 1.0) / floored;
    out.push_back({std::move(tree), error, std::log(beta)});
    if (error == 0.0) break;

    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (wrong[i]) weights[i] *= beta;
      total += weights[i];
    }
    for (double& w : weights) w /= total;
    if (observe) observe(r, weights);
  }
  return out;
}

inline std::vector<DecisionTree> boost(const Dataset& data, std::span<const Index> indices,
                                       const InduceConfig& base, std::size_t rounds,
                                       std::size_t max_depth, std::uint64_t seed) {
  std::vector<DecisionTree> trees;
  for (auto& round : boost_rounds(data, indices, base, rounds, max_depth, seed))
    trees.push_back(std::move(round.tree));
  return trees;
}

// ---------------------------------------------------------------------------
// Population pool

// Pool members are grown coarser than the standalone inducer's defaults
// (leaves of at least 10 samples), standing in for the pruned trees of
// classic inducers.
inline constexpr std::size_t kPoolMinSamplesLeaf = 10;

inline std::vector<InduceConfig> default_pool_configs() {
  std::vector<InduceConfig> out;
  for (Criterion c : {Criterion::gini, Criterion::entropy})
    out.push_back(InduceConfig{c, std::nullopt, kPoolMinSamplesLeaf, 2 * kPoolMinSamplesLeaf, 0});
  return out;
}

struct EnsembleConfig {
  std::size_t bagging_rounds = 10;
  std::size_t boosting_rounds = 5;
  std::size_t boost_max_depth = 3;
  std::vector<InduceConfig> base_configs = default_pool_configs();
  std::uint64_t seed = 0;

  // Upper bound; boosting may stop early and emit fewer trees.
  std::size_t planned_trees() const {
    return base_configs.size() * (1 + bagging_rounds + boosting_rounds);
  }

  void validate() const {
    if (base_configs.empty()) throw ConfigError("ensemble needs at least one base config");
    if (boosting_rounds > 0 && boost_max_depth < 1) throw ConfigError("boost_max_depth must be at least 1");
    for (const auto& c : base_configs) c.validate();
  }
};

// Per base config: one plain tree, then the bagged trees, then the boosted
// trees.
inline std::vector<DecisionTree> build_population_pool(const Dataset& data, std::span<const Index> indices,
                                                       const EnsembleConfig& config) {
  config.validate();
  std::vector<DecisionTree> pool;
  for (std::size_t b = 0; b < config.base_configs.size(); ++b) {
    const auto& base = config.base_configs[b];
    pool.push_back(induce_tree(data, indices, base));
    if (config.bagging_rounds > 0)
      for (auto& t : bag(data, indices, base, config.bagging_rounds, derive_seed(config.seed, {b, 1})))
        pool.push_back(std::move(t));
    if (config.boosting_rounds > 0)
      for (auto& t : boost(data, indices, base, config.boosting_rounds, config.boost_max_depth,
                           derive_seed(config.seed, {b, 2})))
        pool.push_back(std::move(t));
  }
  return pool;
}

}  // namespace genesim
