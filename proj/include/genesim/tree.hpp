#pragma once

// Binary axis-parallel decision trees. Internal nodes test `x[feature] <=
// threshold` (true goes left); leaves hold a class distribution.
//
// Nodes are stored in preorder. Each node records the size of its subtree, so
// the left child of internal node i is i + 1 and the right child is
// i + 1 + size(left). Trees are values: every editing operation returns a new
// tree and leaves the original untouched.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "genesim/data.hpp"
#include "genesim/error.hpp"

namespace genesim {

using Distribution = std::vector<double>;

inline constexpr double kDistributionTolerance = 1e-9;

// argmax with ties going to the lowest class index
inline int argmax(std::span<const double> p) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < p.size(); ++c)
    if (p[c] > p[best]) best = c;
  return static_cast<int>(best);
}

inline void check_distribution(std::span<const double> p) {
  if (p.empty()) throw ValidationError("empty class distribution");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw ValidationError("class distribution has a negative or NaN entry");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kDistributionTolerance)
    throw ValidationError("class distribution sums to " + std::to_string(sum));
}

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::size_t size = 1;       // nodes in this subtree, including itself
  Distribution distribution;  // leaves only

  bool is_leaf() const { return feature < 0; }

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

// Position of a node in one specific tree revision.
struct NodeHandle {
  std::size_t index = 0;
  std::uint64_t revision = 0;
};

class DecisionTree {
 public:
  static DecisionTree leaf(Distribution distribution) {
    check_distribution(distribution);
    DecisionTree t;
    t.n_classes_ = distribution.size();
    t.nodes_.push_back(TreeNode{-1, 0.0, 1, std::move(distribution)});
    return t;
  }

  static DecisionTree split(int feature, double threshold, const DecisionTree& left,
                            const DecisionTree& right) {
    if (feature < 0) throw ValidationError("split feature index must be non-negative");
    if (!std::isfinite(threshold)) throw ValidationError("split threshold must be finite");
    if (left.n_classes_ != right.n_classes_)
      throw ValidationError("subtrees disagree on the number of classes");
    DecisionTree t;
    t.n_classes_ = left.n_classes_;
    t.nodes_.reserve(1 + left.nodes_.size() + right.nodes_.size());
    t.nodes_.push_back(TreeNode{feature, threshold, 1 + left.nodes_.size() + right.nodes_.size(), {}});
    t.nodes_.insert(t.nodes_.end(), left.nodes_.begin(), left.nodes_.end());
    t.nodes_.insert(t.nodes_.end(), right.nodes_.begin(), right.nodes_.end());
    return t;
  }

  // Builds a tree from preorder nodes (sizes included) and validates it.
  static DecisionTree from_nodes(std::size_t n_classes, std::vector<TreeNode> nodes) {
    DecisionTree t;
    t.n_classes_ = n_classes;
    t.nodes_ = std::move(nodes);
    t.validate();
    return t;
  }

  std::size_t n_classes() const { return n_classes_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::uint64_t revision() const { return revision_; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(std::size_t i) const { return nodes_.at(i); }

  std::size_t left_child(std::size_t i) const { return i + 1; }
  std::size_t right_child(std::size_t i) const { return i + 1 + nodes_[i + 1].size; }

  std::size_t depth() const {
    std::size_t best = 0;
    walk([&](std::size_t, std::size_t d) { best = std::max(best, d); });
    return best;
  }

  // Largest feature index used, or -1 for a bare leaf.
  int max_feature() const {
    int f = -1;
    for (const auto& n : nodes_) f = std::max(f, n.feature);
    return f;
  }

  const Distribution& leaf_distribution(std::span<const double> row) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const auto f = static_cast<std::size_t>(nodes_[i].feature);
      if (f >= row.size())
        throw ValidationError("row has " + std::to_string(row.size()) +
                              " features, tree tests feature " + std::to_string(f));
      i = row[f] <= nodes_[i].threshold ? left_child(i) : right_child(i);
    }
    return nodes_[i].distribution;
  }

  int predict(std::span<const double> row) const { return argmax(leaf_distribution(row)); }

  std::vector<NodeHandle> internal_nodes() const {
    std::vector<NodeHandle> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (!nodes_[i].is_leaf()) out.push_back({i, revision_});
    return out;
  }

  // Every node is the root of a subtree; the list is in preorder.
  std::vector<NodeHandle> subtree_roots() const {
    std::vector<NodeHandle> out(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) out[i] = {i, revision_};
    return out;
  }

  DecisionTree subtree_at(NodeHandle h) const {
    check_handle(h);
    DecisionTree t;
    t.n_classes_ = n_classes_;
    t.nodes_.assign(nodes_.begin() + static_cast<std::ptrdiff_t>(h.index),
                    nodes_.begin() + static_cast<std::ptrdiff_t>(h.index + nodes_[h.index].size));
    return t;
  }

  // True when `a` is `b` or one of b's ancestors.
  bool contains(NodeHandle a, NodeHandle b) const {
    check_handle(a);
    check_handle(b);
    return a.index <= b.index && b.index < a.index + nodes_[a.index].size;
  }

  DecisionTree replace_subtree(NodeHandle h, const DecisionTree& replacement) const {
    check_handle(h);
    if (replacement.n_classes_ != n_classes_)
      throw ValidationError("replacement subtree has a different number of classes");
    const std::size_t old_size = nodes_[h.index].size;
    DecisionTree t;
    t.n_classes_ = n_classes_;
    t.nodes_.reserve(nodes_.size() - old_size + replacement.nodes_.size());
    t.nodes_.insert(t.nodes_.end(), nodes_.begin(), nodes_.begin() + static_cast<std::ptrdiff_t>(h.index));
    t.nodes_.insert(t.nodes_.end(), replacement.nodes_.begin(), replacement.nodes_.end());
    t.nodes_.insert(t.nodes_.end(), nodes_.begin() + static_cast<std::ptrdiff_t>(h.index + old_size),
                    nodes_.end());
    for (std::size_t a : ancestors(h.index))
      t.nodes_[a].size = t.nodes_[a].size - old_size + replacement.nodes_.size();
    return t;
  }

  // Exchanges two disjoint subtrees.
  DecisionTree swap_subtrees(NodeHandle a, NodeHandle b) const {
    if (contains(a, b) || contains(b, a))
      throw ValidationError("cannot swap nested subtrees");
    if (a.index > b.index) std::swap(a, b);
    const DecisionTree sa = subtree_at(a);
    const DecisionTree sb = subtree_at(b);
    // Replace the later one first so the earlier index stays valid.
    DecisionTree t = replace_subtree(b, sa);
    return t.replace_subtree(NodeHandle{a.index, t.revision_}, sb);
  }

  DecisionTree with_threshold(NodeHandle h, double threshold) const {
    check_handle(h);
    if (nodes_[h.index].is_leaf()) throw ValidationError("cannot set the threshold of a leaf");
    if (!std::isfinite(threshold)) throw ValidationError("split threshold must be finite");
    DecisionTree t = *this;
    t.revision_ = next_revision();
    t.nodes_[h.index].threshold = threshold;
    return t;
  }

  // Structural equality; revisions are ignored.
  friend bool operator==(const DecisionTree& a, const DecisionTree& b) {
    return a.n_classes_ == b.n_classes_ && a.nodes_ == b.nodes_;
  }

  // Calls fn(index, depth) for every node in preorder.
  template <typename Fn>
  void walk(Fn&& fn) const {
    if (nodes_.empty()) return;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      fn(i, d);
      if (!nodes_[i].is_leaf()) {
        stack.emplace_back(right_child(i), d + 1);
        stack.emplace_back(left_child(i), d + 1);
      }
    }
  }

  // Full invariant check (binary structure, sizes, distributions).
  void validate() const {
    if (nodes_.empty()) throw ValidationError("tree has no nodes");
    std::size_t end = check_subtree(0);
    if (end != nodes_.size()) throw ValidationError("tree has trailing nodes");
  }

 private:
  DecisionTree() : revision_(next_revision()) {}

  static std::uint64_t next_revision() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
  }

  void check_handle(NodeHandle h) const {
    if (h.revision != revision_) throw ValidationError("stale node handle");
    if (h.index >= nodes_.size()) throw ValidationError("node handle out of range");
  }

  // Indices of the proper ancestors of node `index`, root first.
  std::vector<std::size_t> ancestors(std::size_t index) const {
    std::vector<std::size_t> path;
    std::size_t i = 0;
    while (i != index) {
      path.push_back(i);
      const std::size_t l = left_child(i);
      i = index < l + nodes_[l].size ? l : l + nodes_[l].size;
    }
    return path;
  }

  std::size_t check_subtree(std::size_t i) const {
    if (i >= nodes_.size()) throw ValidationError("tree structure truncated");
    const auto& n = nodes_[i];
    if (n.is_leaf()) {
      if (n.size != 1) throw ValidationError("leaf with nonzero subtree size");
      if (n.distribution.size() != n_classes_)
        throw ValidationError("leaf distribution has the wrong number of classes");
      check_distribution(n.distribution);
      return i + 1;
    }
    if (!n.distribution.empty()) throw ValidationError("internal node carries a distribution");
    if (!std::isfinite(n.threshold)) throw ValidationError("non-finite threshold");
    const std::size_t mid = check_subtree(i + 1);
    const std::size_t end = check_subtree(mid);
    if (end - i != n.size) throw ValidationError("subtree size mismatch");
    return end;
  }

  std::size_t n_classes_ = 0;
  std::vector<TreeNode> nodes_;
  std::uint64_t revision_ = 0;
};

inline std::size_t node_count(const DecisionTree& tree) { return tree.node_count(); }

inline int predict(const DecisionTree& tree, std::span<const double> row) { return tree.predict(row); }

inline double accuracy(const DecisionTree& tree, const Dataset& data, std::span<const Index> indices) {
  if (indices.empty()) throw ValidationError("accuracy needs a non-empty index list");
  std::size_t hits = 0;
  for (Index i : indices)
    if (tree.predict(data.row(i)) == data.label(i)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(indices.size());
}

inline std::vector<NodeHandle> list_internal_nodes(const DecisionTree& tree) { return tree.internal_nodes(); }
inline std::vector<NodeHandle> list_subtree_roots(const DecisionTree& tree) { return tree.subtree_roots(); }
inline DecisionTree replace_subtree(const DecisionTree& tree, NodeHandle h, const DecisionTree& s) {
  return tree.replace_subtree(h, s);
}

}  // namespace genesim
