#pragma once

// Decision spaces. A tree partitions feature space into axis-aligned boxes,
// one per reachable leaf. Two such partitions are merged by intersecting
// their boxes, and a merged partition is turned back into a tree by
// repeatedly cutting along hyperplanes that do not cross any box.
//
// Intervals are half-open, (lower, upper], which matches the tree's
// `x <= threshold goes left` test. Bounds may be infinite.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "genesim/error.hpp"
#include "genesim/random.hpp"
#include "genesim/tree.hpp"

namespace genesim {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Interval {
  double lower = -kInf;
  double upper = kInf;

  bool empty() const { return !(lower < upper); }
  bool contains(double x) const { return lower < x && x <= upper; }
  // the open-interior test; touching endpoints do not overlap
  bool overlaps(const Interval& o) const { return lower < o.upper && o.lower < upper; }
  Interval intersect(const Interval& o) const {
    return {std::max(lower, o.lower), std::min(upper, o.upper)};
  }

  friend bool operator==(const Interval&, const Interval&) = default;
  friend auto operator<=>(const Interval&, const Interval&) = default;
};

using Box = std::vector<Interval>;

inline Box unbounded_box(std::size_t k) { return Box(k); }

inline bool box_empty(const Box& b) {
  return std::any_of(b.begin(), b.end(), [](const Interval& i) { return i.empty(); });
}

inline bool box_contains(const Box& b, std::span<const double> point) {
  for (std::size_t d = 0; d < b.size(); ++d)
    if (!b[d].contains(point[d])) return false;
  return true;
}

inline bool boxes_overlap(const Box& a, const Box& b) {
  for (std::size_t d = 0; d < a.size(); ++d)
    if (!a[d].overlaps(b[d])) return false;
  return true;
}

inline Box intersect(const Box& a, const Box& b) {
  Box out(a.size());
  for (std::size_t d = 0; d < a.size(); ++d) out[d] = a[d].intersect(b[d]);
  return out;
}

struct Region {
  Box bounds;
  Distribution distribution;

  bool contains(std::span<const double> point) const { return box_contains(bounds, point); }

  friend bool operator==(const Region&, const Region&) = default;
};

// Lexicographic on bounds, then distribution.
inline bool canonical_less(const Region& a, const Region& b) {
  if (a.bounds != b.bounds)
    return std::lexicographical_compare(a.bounds.begin(), a.bounds.end(), b.bounds.begin(), b.bounds.end());
  return a.distribution < b.distribution;
}

struct RegionSet {
  std::size_t k = 0;
  Box domain;
  std::vector<Region> regions;

  void sort_canonical() { std::sort(regions.begin(), regions.end(), canonical_less); }

  // Regions containing `point` (a valid partition yields exactly one).
  std::vector<std::size_t> regions_containing(std::span<const double> point) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < regions.size(); ++i)
      if (regions[i].contains(point)) out.push_back(i);
    return out;
  }

  friend bool operator==(const RegionSet&, const RegionSet&) = default;
};

inline Distribution mean_distribution(const Distribution& a, const Distribution& b) {
  Distribution out(a.size());
  for (std::size_t c = 0; c < a.size(); ++c) out[c] = 0.5 * (a[c] + b[c]);
  return out;
}

// ---------------------------------------------------------------------------
// tree -> regions

// One region per reachable leaf. Leaves behind contradictory tests (their box
// has an empty interior) cannot be reached by any point and are dropped.
inline RegionSet tree_to_regions(const DecisionTree& tree, std::size_t k) {
  if (tree.max_feature() >= static_cast<int>(k))
    throw ValidationError("tree tests feature " + std::to_string(tree.max_feature()) +
                          " but the space has " + std::to_string(k) + " dimensions");
  RegionSet rs{k, unbounded_box(k), {}};
  std::vector<std::pair<std::size_t, Box>> stack{{0, unbounded_box(k)}};
  while (!stack.empty()) {
    auto [i, box] = std::move(stack.back());
    stack.pop_back();
    const auto& node = tree.node(i);
    if (node.is_leaf()) {
      rs.regions.push_back({std::move(box), node.distribution});
      continue;
    }
    const auto f = static_cast<std::size_t>(node.feature);
    Box right = box;
    right[f].lower = std::max(right[f].lower, node.threshold);
    box[f].upper = std::min(box[f].upper, node.threshold);
    if (!right[f].empty()) stack.emplace_back(tree.right_child(i), std::move(right));
    if (!box[f].empty()) stack.emplace_back(tree.left_child(i), std::move(box));
  }
  return rs;
}

// ---------------------------------------------------------------------------
// merging

namespace detail {

inline void check_mergeable(const RegionSet& a, const RegionSet& b) {
  if (a.k != b.k)
    throw ValidationError("cannot merge region sets of dimension " + std::to_string(a.k) + " and " +
                          std::to_string(b.k));
  if (!a.regions.empty() && !b.regions.empty() &&
      a.regions.front().distribution.size() != b.regions.front().distribution.size())
    throw ValidationError("cannot merge region sets over different class counts");
}

// Number of (a, b) pairs whose projections on dimension d overlap, without
// enumerating them: all pairs minus those with b entirely below or entirely
// above a. The two excluded groups are disjoint because intervals are
// nonempty.
inline std::size_t count_overlaps(const std::vector<Region>& a, const std::vector<Region>& b, std::size_t d) {
  std::vector<double> b_upper(b.size()), b_lower(b.size());
  for (std::size_t j = 0; j < b.size(); ++j) {
    b_upper[j] = b[j].bounds[d].upper;
    b_lower[j] = b[j].bounds[d].lower;
  }
  std::sort(b_upper.begin(), b_upper.end());
  std::sort(b_lower.begin(), b_lower.end());
  std::size_t total = a.size() * b.size();
  for (const auto& r : a) {
    const auto& iv = r.bounds[d];
    const auto below = static_cast<std::size_t>(std::upper_bound(b_upper.begin(), b_upper.end(), iv.lower) - b_upper.begin());
    const auto above = static_cast<std::size_t>(b_lower.end() - std::lower_bound(b_lower.begin(), b_lower.end(), iv.upper));
    total -= below + above;
  }
  return total;
}

// Sweep along dimension d over the projected intervals of both sets and call
// emit(i, j) for every pair whose projections overlap. Cost is
// O(n log n + pairs reported).
template <typename Emit>
void sweep_overlaps(const std::vector<Region>& a, const std::vector<Region>& b, std::size_t d, Emit&& emit) {
  struct Event {
    double x;
    int kind;  // 0 = end, 1 = start; ends first so touching intervals never pair
    int side;  // 0 = a, 1 = b
    std::size_t id;
  };
  std::vector<Event> events;
  events.reserve(2 * (a.size() + b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    events.push_back({a[i].bounds[d].lower, 1, 0, i});
    events.push_back({a[i].bounds[d].upper, 0, 0, i});
  }
  for (std::size_t j = 0; j < b.size(); ++j) {
    events.push_back({b[j].bounds[d].lower, 1, 1, j});
    events.push_back({b[j].bounds[d].upper, 0, 1, j});
  }
  std::sort(events.begin(), events.end(), [](const Event& l, const Event& r) {
    return std::tie(l.x, l.kind, l.side, l.id) < std::tie(r.x, r.kind, r.side, r.id);
  });

  // active sets with O(1) removal
  std::vector<std::size_t> active[2];
  std::vector<std::size_t> slot[2] = {std::vector<std::size_t>(a.size()), std::vector<std::size_t>(b.size())};
  for (const auto& e : events) {
    auto& mine = active[e.side];
    if (e.kind == 1) {
      for (std::size_t other : active[1 - e.side]) {
        if (e.side == 0)
          emit(e.id, other);
        else
          emit(other, e.id);
      }
      slot[e.side][e.id] = mine.size();
      mine.push_back(e.id);
    } else {
      const std::size_t pos = slot[e.side][e.id];
      const std::size_t last = mine.back();
      mine[pos] = last;
      slot[e.side][last] = pos;
      mine.pop_back();
    }
  }
}

}  // namespace detail

// Intersection of two decision spaces. Candidate pairs come from a sweep along
// the most selective dimension (fewest overlapping projections, counted in
// O(k n log n)); each candidate is then checked on the remaining dimensions.
// Every nonempty intersection carries the mean of its parents' distributions.
// Output is in canonical order.
inline RegionSet merge_regions(const RegionSet& a, const RegionSet& b) {
  detail::check_mergeable(a, b);
  RegionSet out{a.k, intersect(a.domain, b.domain), {}};
  if (a.regions.empty() || b.regions.empty() || box_empty(out.domain)) return out;

  std::size_t sweep_dim = 0;
  if (a.k > 1) {
    std::size_t fewest = std::numeric_limits<std::size_t>::max();
    for (std::size_t d = 0; d < a.k; ++d) {
      const std::size_t c = detail::count_overlaps(a.regions, b.regions, d);
      if (c < fewest) {
        fewest = c;
        sweep_dim = d;
      }
    }
    out.regions.reserve(fewest);
  }

  if (a.k == 0) {
    for (const auto& ra : a.regions)
      for (const auto& rb : b.regions) out.regions.push_back({{}, mean_distribution(ra.distribution, rb.distribution)});
  } else {
    detail::sweep_overlaps(a.regions, b.regions, sweep_dim, [&](std::size_t i, std::size_t j) {
      const auto& ra = a.regions[i];
      const auto& rb = b.regions[j];
      for (std::size_t d = 0; d < a.k; ++d)
        if (d != sweep_dim && !ra.bounds[d].overlaps(rb.bounds[d])) return;
      out.regions.push_back({intersect(ra.bounds, rb.bounds), mean_distribution(ra.distribution, rb.distribution)});
    });
  }
  out.sort_canonical();
  return out;
}

// All-pairs intersection; reference for merge_regions.
inline RegionSet naive_merge(const RegionSet& a, const RegionSet& b) {
  detail::check_mergeable(a, b);
  RegionSet out{a.k, intersect(a.domain, b.domain), {}};
  if (box_empty(out.domain)) return out;
  for (const auto& ra : a.regions)
    for (const auto& rb : b.regions)
      if (boxes_overlap(ra.bounds, rb.bounds))
        out.regions.push_back({intersect(ra.bounds, rb.bounds), mean_distribution(ra.distribution, rb.distribution)});
  out.sort_canonical();
  return out;
}

// ---------------------------------------------------------------------------
// regions -> tree

struct CandidateSplit {
  std::size_t dimension;
  double value;

  friend bool operator==(const CandidateSplit&, const CandidateSplit&) = default;
  friend auto operator<=>(const CandidateSplit&, const CandidateSplit&) = default;
};

namespace detail {

inline std::vector<Region> clip_regions(const std::vector<Region>& regions, const Box& box) {
  std::vector<Region> out;
  for (const auto& r : regions) {
    Box clipped = intersect(r.bounds, box);
    if (!box_empty(clipped)) out.push_back({std::move(clipped), r.distribution});
  }
  return out;
}

// For each finite facet coordinate strictly inside `box` on dimension d,
// the number of regions whose interior the hyperplane x_d = v crosses.
inline std::vector<std::pair<double, std::size_t>> facet_cut_counts(const std::vector<Region>& regions,
                                                                    const Box& box, std::size_t d) {
  std::vector<double> values;
  for (const auto& r : regions)
    for (double v : {r.bounds[d].lower, r.bounds[d].upper})
      if (std::isfinite(v) && box[d].lower < v && v < box[d].upper) values.push_back(v);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  if (values.empty()) return {};

  // difference array over the sorted facet values
  std::vector<long> diff(values.size() + 1, 0);
  for (const auto& r : regions) {
    const auto& iv = r.bounds[d];
    const auto first = std::upper_bound(values.begin(), values.end(), iv.lower) - values.begin();
    const auto last = std::lower_bound(values.begin(), values.end(), iv.upper) - values.begin();
    if (first < last) {
      ++diff[static_cast<std::size_t>(first)];
      --diff[static_cast<std::size_t>(last)];
    }
  }
  std::vector<std::pair<double, std::size_t>> out(values.size());
  long running = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    running += diff[i];
    out[i] = {values[i], static_cast<std::size_t>(running)};
  }
  return out;
}

inline std::vector<CandidateSplit> clean_splits(const std::vector<Region>& clipped, const Box& box) {
  std::vector<CandidateSplit> out;
  for (std::size_t d = 0; d < box.size(); ++d)
    for (const auto& [v, cuts] : facet_cut_counts(clipped, box, d))
      if (cuts == 0) out.push_back({d, v});
  return out;
}

}  // namespace detail

// Hyperplanes x_d = v, taken from facets of the regions clipped to `box`,
// that lie strictly inside the box and do not cross any clipped region. Such
// a plane spans the whole cross-section of the box. Sorted by (d, v).
inline std::vector<CandidateSplit> find_candidate_splits(const RegionSet& rs, const Box& box) {
  if (box.size() != rs.k) throw ValidationError("box dimension does not match region set");
  return detail::clean_splits(detail::clip_regions(rs.regions, box), box);
}

struct ReconstructionStats {
  std::size_t clean_splits = 0;
  std::size_t fallback_splits = 0;
  std::size_t regions_cut = 0;  // regions divided by fallback splits
};

namespace detail {

class Reconstructor {
 public:
  Reconstructor(Rng& rng, ReconstructionStats& stats) : rng_(rng), stats_(stats) {}

  DecisionTree build(std::vector<Region> regions, const Box& box) {
    if (is_leaf(regions)) return DecisionTree::leaf(mean_of(regions));

    CandidateSplit split{};
    auto candidates = clean_splits(regions, box);
    if (!candidates.empty()) {
      split = candidates[uniform_index(rng_, candidates.size())];
      ++stats_.clean_splits;
    } else {
      split = least_cutting(regions, box);
      ++stats_.fallback_splits;
    }

    const std::size_t d = split.dimension;
    const double v = split.value;
    std::vector<Region> left, right;
    for (auto& r : regions) {
      auto& iv = r.bounds[d];
      if (iv.upper <= v) {
        left.push_back(std::move(r));
      } else if (iv.lower >= v) {
        right.push_back(std::move(r));
      } else {
        Region upper_part = r;
        upper_part.bounds[d].lower = v;
        iv.upper = v;
        left.push_back(std::move(r));
        right.push_back(std::move(upper_part));
        ++stats_.regions_cut;
      }
    }
    regions.clear();
    regions.shrink_to_fit();
    // Only reachable when the regions fail to cover the box.
    if (left.empty() || right.empty()) return DecisionTree::leaf(mean_of(left.empty() ? right : left));

    Box left_box = box, right_box = box;
    left_box[d].upper = v;
    right_box[d].lower = v;
    DecisionTree l = build(std::move(left), left_box);
    DecisionTree r = build(std::move(right), right_box);
    return DecisionTree::split(static_cast<int>(d), v, l, r);
  }

 private:
  static bool is_leaf(const std::vector<Region>& regions) {
    if (regions.size() <= 1) return true;
    const int first = argmax(regions.front().distribution);
    return std::all_of(regions.begin() + 1, regions.end(),
                       [first](const Region& r) { return argmax(r.distribution) == first; });
  }

  static Distribution mean_of(const std::vector<Region>& regions) {
    Distribution p(regions.front().distribution.size(), 0.0);
    for (const auto& r : regions)
      for (std::size_t c = 0; c < p.size(); ++c) p[c] += r.distribution[c];
    const double inv = 1.0 / static_cast<double>(regions.size());
    double sum = 0.0;
    for (double& v : p) sum += (v *= inv);
    for (double& v : p) v /= sum;
    return p;
  }

  // The facet that crosses the fewest regions; ties go to the lowest (d, v).
  static CandidateSplit least_cutting(const std::vector<Region>& regions, const Box& box) {
    std::optional<CandidateSplit> best;
    std::size_t fewest = std::numeric_limits<std::size_t>::max();
    for (std::size_t d = 0; d < box.size(); ++d)
      for (const auto& [v, cuts] : facet_cut_counts(regions, box, d))
        if (cuts < fewest) {
          fewest = cuts;
          best = CandidateSplit{d, v};
        }
    if (!best) throw ValidationError("regions have no facet inside the box to split on");
    return *best;
  }

  Rng& rng_;
  ReconstructionStats& stats_;
};

}  // namespace detail

// Rebuilds a tree over rs.domain. Stops when every remaining region predicts
// the same class (or one region is left) and emits the unweighted mean of
// their distributions. Clean candidate splits are chosen uniformly at random;
// when none exists the least-cutting facet is used and the regions it crosses
// are divided.
inline DecisionTree regions_to_tree(const RegionSet& rs, Rng& rng, ReconstructionStats* stats = nullptr) {
  if (rs.regions.empty()) throw ValidationError("cannot build a tree from an empty region set");
  ReconstructionStats local;
  detail::Reconstructor builder(rng, stats ? *stats : local);
  return builder.build(detail::clip_regions(rs.regions, rs.domain), rs.domain);
}

// ---------------------------------------------------------------------------
// JSON dump. Infinite bounds are written as the strings "-inf" / "inf".

namespace detail {

inline nlohmann::json bound_to_json(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  return v;
}

inline double bound_from_json(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j == "inf") return kInf;
  if (j == "-inf") return -kInf;
  throw ParseError("bound must be a number, \"inf\" or \"-inf\"");
}

inline nlohmann::json box_to_json(const Box& box) {
  auto out = nlohmann::json::array();
  for (const auto& iv : box) out.push_back({bound_to_json(iv.lower), bound_to_json(iv.upper)});
  return out;
}

inline Box box_from_json(const nlohmann::json& j, std::size_t k) {
  if (!j.is_array() || j.size() != k) throw ParseError("box must be an array of " + std::to_string(k) + " intervals");
  Box box;
  for (const auto& iv : j) {
    if (!iv.is_array() || iv.size() != 2) throw ParseError("interval must be a [lower, upper] pair");
    box.push_back({bound_from_json(iv[0]), bound_from_json(iv[1])});
  }
  return box;
}

}  // namespace detail

inline nlohmann::json region_set_to_json(const RegionSet& rs) {
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& r : rs.regions)
    regions.push_back({{"bounds", detail::box_to_json(r.bounds)}, {"distribution", r.distribution}});
  return {{"k", rs.k}, {"domain", detail::box_to_json(rs.domain)}, {"regions", std::move(regions)}};
}

inline RegionSet region_set_from_json(const nlohmann::json& j) {
  try {
    RegionSet rs;
    rs.k = j.at("k").get<std::size_t>();
    rs.domain = detail::box_from_json(j.at("domain"), rs.k);
    for (const auto& r : j.at("regions"))
      rs.regions.push_back({detail::box_from_json(r.at("bounds"), rs.k), r.at("distribution").get<Distribution>()});
    return rs;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("region set: ") + e.what());
  }
}

}  // namespace genesim
