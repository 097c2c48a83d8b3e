#pragma once

// Test-only generators and oracles.

#include <sstream>
#include <string>
#include <vector>

#include "genesim/genesim.hpp"

namespace genesim::testing {

inline std::string data_path(const std::string& file) { return std::string(GENESIM_DATA_DIR) + "/" + file; }

inline Dataset iris() { return load_csv(data_path("iris.csv"), "species"); }
inline Dataset breast() { return load_csv(data_path("breast.csv"), "class"); }

inline Dataset from_csv_text(const std::string& text, const std::string& label) {
  std::istringstream in(text);
  return read_csv(in, label);
}

inline Distribution random_distribution(Rng& rng, std::size_t n_classes) {
  Distribution p(n_classes);
  double sum = 0.0;
  for (auto& v : p) sum += (v = 0.05 + uniform_unit(rng));
  for (auto& v : p) v /= sum;
  return p;
}

// Thresholds come from a small integer grid so that facets of different
// trees coincide exactly and sampled points land on boundaries.
inline DecisionTree random_tree(Rng& rng, std::size_t k, std::size_t max_depth, std::size_t n_classes,
                                double stop_probability = 0.25, int grid = 4) {
  if (max_depth == 0 || uniform_unit(rng) < stop_probability)
    return DecisionTree::leaf(random_distribution(rng, n_classes));
  const int f = static_cast<int>(uniform_index(rng, k));
  const double t = static_cast<double>(static_cast<int>(uniform_index(rng, 2 * grid + 1)) - grid);
  auto left = random_tree(rng, k, max_depth - 1, n_classes, stop_probability, grid);
  auto right = random_tree(rng, k, max_depth - 1, n_classes, stop_probability, grid);
  return DecisionTree::split(f, t, left, right);
}

// Points mixing grid values (exact boundary hits), half-grid values and
// uniform reals, within [-grid - 1, grid + 1].
inline std::vector<double> random_point(Rng& rng, std::size_t k, int grid = 4) {
  std::vector<double> x(k);
  for (auto& v : x) {
    const double u = uniform_unit(rng);
    const double span = 2.0 * grid + 2.0;
    if (u < 0.3)
      v = static_cast<double>(static_cast<int>(uniform_index(rng, 2 * grid + 3)) - grid - 1);
    else if (u < 0.5)
      v = static_cast<double>(static_cast<int>(uniform_index(rng, 2 * grid + 2)) - grid - 1) + 0.5;
    else
      v = -grid - 1.0 + span * uniform_unit(rng);
  }
  return x;
}

// A partition of R^k into a random number of regions in [1, max_regions],
// made by repeatedly cutting a random cell at an integer in [-grid, grid].
// Stops early when no cell can be cut further.
inline RegionSet random_partition(Rng& rng, std::size_t k, std::size_t max_regions, std::size_t n_classes,
                                  int grid = 8) {
  const std::size_t target = 1 + uniform_index(rng, max_regions);
  std::vector<Box> cells{unbounded_box(k)};
  for (std::size_t attempt = 0; cells.size() < target && attempt < 50 * target; ++attempt) {
    const std::size_t c = uniform_index(rng, cells.size());
    const std::size_t d = uniform_index(rng, k);
    std::vector<double> inside;
    for (int v = -grid; v <= grid; ++v)
      if (cells[c][d].lower < v && v < cells[c][d].upper) inside.push_back(v);
    if (inside.empty()) continue;
    const double v = inside[uniform_index(rng, inside.size())];
    Box upper = cells[c];
    upper[d].lower = v;
    cells[c][d].upper = v;
    cells.push_back(std::move(upper));
  }
  RegionSet rs{k, unbounded_box(k), {}};
  for (auto& b : cells) rs.regions.push_back({std::move(b), random_distribution(rng, n_classes)});
  return rs;
}

// Distribution at `point` for a region set, or nullopt when the point is not
// covered by exactly one region.
inline std::optional<Distribution> distribution_at(const RegionSet& rs, std::span<const double> point) {
  const auto hits = rs.regions_containing(point);
  if (hits.size() != 1) return std::nullopt;
  return rs.regions[hits.front()].distribution;
}

}  // namespace genesim::testing
