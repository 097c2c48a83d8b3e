#pragma once

// JSON tree format, version 1:
//
//   {"format": 1, "n_classes": 2,
//    "root": {"feature": 0, "threshold": 5.0,
//             "left":  {"distribution": [0.9, 0.1]},
//             "right": {"distribution": [0.2, 0.8]}}}
//
// Internal nodes route `x[feature] <= threshold` to "left".

#include <string>

#include <nlohmann/json.hpp>

#include "genesim/error.hpp"
#include "genesim/tree.hpp"

namespace genesim {

inline constexpr int kTreeFormatVersion = 1;

namespace detail {

inline nlohmann::json node_to_json(const DecisionTree& tree, std::size_t i) {
  const auto& n = tree.node(i);
  if (n.is_leaf()) return {{"distribution", n.distribution}};
  return {{"feature", n.feature},
          {"threshold", n.threshold},
          {"left", node_to_json(tree, tree.left_child(i))},
          {"right", node_to_json(tree, tree.right_child(i))}};
}

inline std::size_t node_from_json(const nlohmann::json& j, std::vector<TreeNode>& out,
                                  std::size_t depth) {
  if (depth > 10000) throw ParseError("tree nesting too deep");
  if (!j.is_object()) throw ParseError("tree node must be an object");
  const std::size_t self = out.size();
  if (j.contains("distribution")) {
    const auto& d = j["distribution"];
    if (!d.is_array()) throw ParseError("'distribution' must be an array");
    TreeNode leaf;
    for (const auto& v : d) {
      if (!v.is_number()) throw ParseError("distribution entries must be numbers");
      leaf.distribution.push_back(v.get<double>());
    }
    out.push_back(std::move(leaf));
    return 1;
  }
  for (const char* key : {"feature", "threshold", "left", "right"})
    if (!j.contains(key)) throw ParseError(std::string("internal node missing '") + key + "'");
  if (!j["feature"].is_number_integer() || j["feature"].get<long long>() < 0)
    throw ParseError("'feature' must be a non-negative integer");
  if (!j["threshold"].is_number()) throw ParseError("'threshold' must be a number");
  out.push_back(TreeNode{static_cast<int>(j["feature"].get<long long>()), j["threshold"].get<double>(), 1, {}});
  std::size_t size = 1;
  size += node_from_json(j["left"], out, depth + 1);
  size += node_from_json(j["right"], out, depth + 1);
  out[self].size = size;
  return size;
}

}  // namespace detail

inline nlohmann::json tree_to_json(const DecisionTree& tree) {
  return {{"format", kTreeFormatVersion},
          {"n_classes", tree.n_classes()},
          {"root", detail::node_to_json(tree, 0)}};
}

inline DecisionTree tree_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("tree document must be an object");
  if (!doc.contains("format") || doc["format"] != kTreeFormatVersion)
    throw ParseError("unsupported or missing tree format version");
  if (!doc.contains("n_classes") || !doc["n_classes"].is_number_unsigned())
    throw ParseError("'n_classes' must be a non-negative integer");
  if (!doc.contains("root")) throw ParseError("tree document missing 'root'");
  std::vector<TreeNode> nodes;
  detail::node_from_json(doc["root"], nodes, 0);
  try {
    return DecisionTree::from_nodes(doc["n_classes"].get<std::size_t>(), std::move(nodes));
  } catch (const ValidationError& e) {
    throw ParseError(std::string("invalid tree: ") + e.what());
  }
}

inline std::string serialize(const DecisionTree& tree, int indent = -1) {
  return tree_to_json(tree).dump(indent);
}

inline DecisionTree deserialize(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what());
  }
  return tree_from_json(doc);
}

}  // namespace genesim
