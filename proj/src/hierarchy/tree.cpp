// Copyright 2026 The HKG Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "hkg/error.hpp"
#include "hkg/hierarchy.hpp"

namespace hkg::hierarchy {

LabelTree LabelTree::build(const std::vector<NodeSpec>& spec) {
  if (spec.empty()) throw StructuralError("label tree: empty specification");

  std::map<std::string, std::size_t> by_name;
  std::optional<std::size_t> root;
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (spec[i].name.empty()) throw StructuralError("label tree: node " + std::to_string(i) + " has no name");
    if (!by_name.emplace(spec[i].name, i).second)
      throw StructuralError("label tree: duplicate name '" + spec[i].name + "'");
    if (!spec[i].parent) {
      if (root) {
        throw StructuralError("label tree: multiple roots ('" + spec[*root].name + "', '" + spec[i].name + "')");
      }
      root = i;
    }
  }
  if (!root) throw StructuralError("label tree: no root (every node has a parent, so the graph has a cycle)");

  std::vector<std::vector<std::size_t>> kids(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    if (!spec[i].parent) continue;
    const auto it = by_name.find(*spec[i].parent);
    if (it == by_name.end()) {
      throw StructuralError("label tree: '" + spec[i].name + "' names unknown parent '" + *spec[i].parent + "'");
    }
    if (it->second == i) throw StructuralError("label tree: '" + spec[i].name + "' is its own parent");
    kids[it->second].push_back(i);
  }

  // Breadth-first from the root; nodes not reached sit on a cycle.
  std::vector<std::size_t> order;
  std::vector<std::size_t> spec_depth(spec.size(), 0);
  std::deque<std::size_t> queue{*root};
  while (!queue.empty()) {
    const auto n = queue.front();
    queue.pop_front();
    order.push_back(n);
    for (auto k : kids[n]) {
      spec_depth[k] = spec_depth[n] + 1;
      queue.push_back(k);
    }
  }
  if (order.size() != spec.size()) {
    std::vector<bool> seen(spec.size(), false);
    for (auto n : order) seen[n] = true;
    for (std::size_t i = 0; i < spec.size(); ++i)
      if (!seen[i]) throw StructuralError("label tree: cycle through '" + spec[i].name + "'");
  }

  LabelTree tree;
  tree.root_name_ = spec[*root].name;
  std::vector<std::size_t> class_of(spec.size(), 0);
  for (std::size_t pos = 1; pos < order.size(); ++pos) class_of[order[pos]] = pos - 1;
  const std::size_t c = order.size() - 1;
  tree.names_.resize(c);
  tree.parents_.resize(c);
  tree.children_.resize(c);
  tree.depths_.resize(c);
  std::size_t max_depth = 0;
  for (std::size_t pos = 1; pos < order.size(); ++pos) {
    const auto n = order[pos];
    const auto cls = class_of[n];
    tree.names_[cls] = spec[n].name;
    const auto p = by_name.at(*spec[n].parent);
    if (p != *root) tree.parents_[cls] = class_of[p];
    for (auto k : kids[n]) tree.children_[cls].push_back(class_of[k]);
    tree.depths_[cls] = spec_depth[n];
    max_depth = std::max(max_depth, spec_depth[n]);
  }
  tree.height_ = max_depth + 1;
  if (tree.leaves().size() < 2) throw StructuralError("label tree: at least two leaf classes are required");
  return tree;
}

LabelTree LabelTree::from_json_text(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("label tree JSON: ") + e.what());
  }
  if (!doc.is_array()) throw FormatError("label tree JSON: expected an array of {name, parent}");
  std::vector<NodeSpec> spec;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("name") || !item["name"].is_string())
      throw FormatError("label tree JSON: every entry needs a string 'name'");
    NodeSpec node{item["name"].get<std::string>(), std::nullopt};
    if (item.contains("parent") && !item["parent"].is_null()) {
      if (!item["parent"].is_string()) throw FormatError("label tree JSON: 'parent' must be a string or null");
      node.parent = item["parent"].get<std::string>();
    }
    spec.push_back(std::move(node));
  }
  return build(spec);
}

LabelTree LabelTree::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open label tree " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

bool LabelTree::are_siblings(std::size_t a, std::size_t b) const {
  return a != b && parents_.at(a) == parents_.at(b);
}

std::vector<std::size_t> LabelTree::leaves() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (children_[i].empty()) out.push_back(i);
  return out;
}

std::optional<std::size_t> LabelTree::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  return std::nullopt;
}

std::size_t LabelTree::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw LabelError("unknown class '" + std::string(name) + "'");
}

std::size_t LabelTree::leaf_index(std::string_view name) const {
  const auto i = index_of(name);
  if (!is_leaf(i)) throw LabelError("class '" + std::string(name) + "' is not a leaf");
  return i;
}

std::vector<NodeSpec> LabelTree::to_spec() const {
  std::vector<NodeSpec> out{{root_name_, std::nullopt}};
  for (std::size_t i = 0; i < names_.size(); ++i)
    out.push_back({names_[i], parents_[i] ? names_[*parents_[i]] : root_name_});
  return out;
}

std::string LabelTree::to_json() const {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& n : to_spec()) {
    nlohmann::json item;
    item["name"] = n.name;
    item["parent"] = n.parent ? nlohmann::json(*n.parent) : nlohmann::json(nullptr);
    doc.push_back(item);
  }
  return doc.dump();
}

ClassCounts count_classes(const LabelTree& tree, const std::vector<std::size_t>& train_labels) {
  ClassCounts out{std::vector<std::uint64_t>(tree.class_count(), 0)};
  for (auto label : train_labels) {
    if (label >= tree.class_count()) throw LabelError("count_classes: class index " + std::to_string(label) + " out of range");
    if (!tree.is_leaf(label)) throw LabelError("count_classes: '" + tree.name(label) + "' is not a leaf");
    for (std::optional<std::size_t> n = label; n; n = tree.parent(*n)) ++out.counts[*n];
  }
  return out;
}

}  // namespace hkg::hierarchy
