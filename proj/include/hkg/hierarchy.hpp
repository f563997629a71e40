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

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hkg/matrix.hpp"

namespace hkg::hierarchy {

/// One line of a manual tree description.
struct NodeSpec {
  std::string name;
  std::optional<std::string> parent;  // empty for the root
};

/// Rooted class hierarchy. The class set is every node except the root,
/// indexed 0..C-1 in breadth-first order (children in declaration order).
/// All matrices and label vectors use that class index.
class LabelTree {
 public:
  static LabelTree build(const std::vector<NodeSpec>& spec);

  /// JSON array of {"name": ..., "parent": ... | null}.
  static LabelTree from_json_file(const std::filesystem::path& path);
  static LabelTree from_json_text(std::string_view text);

  std::size_t class_count() const noexcept { return names_.size(); }

  /// Number of levels including the root.
  std::size_t height() const noexcept { return height_; }

  const std::string& root_name() const noexcept { return root_name_; }
  const std::vector<std::string>& node_order() const noexcept { return names_; }
  const std::string& name(std::size_t cls) const { return names_.at(cls); }

  /// Parent class index, or nullopt when the parent is the root.
  std::optional<std::size_t> parent(std::size_t cls) const { return parents_.at(cls); }
  const std::vector<std::size_t>& children(std::size_t cls) const { return children_.at(cls); }
  bool is_leaf(std::size_t cls) const { return children_.at(cls).empty(); }

  /// Depth below the root (top-level classes have depth 1).
  std::size_t depth(std::size_t cls) const { return depths_.at(cls); }

  /// Same parent (the root counts as a parent).
  bool are_siblings(std::size_t a, std::size_t b) const;

  /// Leaf class indices in node order.
  std::vector<std::size_t> leaves() const;

  /// Class index for a name; throws LabelError when unknown.
  std::size_t index_of(std::string_view name) const;
  std::optional<std::size_t> find(std::string_view name) const;

  /// Index of a leaf class; throws LabelError for internal or unknown names.
  std::size_t leaf_index(std::string_view name) const;

  /// Specification in node order, root first.
  std::vector<NodeSpec> to_spec() const;
  std::string to_json() const;

  bool operator==(const LabelTree&) const = default;

 private:
  std::string root_name_;
  std::vector<std::string> names_;
  std::vector<std::optional<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> depths_;
  std::size_t height_ = 0;
};

/// Per-class sample counts; internal nodes hold the sum over their leaves.
struct ClassCounts {
  std::vector<std::uint64_t> counts;  // indexed by class
};

/// Counts leaf labels (class indices) and propagates them to ancestors.
ClassCounts count_classes(const LabelTree& tree, const std::vector<std::size_t>& train_labels);

/// A_ij = S_i / (S_i + S_j) off the diagonal, A_ii = 1.
Matrix build_scm(const ClassCounts& counts);

/// Phi: 1 on the diagonal, 0 between siblings, 1 / A_ij at (child, parent),
/// 1 everywhere else.
Matrix build_transition(const LabelTree& tree, const Matrix& scm);

/// Elementwise product A (.) Phi.
Matrix build_hkcm(const Matrix& scm, const Matrix& transition);

/// 1 where hkcm >= tau, else 0. tau must lie in (0, 1].
Matrix binarize(const Matrix& hkcm, double tau);

/// Off-diagonal eta * B_ij / (sum_j B_ij + c) (row sum includes the
/// diagonal), diagonal 1 - eta.
Matrix reweight(const Matrix& bhkcm, double eta, double c);

/// Multi-hot vector: 1 at the leaf and each non-root ancestor.
std::vector<double> label_vector(const LabelTree& tree, std::size_t leaf);

inline constexpr double kDefaultTau = 0.3;
inline constexpr double kDefaultEta = 0.4;
inline constexpr double kDefaultSmoothing = 1e-6;

/// The chained matrices of one configuration. Immutable after build().
struct MatrixPipeline {
  Matrix scm;
  Matrix transition;
  Matrix hkcm;
  Matrix bhkcm;
  Matrix rehkcm;
  double tau = kDefaultTau;
  double eta = kDefaultEta;
  double c = kDefaultSmoothing;
  std::vector<std::string> node_order;

  static MatrixPipeline build(const LabelTree& tree, const ClassCounts& counts, double tau = kDefaultTau,
                              double eta = kDefaultEta, double c = kDefaultSmoothing);

  /// Human-readable descriptions of violated structural invariants; empty
  /// when every check holds.
  std::vector<std::string> check_invariants(const LabelTree& tree) const;

  /// Writes scm.csv, transition.csv, hkcm.csv, bhkcm.csv, rehkcm.csv.
  void write_csv(const std::filesystem::path& dir) const;
};

/// CSV with the node order as header row and shortest round-trip decimals.
void write_matrix_csv(const std::filesystem::path& path, const Matrix& m, const std::vector<std::string>& header);

}  // namespace hkg::hierarchy
