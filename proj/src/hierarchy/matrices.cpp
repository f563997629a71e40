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

#include <cmath>
#include <fstream>
#include <sstream>

#include "hkg/error.hpp"
#include "hkg/hierarchy.hpp"
#include "hkg/util.hpp"

namespace hkg::hierarchy {

namespace {

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw ShapeError(std::string(what) + ": expected a square matrix, got " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()));
  }
}

}  // namespace

Matrix build_scm(const ClassCounts& counts) {
  const auto& s = counts.counts;
  const std::size_t c = s.size();
  Matrix a(c, c);
  for (std::size_t i = 0; i < c; ++i) {
    a(i, i) = 1.0;
    for (std::size_t j = i + 1; j < c; ++j) {
      const auto total = s[i] + s[j];
      if (total == 0) {
        throw DegenerateInputError("build_scm: classes " + std::to_string(i) + " and " + std::to_string(j) +
                                   " both have zero count");
      }
      // The larger share is >= 0.5, so 1 - larger is exact and the pair
      // sums to exactly 1.
      const bool i_larger = s[i] >= s[j];
      const double larger = static_cast<double>(i_larger ? s[i] : s[j]) / static_cast<double>(total);
      const double smaller = 1.0 - larger;
      a(i, j) = i_larger ? larger : smaller;
      a(j, i) = i_larger ? smaller : larger;
    }
  }
  return a;
}

Matrix build_transition(const LabelTree& tree, const Matrix& scm) {
  require_square(scm, "build_transition");
  const std::size_t c = tree.class_count();
  if (scm.rows() != c) throw ShapeError("build_transition: SCM size does not match the tree's class count");
  Matrix phi(c, c, 1.0);
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      if (i == j) continue;
      if (tree.are_siblings(i, j)) {
        phi(i, j) = 0.0;
      } else if (tree.parent(i) == j) {
        if (scm(i, j) == 0.0) {
          throw DivisionError("build_transition: A(" + tree.name(i) + ", " + tree.name(j) +
                              ") is zero on a child->parent edge");
        }
        phi(i, j) = 1.0 / scm(i, j);
      }
    }
  }
  return phi;
}

Matrix build_hkcm(const Matrix& scm, const Matrix& transition) {
  if (scm.rows() != transition.rows() || scm.cols() != transition.cols()) {
    throw ShapeError("build_hkcm: SCM is " + std::to_string(scm.rows()) + "x" + std::to_string(scm.cols()) +
                     " but the transition matrix is " + std::to_string(transition.rows()) + "x" +
                     std::to_string(transition.cols()));
  }
  Matrix out(scm.rows(), scm.cols());
  for (std::size_t i = 0; i < scm.rows(); ++i) {
    for (std::size_t j = 0; j < scm.cols(); ++j) {
      const double a = scm(i, j);
      const double phi = transition(i, j);
      // a * fl(1/a) can land one ulp away from 1; the exact product is 1.
      out(i, j) = (a != 0.0 && phi == 1.0 / a) ? 1.0 : a * phi;
    }
  }
  return out;
}

Matrix binarize(const Matrix& hkcm, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ParameterError("binarize: tau must lie in (0, 1], got " + format_double(tau));
  Matrix out(hkcm.rows(), hkcm.cols());
  for (std::size_t i = 0; i < hkcm.rows(); ++i)
    for (std::size_t j = 0; j < hkcm.cols(); ++j) out(i, j) = hkcm(i, j) >= tau ? 1.0 : 0.0;
  return out;
}

Matrix reweight(const Matrix& bhkcm, double eta, double c) {
  require_square(bhkcm, "reweight");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ParameterError("reweight: eta must lie in [0, 1], got " + format_double(eta));
  if (!(c >= 0.0) || !std::isfinite(c)) throw ParameterError("reweight: smoothing c must be >= 0, got " + format_double(c));
  const std::size_t n = bhkcm.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) row_sum += bhkcm(i, j);
    const double denom = row_sum + c;
    if (denom == 0.0) throw DivisionError("reweight: row " + std::to_string(i) + " is empty and c = 0");
    for (std::size_t j = 0; j < n; ++j) out(i, j) = i == j ? 1.0 - eta : eta * bhkcm(i, j) / denom;
  }
  return out;
}

std::vector<double> label_vector(const LabelTree& tree, std::size_t leaf) {
  if (leaf >= tree.class_count()) throw LabelError("label_vector: class index out of range");
  if (!tree.is_leaf(leaf)) throw LabelError("label_vector: '" + tree.name(leaf) + "' is not a leaf");
  std::vector<double> out(tree.class_count(), 0.0);
  for (std::optional<std::size_t> n = leaf; n; n = tree.parent(*n)) out[*n] = 1.0;
  return out;
}

MatrixPipeline MatrixPipeline::build(const LabelTree& tree, const ClassCounts& counts, double tau, double eta,
                                     double c) {
  if (counts.counts.size() != tree.class_count()) throw ShapeError("MatrixPipeline: counts do not match the tree");
  MatrixPipeline p;
  p.tau = tau;
  p.eta = eta;
  p.c = c;
  p.node_order = tree.node_order();
  p.scm = build_scm(counts);
  p.transition = build_transition(tree, p.scm);
  p.hkcm = build_hkcm(p.scm, p.transition);
  p.bhkcm = binarize(p.hkcm, tau);
  p.rehkcm = reweight(p.bhkcm, eta, c);
  return p;
}

std::vector<std::string> MatrixPipeline::check_invariants(const LabelTree& tree) const {
  std::vector<std::string> issues;
  const std::size_t n = tree.class_count();
  auto cell = [&](std::size_t i, std::size_t j) { return "(" + tree.name(i) + ", " + tree.name(j) + ")"; };
  for (const Matrix* m : {&scm, &transition, &hkcm, &bhkcm, &rehkcm})
    if (m->rows() != n || m->cols() != n) issues.push_back("matrix shape does not match class count");
  if (!issues.empty()) return issues;

  for (std::size_t i = 0; i < n; ++i) {
    if (scm(i, i) != 1.0) issues.push_back("SCM diagonal != 1 at " + cell(i, i));
    if (hkcm(i, i) != 1.0) issues.push_back("HKCM diagonal != 1 at " + cell(i, i));
    if (rehkcm(i, i) != 1.0 - eta) issues.push_back("Re-HKCM diagonal != 1 - eta at " + cell(i, i));
    double row_sum = 0.0, off_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row_sum += bhkcm(i, j);
      if (j != i) off_sum += rehkcm(i, j);
    }
    const double expected = eta * (row_sum - bhkcm(i, i)) / (row_sum + c);
    if (std::abs(off_sum - expected) > 1e-12) issues.push_back("Re-HKCM row-sum identity fails on row " + tree.name(i));
    for (std::size_t j = 0; j < n; ++j) {
      if (bhkcm(i, j) != 0.0 && bhkcm(i, j) != 1.0) issues.push_back("B-HKCM is not binary at " + cell(i, j));
      if (i == j) continue;
      if (scm(i, j) + scm(j, i) != 1.0) issues.push_back("SCM pair does not sum to 1 at " + cell(i, j));
      if (tree.are_siblings(i, j) && hkcm(i, j) != 0.0) issues.push_back("HKCM sibling entry != 0 at " + cell(i, j));
      if (tree.parent(i) == j && hkcm(i, j) != 1.0) issues.push_back("HKCM child->parent entry != 1 at " + cell(i, j));
    }
  }
  return issues;
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m, const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? "," : "") << format_double(m(i, j));
    out << '\n';
  }
}

void MatrixPipeline::write_csv(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_matrix_csv(dir / "scm.csv", scm, node_order);
  write_matrix_csv(dir / "transition.csv", transition, node_order);
  write_matrix_csv(dir / "hkcm.csv", hkcm, node_order);
  write_matrix_csv(dir / "bhkcm.csv", bhkcm, node_order);
  write_matrix_csv(dir / "rehkcm.csv", rehkcm, node_order);
}

}  // namespace hkg::hierarchy
