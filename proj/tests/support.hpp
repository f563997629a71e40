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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "hkg/autodiff.hpp"
#include "hkg/hierarchy.hpp"
#include "hkg/rng.hpp"

namespace hkg::testing {

inline std::filesystem::path source_dir() { return HKG_SOURCE_DIR; }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hkg-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Random rooted tree with between 2 and max_classes non-root nodes and at
/// least two leaves.
inline hierarchy::LabelTree random_tree(Rng& rng, std::size_t max_classes) {
  for (;;) {
    const std::size_t c = 2 + rng.below(max_classes - 1);
    std::vector<hierarchy::NodeSpec> spec{{"root", std::nullopt}};
    for (std::size_t i = 0; i < c; ++i) {
      const std::size_t parent = rng.below(i + 1);  // 0 is the root
      spec.push_back({"n" + std::to_string(i), parent == 0 ? "root" : "n" + std::to_string(parent - 1)});
    }
    std::vector<bool> has_child(c + 1, false);
    for (std::size_t i = 1; i < spec.size(); ++i) {
      const auto& p = *spec[i].parent;
      has_child[p == "root" ? 0 : std::stoul(p.substr(1)) + 1] = true;
    }
    std::size_t leaves = 0;
    for (std::size_t i = 1; i <= c; ++i) leaves += has_child[i] ? 0 : 1;
    if (leaves >= 2) return hierarchy::LabelTree::build(spec);
  }
}

/// Training labels with between 1 and 50 samples for every leaf.
inline std::vector<std::size_t> random_labels(Rng& rng, const hierarchy::LabelTree& tree) {
  std::vector<std::size_t> labels;
  for (auto leaf : tree.leaves()) labels.insert(labels.end(), 1 + rng.below(50), leaf);
  return labels;
}

inline ad::Tensor random_tensor(Rng& rng, ad::Shape shape, double lo = -1.0, double hi = 1.0) {
  ad::Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

/// Largest relative error between the tape gradient and central finite
/// differences of a scalar function over every input element.
/// rel = |a - n| / max(|a|, |n|, 1e-6) is taken per element.
inline double gradient_error(std::vector<ad::Tensor> inputs,
                             const std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>& f,
                             double h = 1e-5) {
  std::vector<ad::Tensor> analytic;
  {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& t : inputs) vars.push_back(tape.variable(t));
    const ad::Var out = f(tape, vars);
    tape.backward(out);
    for (const auto& v : vars) analytic.push_back(v.grad());
  }
  auto eval = [&](const std::vector<ad::Tensor>& xs) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (const auto& t : xs) vars.push_back(tape.constant(t));
    return f(tape, vars).value()[0];
  };
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      auto plus = inputs;
      auto minus = inputs;
      plus[k][i] += h;
      minus[k][i] -= h;
      const double numeric = (eval(plus) - eval(minus)) / (2.0 * h);
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace hkg::testing
