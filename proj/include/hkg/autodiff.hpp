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
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace hkg::ad {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major array of doubles with a shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  void fill(double v);

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

/// A trainable tensor. grad accumulates across backward passes until
/// zero_grad().
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value) : name(std::move(name)), value(std::move(value)), grad(this->value.shape()) {}

  void zero_grad() { grad.fill(0.0); }

  std::string name;
  Tensor value;
  Tensor grad;
};

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape
/// lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  /// Gradient of the last backward() root with respect to this node; a
  /// zero tensor when the node does not require gradients.
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of a computation. Nodes are appended in
/// evaluation order, which is also a valid topological order, so backward()
/// walks them in reverse. Single-threaded.
class Tape {
 public:
  /// Propagates the gradient stored at `self` into its inputs.
  using BackwardFn = std::function<void(Tape& tape, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// A leaf that receives a gradient (used by gradient checks).
  Var variable(Tensor value);
  /// A leaf bound to a parameter; backward() adds into parameter.grad.
  Var parameter(Parameter& p);

  /// Seeds d(root)/d(root) = 1 and accumulates gradients into every node
  /// that requires them. The root must hold a single element.
  void backward(Var root);

  // Interface for primitive implementations.
  Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  /// Gradient buffer of a node, allocated (zero) on first use.
  Tensor& grad(std::size_t id);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Parameter* parameter = nullptr;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  Tensor empty_grad_;

  friend class Var;
};

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// Primitives. Each checks shapes and throws ShapeError naming both shapes.

/// [m,k] x [k,n] -> [m,n]
Var matmul(Var a, Var b);
/// 2-D transpose.
Var transpose(Var a);
/// Elementwise sum of equal shapes.
Var add(Var a, Var b);
/// Elementwise product of equal shapes.
Var hadamard(Var a, Var b);
/// Multiplication by a constant.
Var scale(Var a, double factor);
Var leaky_relu(Var x, double slope);
Var sigmoid(Var x);
/// Mean of all elements -> shape {1}.
Var mean(Var x);
/// x [B,Cin,H,W], weight [Cout,Cin,K,K], bias [Cout] -> [B,Cout,Ho,Wo].
Var conv2d(Var x, Var weight, Var bias, Conv2dOptions options);
/// [B,C,H,W] -> [B,C], maximum over the spatial axes. Ties route the
/// gradient to the first maximal cell.
Var global_max_pool(Var x);
/// Mean binary cross-entropy of sigmoid(logits) against targets in [0,1]:
/// mean(max(y,0) - y*l + log(1 + exp(-|y|))). Returns shape {1}.
Var bce_with_logits(Var logits, const Tensor& targets);

}  // namespace hkg::ad
