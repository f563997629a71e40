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

#include <sstream>

#include "hkg/autodiff.hpp"
#include "hkg/error.hpp"

namespace hkg::ad {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_size(shape_)) {
    throw ShapeError("Tensor: " + std::to_string(values_.size()) + " values do not fit shape " + shape_string(shape_));
  }
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

const Tensor& Var::value() const { return tape_->value(id_); }

const Tensor& Var::grad() const {
  auto& node = tape_->nodes_.at(id_);
  if (!node.requires_grad) {
    tape_->empty_grad_ = Tensor(node.value.shape());
    return tape_->empty_grad_;
  }
  return tape_->grad(id_);
}

Var Tape::constant(Tensor value) {
  nodes_.push_back({std::move(value), {}, false, nullptr, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::variable(Tensor value) {
  nodes_.push_back({std::move(value), {}, true, nullptr, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::parameter(Parameter& p) {
  nodes_.push_back({p.value, {}, true, &p, {}});
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  bool needs = false;
  for (const auto& v : inputs) {
    if (&v.tape() != this) throw Error("Tape::record: input belongs to another tape");
    needs = needs || nodes_.at(v.id()).requires_grad;
  }
  nodes_.push_back({std::move(value), {}, needs, nullptr, needs ? std::move(fn) : BackwardFn{}});
  return {this, nodes_.size() - 1};
}

Tensor& Tape::grad(std::size_t id) {
  auto& node = nodes_.at(id);
  if (node.grad.size() != node.value.size() || node.grad.shape() != node.value.shape()) {
    node.grad = Tensor(node.value.shape());
  }
  return node.grad;
}

void Tape::backward(Var root) {
  if (&root.tape() != this) throw Error("Tape::backward: root belongs to another tape");
  if (root.value().size() != 1) {
    throw ShapeError("Tape::backward: root must hold one element, got shape " + shape_string(root.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[root.id()].requires_grad) return;
  grad(root.id())[0] = 1.0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.requires_grad || node.grad.empty()) continue;
    if (node.backward) node.backward(*this, i);
    if (node.parameter != nullptr) {
      auto& dst = node.parameter->grad;
      if (dst.shape() != node.value.shape()) dst = Tensor(node.value.shape());
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += node.grad[k];
    }
  }
}

}  // namespace hkg::ad
