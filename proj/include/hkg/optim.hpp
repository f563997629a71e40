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
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hkg/autodiff.hpp"

namespace hkg::ad {

/// SGD with heavy-ball momentum and L2 weight decay folded into the
/// gradient: v <- momentum v + g + wd p;  p <- p - lr v.
struct OptimizerState {
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<Tensor> momentum_buffers;  // one per parameter, same order
};

/// Applies one update using each parameter's accumulated grad. Throws
/// TrainingDivergedError on a non-finite gradient (parameters untouched).
void sgd_step(std::span<Parameter* const> params, OptimizerState& state);

/// Reduce-on-plateau schedule for a metric that should decrease.
struct SchedulerState {
  double best_metric = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_improve = 0;
  double factor = 0.1;
  std::size_t patience = 5;
  double min_lr = 1e-5;
};

/// Records one epoch's metric and returns the (possibly reduced) learning
/// rate. After `patience` consecutive epochs without a strict improvement
/// the rate becomes max(lr * factor, min_lr) and the counter restarts.
double plateau_step(SchedulerState& state, double metric, double lr);

// Checkpoints -------------------------------------------------------------

/// Named tensors plus named text fields, stored in insertion order.
struct Checkpoint {
  std::vector<std::pair<std::string, Tensor>> tensors;
  std::vector<std::pair<std::string, std::string>> texts;

  const Tensor* find_tensor(const std::string& name) const;
  const std::string* find_text(const std::string& name) const;
};

/// Binary layout, all integers little-endian:
///   "HKG1" u32 record_count
///   per record: u8 kind (0 tensor, 1 text) u32 name_len name
///     tensor: u32 rank, u64 dims[rank], f64 values[prod(dims)]
///     text:   u64 byte_len, bytes
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Debug rendering: {"tensors": {name: {"shape": [...], "values": [...]}}, "texts": {...}}.
std::string checkpoint_to_json(const Checkpoint& ckpt);

}  // namespace hkg::ad
