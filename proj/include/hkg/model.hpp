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
#include <span>
#include <string>
#include <vector>

#include "hkg/autodiff.hpp"
#include "hkg/hierarchy.hpp"
#include "hkg/matrix.hpp"
#include "hkg/metrics.hpp"
#include "hkg/optim.hpp"
#include "hkg/signal.hpp"

namespace hkg::model {

struct ConvBlock {
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
};

/// Toy CNN: conv + LeakyReLU blocks (same padding), then global max pooling.
struct FeatureLearnerConfig {
  std::vector<ConvBlock> blocks{{8, 3, 2}, {16, 3, 2}, {32, 3, 2}, {64, 3, 2}};
  double slope = 0.2;
  std::size_t in_channels = 3;
  /// dB inputs are multiplied by this before the first convolution.
  double input_scale = 1.0 / 40.0;

  std::size_t output_dim() const { return blocks.empty() ? 0 : blocks.back().out_channels; }
};

/// Output widths of the GCN layers; the last one must equal the feature
/// dimension D. LeakyReLU follows every layer except the last.
struct GCNConfig {
  std::vector<std::size_t> layer_dims{32, 64};
  double slope = 0.2;
};

enum class HeadKind {
  gcn,     // classifier generated from class embeddings by the GCN
  linear,  // free C x D matrix (no hierarchy)
};

struct ModelConfig {
  /// Absent when the model consumes precomputed features of size feature_dim.
  std::optional<FeatureLearnerConfig> feature_learner = FeatureLearnerConfig{};
  std::size_t feature_dim = 64;
  GCNConfig gcn;
  HeadKind head = HeadKind::gcn;

  /// D: the feature learner's output width, or feature_dim without one.
  std::size_t output_dim() const { return feature_learner ? feature_learner->output_dim() : feature_dim; }
};

/// Feature learner + classifier head. Inputs are batches shaped
/// [B, 3, H, W] (spectrograms) or [B, D] (precomputed features).
class HKGModel {
 public:
  /// rehkcm is C x C, embeddings C x d, both in node order.
  HKGModel(ModelConfig config, Matrix rehkcm, Matrix embeddings, std::vector<std::string> node_order,
           std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t class_count() const noexcept { return node_order_.size(); }
  std::size_t feature_dim() const noexcept { return config_.output_dim(); }
  const std::vector<std::string>& node_order() const noexcept { return node_order_; }
  const Matrix& rehkcm() const noexcept { return rehkcm_; }
  const Matrix& embeddings() const noexcept { return embeddings_; }

  std::vector<ad::Parameter>& parameters() noexcept { return params_; }
  const std::vector<ad::Parameter>& parameters() const noexcept { return params_; }
  std::vector<ad::Parameter*> parameter_ptrs();
  void zero_grad();

  /// F' for a batch: [B, D].
  ad::Var features(ad::Tape& tape, const ad::Tensor& batch);
  /// Classifier rows, C x D.
  ad::Var classifier(ad::Tape& tape);
  /// Raw scores F' C^T: [B, C].
  static ad::Var scores(ad::Var features, ad::Var classifier);

  /// Convenience forward pass without gradient bookkeeping: [B, C] scores.
  ad::Tensor predict_scores(const ad::Tensor& batch);
  /// [B, D] pooled features.
  ad::Tensor extract_features(const ad::Tensor& batch);
  /// C x D classifier.
  Matrix classifier_matrix();

  /// Parameters under "param/<name>", the Re-HKCM and class embeddings,
  /// the node order and the head kind.
  void save_to(ad::Checkpoint& ckpt) const;
  /// Restores parameters; throws TreeMismatchError when the node order
  /// differs and ShapeError when a parameter is missing or misshaped.
  void load_from(const ad::Checkpoint& ckpt);

 private:
  ModelConfig config_;
  Matrix rehkcm_;
  Matrix embeddings_;
  std::vector<std::string> node_order_;
  std::vector<ad::Parameter> params_;
  std::size_t gcn_first_ = 0;  // index of the first head parameter
};

// Single-sample helpers mirroring the model stages.

/// GMP(FL(spec)) for one spectrogram.
std::vector<double> feature_forward(HKGModel& model, const signal::Spectrogram& spec);

/// Ã ... LeakyReLU(Ã E W0) ... W_last with LeakyReLU between layers.
Matrix gcn_forward(const Matrix& embeddings, const Matrix& rehkcm, std::span<const Matrix> weights, double slope);

/// scores[i] = <features, classifier row i>.
std::vector<double> predict(std::span<const double> features, const Matrix& classifier);

/// Mean binary cross-entropy of sigmoid(scores) against a multi-hot label,
/// evaluated in a numerically stable form.
double bce_loss(std::span<const double> scores, std::span<const double> labels);

double sigmoid(double x);

// Training ----------------------------------------------------------------

/// One input (spectrogram [3, H, W] or feature vector [D]) and its leaf class.
struct Sample {
  ad::Tensor input;
  std::size_t leaf = 0;
  std::string source;  // stream id, for bookkeeping
};

using Dataset = std::vector<Sample>;

/// Spectrogram samples; leaf classes are looked up by name in the tree.
Dataset make_dataset(const std::vector<signal::Spectrogram>& spectrograms, const hierarchy::LabelTree& tree);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 16;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  ad::SchedulerState scheduler;
  std::uint64_t seed = 0;
  /// Each listed op is applied independently with probability augment_prob.
  std::vector<signal::Augmentation> augment{signal::Augmentation::flip_h};
  double augment_prob = 0.5;
  /// When set: <dir>/checkpoints/epoch_NNN.hkg and <dir>/history.jsonl.
  std::optional<std::filesystem::path> output_dir;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_leaf_accuracy = 0.0;
  double val_macro_f1 = 0.0;

  std::string to_json_line() const;
};

/// Optimizer and scheduler progress; restored on resume.
struct TrainState {
  std::size_t epoch = 0;  // completed epochs
  ad::OptimizerState optimizer;
  ad::SchedulerState scheduler;
  bool initialized = false;

  void save_to(ad::Checkpoint& ckpt) const;
  static TrainState load_from(const ad::Checkpoint& ckpt);
};

struct TrainResult {
  std::vector<EpochRecord> history;
  TrainState state;
  std::optional<std::filesystem::path> last_checkpoint;
};

/// Runs epochs state.epoch + 1 .. config.epochs: seeded shuffle, minibatch
/// forward/backward, SGD step, plateau schedule on validation loss, a
/// checkpoint per epoch. A non-finite loss or gradient raises
/// TrainingDivergedError naming the last good checkpoint.
TrainResult train(HKGModel& model, const hierarchy::LabelTree& tree, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config, std::optional<TrainState> resume = std::nullopt);

/// Mean loss and evaluation records for a dataset.
struct Evaluation {
  double loss = 0.0;
  std::vector<metrics::EvalRecord> records;
};

Evaluation evaluate(HKGModel& model, const hierarchy::LabelTree& tree, const Dataset& data,
                    std::size_t batch_size = 32);

/// Stacks sample inputs [i0, i1) into one batch tensor.
ad::Tensor stack_batch(const Dataset& data, std::span<const std::size_t> indices);

// Feature import/export -----------------------------------------------------

/// CSV with header f0..f{D-1},label; one row per sample.
void export_features(const std::filesystem::path& path, HKGModel& model, const hierarchy::LabelTree& tree,
                     const Dataset& data);
Dataset import_features(const std::filesystem::path& path, const hierarchy::LabelTree& tree);

}  // namespace hkg::model
