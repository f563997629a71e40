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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hkg/hierarchy.hpp"
#include "hkg/metrics.hpp"
#include "hkg/model.hpp"
#include "hkg/signal.hpp"

namespace hkg::cli {

/// Process exit codes.
enum ExitCode : int {
  kOk = 0,
  kUnexpected = 1,
  kBadInput = 2,
  kInvariantViolation = 3,
  kDiverged = 4,
  kTreeMismatch = 5,
};

/// Everything a train or eval run needs. Serialised flat: every field is a
/// top-level JSON key, and overrides address the same keys.
struct RunConfig {
  std::filesystem::path data = "data/synthetic";
  std::filesystem::path tree = "data/trees/cavitation.json";
  std::filesystem::path embeddings = "data/embeddings/desk-d8.txt";
  std::string oov = "skip";
  std::filesystem::path out = "runs/default";

  double tau = hierarchy::kDefaultTau;
  double eta = hierarchy::kDefaultEta;
  double c = hierarchy::kDefaultSmoothing;

  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t epochs = 100;
  std::size_t batch = 16;
  double lr_factor = 0.1;
  std::size_t lr_patience = 5;
  double min_lr = 1e-5;
  std::vector<std::string> augment{"flip_h"};
  double augment_prob = 0.5;

  signal::PreprocessConfig preprocess;

  std::vector<std::size_t> cnn_channels{8, 16, 32, 64};
  std::size_t cnn_kernel = 3;
  std::size_t cnn_stride = 2;
  std::vector<std::size_t> gcn_dims{32, 64};
  std::string head = "gcn";

  std::uint64_t seed = 0;
  double val_fraction = 0.2;

  nlohmann::json to_json() const;
  /// Starts from defaults and applies every key present. Unknown keys and
  /// out-of-range values raise ConfigError naming the key.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::filesystem::path& path);

  /// Sets one key from command-line text (JSON literal or bare string).
  /// "gcn_layers=N" is shorthand: 0 selects the linear head, N >= 1 a GCN
  /// of N layers ending at the feature width.
  void set(std::string_view key, std::string_view value);

  void validate() const;

  model::ModelConfig model_config() const;
  model::TrainConfig train_config() const;
};

/// Training streams split into the fitting part and a validation part,
/// plus the test streams, all as stream keys.
struct StreamSplit {
  std::vector<std::string> train_ids;
  std::vector<std::string> val_ids;
  std::vector<std::string> test_ids;

  nlohmann::json to_json() const;
  static StreamSplit from_json(const nlohmann::json& j);
};

/// Stratified by leaf: round(fraction * n) streams per leaf go to
/// validation, at least one while one is left for training.
StreamSplit carve_validation(const std::vector<signal::RawStream>& train_streams, double fraction,
                             std::uint64_t seed);

/// Stream key used in splits: "<leaf>/<stream id>".
std::string stream_key(const signal::RawStream& s);

/// Spectrogram dataset for the named streams.
model::Dataset build_dataset(const std::vector<signal::RawStream>& streams, const std::vector<std::string>& ids,
                             const hierarchy::LabelTree& tree, const signal::PreprocessConfig& pre);

/// Per-leaf stream counts, propagated to ancestors.
hierarchy::ClassCounts stream_counts(const hierarchy::LabelTree& tree, const std::vector<signal::RawStream>& streams,
                                     const std::vector<std::string>& ids);

/// Counts from {"leaf": n, ...} or from a dataset manifest's train split.
hierarchy::ClassCounts read_counts(const hierarchy::LabelTree& tree, const std::filesystem::path& path);

/// A model configured from the run config (weights freshly initialised).
model::HKGModel make_model(const RunConfig& cfg, const hierarchy::LabelTree& tree,
                           const hierarchy::MatrixPipeline& matrices);

struct TrainOutcome {
  model::TrainResult result;
  StreamSplit split;
  hierarchy::MatrixPipeline matrices;
};

/// Full train command: reads <data>/train, carves validation, builds the
/// matrices from training stream counts, trains, and writes run.json,
/// splits.json, matrices/*.csv, checkpoints/ and history.jsonl under out.
TrainOutcome run_train(const RunConfig& cfg, const std::optional<std::filesystem::path>& resume = std::nullopt);

/// Eval command: thresholds fitted on the validation streams recorded in
/// <run>/splits.json, metrics on <data>/test. Writes metrics.json,
/// metrics.txt, leaf_confusion.csv and roc/ under out.
metrics::MetricsReport run_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                                const std::filesystem::path& split_file);

struct AblationRow {
  std::string value;
  std::vector<double> leaf_accuracy;  // one per seed
  std::vector<double> macro_f1;
  double mean_leaf_accuracy = 0.0;
  double mean_macro_f1 = 0.0;
};

/// One train+eval sub-run per (value, seed) under <out>/<key>=<value>/seed-<s>;
/// writes <out>/ablation.csv and ablation.txt.
std::vector<AblationRow> run_ablation(const RunConfig& cfg, const std::string& key,
                                      const std::vector<std::string>& values, const std::vector<std::uint64_t>& seeds);

std::string format_ablation_table(const std::string& key, const std::vector<AblationRow>& rows);

/// Entry point of the hkg binary.
int main(int argc, char** argv);

}  // namespace hkg::cli
