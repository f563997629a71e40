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
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "hkg/error.hpp"
#include "hkg/model.hpp"
#include "hkg/rng.hpp"
#include "hkg/util.hpp"

namespace hkg::model {

namespace fs = std::filesystem;

Dataset make_dataset(const std::vector<signal::Spectrogram>& spectrograms, const hierarchy::LabelTree& tree) {
  Dataset out;
  out.reserve(spectrograms.size());
  for (const auto& s : spectrograms) {
    Sample sample;
    sample.input = ad::Tensor({s.channels, s.height, s.width}, s.values);
    sample.leaf = tree.leaf_index(s.leaf_class);
    sample.source = s.source_stream;
    out.push_back(std::move(sample));
  }
  return out;
}

ad::Tensor stack_batch(const Dataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw EmptyInputError("stack_batch: empty batch");
  const auto& first = data.at(indices[0]).input;
  ad::Shape shape{indices.size()};
  shape.insert(shape.end(), first.shape().begin(), first.shape().end());
  ad::Tensor batch(shape);
  const std::size_t n = first.size();
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& in = data.at(indices[b]).input;
    if (in.shape() != first.shape()) {
      throw ShapeError("stack_batch: sample shape " + ad::shape_string(in.shape()) + " differs from " +
                       ad::shape_string(first.shape()));
    }
    std::copy(in.values().begin(), in.values().end(), batch.data() + b * n);
  }
  return batch;
}

std::string EpochRecord::to_json_line() const {
  nlohmann::json j{{"epoch", epoch},
                   {"lr", lr},
                   {"train_loss", train_loss},
                   {"val_loss", val_loss},
                   {"val_leaf_accuracy", val_leaf_accuracy},
                   {"val_macro_f1", val_macro_f1}};
  return j.dump();
}

namespace {

ad::Tensor scalar(double v) { return ad::Tensor({1}, std::vector<double>{v}); }

double scalar_of(const ad::Checkpoint& ckpt, const std::string& name) {
  const auto* t = ckpt.find_tensor(name);
  if (t == nullptr || t->size() != 1) throw FormatError("checkpoint lacks training field '" + name + "'");
  return (*t)[0];
}

}  // namespace

void TrainState::save_to(ad::Checkpoint& ckpt) const {
  ckpt.tensors.emplace_back("train/epoch", scalar(static_cast<double>(epoch)));
  ckpt.tensors.emplace_back("optim/lr", scalar(optimizer.lr));
  ckpt.tensors.emplace_back("optim/momentum", scalar(optimizer.momentum));
  ckpt.tensors.emplace_back("optim/weight_decay", scalar(optimizer.weight_decay));
  ckpt.tensors.emplace_back("optim/buffer_count", scalar(static_cast<double>(optimizer.momentum_buffers.size())));
  for (std::size_t i = 0; i < optimizer.momentum_buffers.size(); ++i)
    ckpt.tensors.emplace_back("optim/buffer/" + std::to_string(i), optimizer.momentum_buffers[i]);
  ckpt.tensors.emplace_back("sched/best", scalar(scheduler.best_metric));
  ckpt.tensors.emplace_back("sched/since_improve", scalar(static_cast<double>(scheduler.epochs_since_improve)));
  ckpt.tensors.emplace_back("sched/factor", scalar(scheduler.factor));
  ckpt.tensors.emplace_back("sched/patience", scalar(static_cast<double>(scheduler.patience)));
  ckpt.tensors.emplace_back("sched/min_lr", scalar(scheduler.min_lr));
}

TrainState TrainState::load_from(const ad::Checkpoint& ckpt) {
  TrainState s;
  s.epoch = static_cast<std::size_t>(scalar_of(ckpt, "train/epoch"));
  s.optimizer.lr = scalar_of(ckpt, "optim/lr");
  s.optimizer.momentum = scalar_of(ckpt, "optim/momentum");
  s.optimizer.weight_decay = scalar_of(ckpt, "optim/weight_decay");
  const auto buffers = static_cast<std::size_t>(scalar_of(ckpt, "optim/buffer_count"));
  for (std::size_t i = 0; i < buffers; ++i) {
    const auto* t = ckpt.find_tensor("optim/buffer/" + std::to_string(i));
    if (t == nullptr) throw FormatError("checkpoint lacks momentum buffer " + std::to_string(i));
    s.optimizer.momentum_buffers.push_back(*t);
  }
  s.scheduler.best_metric = scalar_of(ckpt, "sched/best");
  s.scheduler.epochs_since_improve = static_cast<std::size_t>(scalar_of(ckpt, "sched/since_improve"));
  s.scheduler.factor = scalar_of(ckpt, "sched/factor");
  s.scheduler.patience = static_cast<std::size_t>(scalar_of(ckpt, "sched/patience"));
  s.scheduler.min_lr = scalar_of(ckpt, "sched/min_lr");
  s.initialized = true;
  return s;
}

Evaluation evaluate(HKGModel& model, const hierarchy::LabelTree& tree, const Dataset& data, std::size_t batch_size) {
  if (batch_size == 0) throw ParameterError("evaluate: batch size must be positive");
  Evaluation ev;
  if (data.empty()) return ev;
  const Matrix cls = model.classifier_matrix();
  const std::size_t c = model.class_count();
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  double total = 0.0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(start + batch_size, data.size());
    const auto batch = stack_batch(data, std::span(idx).subspan(start, end - start));
    const auto feats = model.extract_features(batch);
    const std::size_t d = feats.dim(1);
    for (std::size_t b = 0; b < end - start; ++b) {
      const auto scores = predict(feats.values().subspan(b * d, d), cls);
      metrics::EvalRecord rec;
      rec.truth = hierarchy::label_vector(tree, data[start + b].leaf);
      rec.leaf_truth = data[start + b].leaf;
      total += bce_loss(scores, rec.truth);
      rec.probs.resize(c);
      for (std::size_t k = 0; k < c; ++k) rec.probs[k] = sigmoid(scores[k]);
      ev.records.push_back(std::move(rec));
    }
  }
  ev.loss = total / static_cast<double>(data.size());
  return ev;
}

namespace {

ad::Tensor augmented_batch(const Dataset& data, std::span<const std::size_t> indices, const TrainConfig& config,
                           Rng& rng) {
  ad::Tensor batch = stack_batch(data, indices);
  if (config.augment.empty() || config.augment_prob <= 0.0 || batch.rank() != 4) return batch;
  const std::size_t ch = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  const std::size_t n = ch * h * w;
  for (std::size_t b = 0; b < indices.size(); ++b) {
    std::vector<signal::Augmentation> ops;
    for (auto op : config.augment)
      if (rng.uniform() < config.augment_prob) ops.push_back(op);
    if (ops.empty()) continue;
    signal::Spectrogram spec;
    spec.channels = ch;
    spec.height = h;
    spec.width = w;
    spec.values.assign(batch.data() + b * n, batch.data() + (b + 1) * n);
    spec = signal::augment(std::move(spec), ops);
    std::copy(spec.values.begin(), spec.values.end(), batch.data() + b * n);
  }
  return batch;
}

fs::path checkpoint_path(const fs::path& dir, std::size_t epoch) {
  char name[32];
  std::snprintf(name, sizeof name, "epoch_%03zu.hkg", epoch);
  return dir / "checkpoints" / name;
}

}  // namespace

TrainResult train(HKGModel& model, const hierarchy::LabelTree& tree, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config, std::optional<TrainState> resume) {
  if (train_set.empty()) throw EmptyInputError("train: empty training set");
  if (config.batch_size == 0) throw ParameterError("train: batch size must be positive");
  if (config.lr < 0.0 || !std::isfinite(config.lr)) throw ParameterError("train: learning rate must be >= 0");
  if (tree.node_order() != model.node_order()) throw TreeMismatchError("train: model and tree disagree on classes");

  TrainResult result;
  TrainState& state = result.state;
  if (resume && resume->initialized) {
    state = std::move(*resume);
  } else {
    state.optimizer.lr = config.lr;
    state.optimizer.momentum = config.momentum;
    state.optimizer.weight_decay = config.weight_decay;
    state.scheduler = config.scheduler;
    state.initialized = true;
  }

  std::optional<fs::path> history_path;
  if (config.output_dir) {
    fs::create_directories(*config.output_dir / "checkpoints");
    history_path = *config.output_dir / "history.jsonl";
    if (state.epoch == 0) {
      std::ofstream(*history_path, std::ios::trunc);
    } else {
      result.last_checkpoint = checkpoint_path(*config.output_dir, state.epoch);
    }
  }

  auto params = model.parameter_ptrs();
  for (std::size_t epoch = state.epoch + 1; epoch <= config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, epoch));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order.begin(), order.end());

    const double epoch_lr = state.optimizer.lr;
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(start + config.batch_size, order.size());
      const auto idx = std::span<const std::size_t>(order).subspan(start, end - start);
      const ad::Tensor batch = augmented_batch(train_set, idx, config, rng);
      ad::Tensor targets({idx.size(), model.class_count()});
      for (std::size_t b = 0; b < idx.size(); ++b) {
        const auto y = hierarchy::label_vector(tree, train_set[idx[b]].leaf);
        std::copy(y.begin(), y.end(), targets.data() + b * y.size());
      }
      model.zero_grad();
      double value = 0.0;
      try {
        ad::Tape tape;
        ad::Var loss;
        try {
          loss = ad::bce_with_logits(HKGModel::scores(model.features(tape, batch), model.classifier(tape)), targets);
        } catch (const NumericError& e) {
          throw TrainingDivergedError(e.what(), "");
        }
        value = loss.value()[0];
        if (!std::isfinite(value)) throw TrainingDivergedError("non-finite loss", "");
        tape.backward(loss);
        ad::sgd_step(params, state.optimizer);
      } catch (const TrainingDivergedError& e) {
        const std::string where = result.last_checkpoint ? result.last_checkpoint->string() : std::string();
        throw TrainingDivergedError(std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                                        (where.empty() ? "" : "; last good checkpoint: " + where),
                                    where);
      }
      total += value * static_cast<double>(idx.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = epoch_lr;
    rec.train_loss = total / static_cast<double>(train_set.size());
    double monitored = rec.train_loss;
    if (!val_set.empty()) {
      const auto ev = evaluate(model, tree, val_set);
      const std::vector<double> half(model.class_count(), 0.5);
      const auto report = metrics::build_report(tree, ev.records, half);
      rec.val_loss = ev.loss;
      rec.val_leaf_accuracy = report.leaf_accuracy;
      rec.val_macro_f1 = report.macro.f1;
      monitored = ev.loss;
    }
    state.optimizer.lr = ad::plateau_step(state.scheduler, monitored, state.optimizer.lr);
    state.epoch = epoch;
    result.history.push_back(rec);

    if (config.output_dir) {
      ad::Checkpoint ckpt;
      model.save_to(ckpt);
      state.save_to(ckpt);
      const auto path = checkpoint_path(*config.output_dir, epoch);
      ad::write_checkpoint(path, ckpt);
      result.last_checkpoint = path;
      std::ofstream(*history_path, std::ios::app) << rec.to_json_line() << '\n';
    }
  }
  return result;
}

void export_features(const fs::path& path, HKGModel& model, const hierarchy::LabelTree& tree, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  const std::size_t d = model.feature_dim();
  for (std::size_t k = 0; k < d; ++k) out << 'f' << k << ',';
  out << "label\n";
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t start = 0; start < data.size(); start += 32) {
    const std::size_t end = std::min<std::size_t>(start + 32, data.size());
    const auto feats = model.extract_features(stack_batch(data, std::span(idx).subspan(start, end - start)));
    for (std::size_t b = 0; b < end - start; ++b) {
      for (std::size_t k = 0; k < d; ++k) out << format_double(feats[b * d + k]) << ',';
      out << tree.name(data[start + b].leaf) << '\n';
    }
  }
}

Dataset import_features(const fs::path& path, const hierarchy::LabelTree& tree) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw EmptyInputError(path.string() + ": empty feature file");
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 2) throw FormatError(path.string() + ": header needs feature columns and a label");
  const std::size_t d = columns - 1;
  Dataset out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != columns) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(columns) +
                        " columns, got " + std::to_string(cells.size()));
    }
    Sample s;
    s.input = ad::Tensor({d});
    for (std::size_t k = 0; k < d; ++k) s.input[k] = parse_double(trim(cells[k]));
    s.leaf = tree.leaf_index(std::string(trim(cells[d])));
    s.source = path.filename().string() + ":" + std::to_string(line_no);
    out.push_back(std::move(s));
  }
  if (out.empty()) throw EmptyInputError(path.string() + ": no feature rows");
  return out;
}

}  // namespace hkg::model
