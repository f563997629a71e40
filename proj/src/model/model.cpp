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

#include "hkg/error.hpp"
#include "hkg/model.hpp"
#include "hkg/rng.hpp"

namespace hkg::model {

namespace {

ad::Tensor to_tensor(const Matrix& m) {
  return ad::Tensor({m.rows(), m.cols()}, std::vector<double>(m.data().begin(), m.data().end()));
}

Matrix to_matrix(const ad::Tensor& t) {
  Matrix m(t.dim(0), t.dim(1));
  std::copy(t.values().begin(), t.values().end(), m.data().begin());
  return m;
}

ad::Tensor uniform_tensor(ad::Shape shape, double bound, Rng& rng) {
  ad::Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

std::string join_lines(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "\n" : "") + items[i];
  return out;
}

}  // namespace

double sigmoid(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

HKGModel::HKGModel(ModelConfig config, Matrix rehkcm, Matrix embeddings, std::vector<std::string> node_order,
                   std::uint64_t seed)
    : config_(std::move(config)),
      rehkcm_(std::move(rehkcm)),
      embeddings_(std::move(embeddings)),
      node_order_(std::move(node_order)) {
  const std::size_t c = node_order_.size();
  const std::size_t d_out = config_.output_dim();
  if (c == 0) throw ConfigError("HKGModel: no classes");
  if (d_out == 0) throw ConfigError("HKGModel: feature dimension must be positive");
  Rng rng(seed);

  if (config_.feature_learner) {
    const auto& fl = *config_.feature_learner;
    if (fl.blocks.empty()) throw ConfigError("HKGModel: the feature learner needs at least one conv block");
    std::size_t in = fl.in_channels;
    for (std::size_t i = 0; i < fl.blocks.size(); ++i) {
      const auto& b = fl.blocks[i];
      if (b.out_channels == 0 || b.kernel == 0 || b.stride == 0)
        throw ConfigError("HKGModel: conv block " + std::to_string(i) + " has a zero dimension");
      const double bound = 1.0 / std::sqrt(static_cast<double>(in * b.kernel * b.kernel));
      const auto prefix = "fl.conv" + std::to_string(i);
      params_.emplace_back(prefix + ".weight", uniform_tensor({b.out_channels, in, b.kernel, b.kernel}, bound, rng));
      params_.emplace_back(prefix + ".bias", uniform_tensor({b.out_channels}, bound, rng));
      in = b.out_channels;
    }
  }
  gcn_first_ = params_.size();

  if (config_.head == HeadKind::linear) {
    params_.emplace_back("head.weight", uniform_tensor({c, d_out}, 1.0 / std::sqrt(static_cast<double>(d_out)), rng));
    return;
  }
  if (rehkcm_.rows() != c || rehkcm_.cols() != c)
    throw ShapeError("HKGModel: Re-HKCM must be " + std::to_string(c) + "x" + std::to_string(c));
  if (embeddings_.rows() != c) throw ShapeError("HKGModel: embedding rows do not match the class count");
  const auto& dims = config_.gcn.layer_dims;
  if (dims.empty()) throw ConfigError("HKGModel: GCN needs at least one layer (use the linear head for none)");
  if (dims.back() != d_out) {
    throw ConfigError("HKGModel: last GCN layer width " + std::to_string(dims.back()) +
                      " must equal the feature dimension " + std::to_string(d_out));
  }
  std::size_t in = embeddings_.cols();
  for (std::size_t l = 0; l < dims.size(); ++l) {
    if (dims[l] == 0) throw ConfigError("HKGModel: GCN layer widths must be positive");
    params_.emplace_back("gcn.w" + std::to_string(l),
                         uniform_tensor({in, dims[l]}, 1.0 / std::sqrt(static_cast<double>(in)), rng));
    in = dims[l];
  }
}

std::vector<ad::Parameter*> HKGModel::parameter_ptrs() {
  std::vector<ad::Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

void HKGModel::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

ad::Var HKGModel::features(ad::Tape& tape, const ad::Tensor& batch) {
  if (!config_.feature_learner) {
    if (batch.rank() != 2 || batch.dim(1) != config_.feature_dim) {
      throw ShapeError("HKGModel::features: expected [B," + std::to_string(config_.feature_dim) + "], got " +
                       ad::shape_string(batch.shape()));
    }
    return tape.constant(batch);
  }
  const auto& fl = *config_.feature_learner;
  if (batch.rank() != 4 || batch.dim(1) != fl.in_channels) {
    throw ShapeError("HKGModel::features: expected [B," + std::to_string(fl.in_channels) + ",H,W], got " +
                     ad::shape_string(batch.shape()));
  }
  ad::Tensor scaled = batch;
  for (auto& v : scaled.values()) v *= fl.input_scale;
  ad::Var x = tape.constant(std::move(scaled));
  for (std::size_t i = 0; i < fl.blocks.size(); ++i) {
    const auto& b = fl.blocks[i];
    x = ad::conv2d(x, tape.parameter(params_[2 * i]), tape.parameter(params_[2 * i + 1]), {b.stride, b.kernel / 2});
    x = ad::leaky_relu(x, fl.slope);
  }
  return ad::global_max_pool(x);
}

ad::Var HKGModel::classifier(ad::Tape& tape) {
  if (config_.head == HeadKind::linear) return tape.parameter(params_[gcn_first_]);
  const ad::Var adj = tape.constant(to_tensor(rehkcm_));
  ad::Var h = tape.constant(to_tensor(embeddings_));
  const std::size_t layers = params_.size() - gcn_first_;
  for (std::size_t l = 0; l < layers; ++l) {
    h = ad::matmul(ad::matmul(adj, h), tape.parameter(params_[gcn_first_ + l]));
    if (l + 1 < layers) h = ad::leaky_relu(h, config_.gcn.slope);
  }
  return h;
}

ad::Var HKGModel::scores(ad::Var features, ad::Var classifier) { return ad::matmul(features, ad::transpose(classifier)); }

ad::Tensor HKGModel::predict_scores(const ad::Tensor& batch) {
  ad::Tape tape;
  return scores(features(tape, batch), classifier(tape)).value();
}

ad::Tensor HKGModel::extract_features(const ad::Tensor& batch) {
  ad::Tape tape;
  return features(tape, batch).value();
}

Matrix HKGModel::classifier_matrix() {
  ad::Tape tape;
  return to_matrix(classifier(tape).value());
}

void HKGModel::save_to(ad::Checkpoint& ckpt) const {
  for (const auto& p : params_) ckpt.tensors.emplace_back("param/" + p.name, p.value);
  ckpt.tensors.emplace_back("model/rehkcm", to_tensor(rehkcm_));
  ckpt.tensors.emplace_back("model/embeddings", to_tensor(embeddings_));
  ckpt.texts.emplace_back("model/node_order", join_lines(node_order_));
  ckpt.texts.emplace_back("model/head", config_.head == HeadKind::gcn ? "gcn" : "linear");
}

void HKGModel::load_from(const ad::Checkpoint& ckpt) {
  const auto* order = ckpt.find_text("model/node_order");
  if (order == nullptr || *order != join_lines(node_order_)) {
    throw TreeMismatchError("checkpoint was trained on a different label tree");
  }
  const auto* head = ckpt.find_text("model/head");
  const std::string expected_head = config_.head == HeadKind::gcn ? "gcn" : "linear";
  if (head == nullptr || *head != expected_head) {
    throw ConfigError("checkpoint head '" + (head ? *head : std::string("?")) + "' does not match configured '" +
                      expected_head + "'");
  }
  for (auto& p : params_) {
    const auto* t = ckpt.find_tensor("param/" + p.name);
    if (t == nullptr) throw ShapeError("checkpoint lacks parameter '" + p.name + "'");
    if (t->shape() != p.value.shape()) {
      throw ShapeError("checkpoint parameter '" + p.name + "' has shape " + ad::shape_string(t->shape()) +
                       ", model expects " + ad::shape_string(p.value.shape()));
    }
    p.value = *t;
  }
}

std::vector<double> feature_forward(HKGModel& model, const signal::Spectrogram& spec) {
  ad::Tensor batch({1, spec.channels, spec.height, spec.width}, spec.values);
  const auto f = model.extract_features(batch);
  return {f.values().begin(), f.values().end()};
}

Matrix gcn_forward(const Matrix& embeddings, const Matrix& rehkcm, std::span<const Matrix> weights, double slope) {
  if (weights.empty()) throw ConfigError("gcn_forward: no layers");
  if (rehkcm.rows() != rehkcm.cols() || rehkcm.cols() != embeddings.rows())
    throw ShapeError("gcn_forward: Re-HKCM and embeddings disagree on the class count");
  Matrix h = embeddings;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto& w = weights[l];
    if (w.rows() != h.cols()) throw ShapeError("gcn_forward: layer " + std::to_string(l) + " input width mismatch");
    Matrix ah(h.rows(), h.cols());
    for (std::size_t i = 0; i < h.rows(); ++i)
      for (std::size_t k = 0; k < h.rows(); ++k)
        for (std::size_t j = 0; j < h.cols(); ++j) ah(i, j) += rehkcm(i, k) * h(k, j);
    Matrix next(h.rows(), w.cols());
    for (std::size_t i = 0; i < ah.rows(); ++i)
      for (std::size_t k = 0; k < ah.cols(); ++k)
        for (std::size_t j = 0; j < w.cols(); ++j) next(i, j) += ah(i, k) * w(k, j);
    if (l + 1 < weights.size())
      for (auto& v : next.data()) v = v > 0.0 ? v : slope * v;
    h = std::move(next);
  }
  return h;
}

std::vector<double> predict(std::span<const double> features, const Matrix& classifier) {
  if (features.size() != classifier.cols()) {
    throw ShapeError("predict: feature length " + std::to_string(features.size()) + " vs classifier width " +
                     std::to_string(classifier.cols()));
  }
  std::vector<double> out(classifier.rows(), 0.0);
  for (std::size_t i = 0; i < classifier.rows(); ++i)
    for (std::size_t k = 0; k < features.size(); ++k) out[i] += features[k] * classifier(i, k);
  return out;
}

double bce_loss(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size() || scores.empty()) throw ShapeError("bce_loss: score/label length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double y = scores[i];
    if (!std::isfinite(y)) throw NumericError("bce_loss: non-finite score");
    acc += std::max(y, 0.0) - labels[i] * y + std::log1p(std::exp(-std::abs(y)));
  }
  return acc / static_cast<double>(scores.size());
}

}  // namespace hkg::model
