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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "hkg/error.hpp"
#include "hkg/hierarchy.hpp"
#include "hkg/model.hpp"
#include "support.hpp"

using namespace hkg;
using namespace hkg::model;

namespace {

hierarchy::LabelTree cavitation() {
  return hierarchy::LabelTree::from_json_file(testing::source_dir() / "data/trees/cavitation.json");
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (auto& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

Matrix to_matrix(const ad::Tensor& t) {
  Matrix m(t.dim(0), t.dim(1));
  std::copy(t.values().begin(), t.values().end(), m.data().begin());
  return m;
}

ModelConfig small_config(std::size_t in_channels = 3) {
  ModelConfig cfg;
  cfg.feature_learner = FeatureLearnerConfig{};
  cfg.feature_learner->blocks = {{4, 3, 2}, {6, 3, 2}};
  cfg.feature_learner->in_channels = in_channels;
  cfg.gcn.layer_dims = {5, 6};
  return cfg;
}

HKGModel small_model(const hierarchy::LabelTree& tree, std::uint64_t seed, HeadKind head = HeadKind::gcn) {
  Rng rng(seed + 1000);
  auto cfg = small_config();
  cfg.head = head;
  const auto counts = hierarchy::count_classes(tree, testing::random_labels(rng, tree));
  const auto pipe = hierarchy::MatrixPipeline::build(tree, counts);
  return HKGModel(cfg, pipe.rehkcm, random_matrix(rng, tree.class_count(), 4), tree.node_order(), seed);
}

Dataset random_dataset(Rng& rng, const hierarchy::LabelTree& tree, std::size_t per_leaf, std::size_t side) {
  Dataset out;
  for (std::size_t k = 0; k < per_leaf; ++k) {
    for (auto leaf : tree.leaves()) {
      Sample s;
      s.input = testing::random_tensor(rng, {3, side, side}, -40.0, 40.0);
      s.leaf = leaf;
      s.source = tree.name(leaf) + "/" + std::to_string(k);
      out.push_back(std::move(s));
    }
  }
  return out;
}

double dataset_loss(HKGModel& model, const hierarchy::LabelTree& tree, const Dataset& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  ad::Tensor targets({data.size(), tree.class_count()});
  for (std::size_t b = 0; b < data.size(); ++b) {
    const auto l = hierarchy::label_vector(tree, data[b].leaf);
    std::copy(l.begin(), l.end(), targets.values().begin() + static_cast<std::ptrdiff_t>(b * l.size()));
  }
  ad::Tape tape;
  const auto s = HKGModel::scores(model.features(tape, stack_batch(data, idx)), model.classifier(tape));
  return ad::bce_with_logits(s, targets).value()[0];
}

}  // namespace

TEST_CASE("feature_forward: identity conv on constant input") {
  ModelConfig cfg;
  cfg.feature_learner = FeatureLearnerConfig{};
  cfg.feature_learner->blocks = {{3, 1, 1}};
  cfg.feature_learner->input_scale = 1.0;
  cfg.head = HeadKind::linear;
  HKGModel model(cfg, Matrix(), Matrix(), {"a", "b"}, 1);
  auto& w = model.parameters()[0].value;
  w.fill(0.0);
  for (std::size_t c = 0; c < 3; ++c) w[c * 3 + c] = 1.0;
  model.parameters()[1].value.fill(0.0);

  signal::Spectrogram spec;
  spec.height = 5;
  spec.width = 7;
  spec.values.assign(3 * 5 * 7, 2.5);
  const auto f = feature_forward(model, spec);
  REQUIRE(f.size() == 3);
  for (double v : f) CHECK(v == 2.5);

  // Moving the single peak leaves the pooled features unchanged.
  spec.values.assign(3 * 5 * 7, 0.0);
  spec.at(1, 0, 0) = 9.0;
  const auto a = feature_forward(model, spec);
  spec.at(1, 0, 0) = 0.0;
  spec.at(1, 4, 6) = 9.0;
  CHECK(feature_forward(model, spec) == a);
  CHECK(a[1] == 9.0);

  spec.width = 6;
  CHECK_THROWS_AS(model.extract_features(ad::Tensor({1, 2, 5, 6})), ShapeError);
}

TEST_CASE("feature_forward equals a loop convolution and brute-force max") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    ModelConfig cfg;
    cfg.feature_learner = FeatureLearnerConfig{};
    cfg.feature_learner->blocks = {{4, 3, 2}};
    cfg.head = HeadKind::linear;
    HKGModel model(cfg, Matrix(), Matrix(), {"a", "b"}, 100 + trial);
    const std::size_t h = 5 + rng.below(6), w = 5 + rng.below(6);
    signal::Spectrogram spec;
    spec.height = h;
    spec.width = w;
    spec.values.resize(3 * h * w);
    for (auto& v : spec.values) v = rng.uniform(-60.0, 60.0);

    const auto& weight = model.parameters()[0].value;
    const auto& bias = model.parameters()[1].value;
    const double scale = cfg.feature_learner->input_scale;
    const std::size_t oh = (h + 2 - 3) / 2 + 1, ow = (w + 2 - 3) / 2 + 1;
    std::vector<double> expected(4, -1e300);
    for (std::size_t o = 0; o < 4; ++o) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x) {
          double acc = bias[o];
          for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t ky = 0; ky < 3; ++ky)
              for (std::size_t kx = 0; kx < 3; ++kx) {
                const auto iy = static_cast<long>(y * 2 + ky) - 1, ix = static_cast<long>(x * 2 + kx) - 1;
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                acc += weight[((o * 3 + c) * 3 + ky) * 3 + kx] * scale * spec.at(c, iy, ix);
              }
          acc = acc > 0.0 ? acc : 0.2 * acc;
          expected[o] = std::max(expected[o], acc);
        }
      }
    }
    const auto f = feature_forward(model, spec);
    for (std::size_t o = 0; o < 4; ++o) CHECK(f[o] == doctest::Approx(expected[o]).epsilon(1e-12));
  }
}

TEST_CASE("gcn_forward examples") {
  Rng rng(5);
  SUBCASE("identity propagation") {
    const auto e = random_matrix(rng, 4, 6, 0.0, 1.0);
    const std::vector<Matrix> w{Matrix::identity(6), Matrix::identity(6)};
    const auto out = gcn_forward(e, Matrix::identity(4), w, 0.2);
    for (std::size_t i = 0; i < e.data().size(); ++i) CHECK(out.data()[i] == e.data()[i]);
  }
  SUBCASE("identity adjacency decouples rows") {
    auto e = random_matrix(rng, 5, 3);
    const std::vector<Matrix> w{random_matrix(rng, 3, 4), random_matrix(rng, 4, 2)};
    const auto base = gcn_forward(e, Matrix::identity(5), w, 0.2);
    for (std::size_t j = 0; j < 3; ++j) e(2, j) += 1.0;
    const auto moved = gcn_forward(e, Matrix::identity(5), w, 0.2);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        if (i != 2) CHECK(moved(i, j) == base(i, j));
  }
  SUBCASE("two siblings against a hand product") {
    Matrix a(2, 2);
    a(0, 0) = a(1, 1) = 0.6;
    const Matrix e = random_matrix(rng, 2, 2);
    const std::vector<Matrix> w{random_matrix(rng, 2, 2), random_matrix(rng, 2, 2)};
    const auto out = gcn_forward(e, a, w, 0.2);
    for (std::size_t i = 0; i < 2; ++i) {
      double h[2];
      for (std::size_t j = 0; j < 2; ++j) {
        const double v = 0.6 * (e(i, 0) * w[0](0, j) + e(i, 1) * w[0](1, j));
        h[j] = v > 0 ? v : 0.2 * v;
      }
      for (std::size_t j = 0; j < 2; ++j)
        CHECK(out(i, j) == doctest::Approx(0.6 * (h[0] * w[1](0, j) + h[1] * w[1](1, j))).epsilon(1e-14));
    }
  }
  SUBCASE("last width must equal the feature dimension") {
    const auto tree = cavitation();
    auto cfg = small_config();
    cfg.gcn.layer_dims = {5, 7};
    CHECK_THROWS_AS(HKGModel(cfg, Matrix::identity(5), random_matrix(rng, 5, 4), tree.node_order(), 1), ConfigError);
  }
}

TEST_CASE("model classifier equals gcn_forward on its weights") {
  const auto tree = cavitation();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto model = small_model(tree, seed);
    std::vector<Matrix> w;
    for (auto& p : model.parameters())
      if (p.name.rfind("gcn.", 0) == 0) w.push_back(to_matrix(p.value));
    REQUIRE(w.size() == 2);
    const auto expected = gcn_forward(model.embeddings(), model.rehkcm(), w, 0.2);
    const auto got = model.classifier_matrix();
    for (std::size_t i = 0; i < expected.data().size(); ++i)
      CHECK(got.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-13));
  }
}

TEST_CASE("class relabeling permutes classifier rows") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t c = 3 + rng.below(5);
    const auto a = random_matrix(rng, c, c, 0.0, 0.5);
    const auto e = random_matrix(rng, c, 4);
    std::vector<std::size_t> perm(c);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm.begin(), perm.end());
    Matrix pa(c, c), pe(c, 4);
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = 0; j < c; ++j) pa(i, j) = a(perm[i], perm[j]);
      for (std::size_t j = 0; j < 4; ++j) pe(i, j) = e(perm[i], j);
    }
    std::vector<std::string> names(c), pnames(c);
    for (std::size_t i = 0; i < c; ++i) names[i] = "k" + std::to_string(i);
    for (std::size_t i = 0; i < c; ++i) pnames[i] = names[perm[i]];
    ModelConfig cfg;
    cfg.feature_learner.reset();
    cfg.feature_dim = 3;
    cfg.gcn.layer_dims = {5, 3};
    for (const bool identity : {true, false}) {
      HKGModel m1(cfg, identity ? Matrix::identity(c) : a, e, names, 77);
      HKGModel m2(cfg, identity ? Matrix::identity(c) : pa, pe, pnames, 77);
      const auto c1 = m1.classifier_matrix();
      const auto c2 = m2.classifier_matrix();
      for (std::size_t i = 0; i < c; ++i)
        for (std::size_t j = 0; j < 3; ++j) CHECK(c2(i, j) == doctest::Approx(c1(perm[i], j)).epsilon(1e-13));
    }
  }
}

TEST_CASE("predict") {
  Matrix cls(2, 3);
  cls(0, 0) = 1.0;
  cls(1, 1) = 2.0;
  CHECK(predict(std::vector<double>{0.0, 4.0, 1.0}, cls)[0] == 0.0);
  CHECK_THROWS_AS(predict(std::vector<double>{1.0, 2.0}, cls), ShapeError);

  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = 1 + rng.below(8), d = 1 + rng.below(64);
    const auto m = random_matrix(rng, c, d);
    std::vector<double> f(d);
    for (auto& v : f) v = rng.uniform(-3.0, 3.0);
    const auto y = predict(f, m);
    for (std::size_t i = 0; i < c; ++i) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += f[k] * m(i, k);
      CHECK(std::abs(y[i] - acc) <= 1e-12 * std::max(1.0, std::abs(acc)));
    }
    std::vector<double> f2 = f;
    for (auto& v : f2) v *= 4.0;  // power of two keeps the scaling exact
    const auto y2 = predict(f2, m);
    for (std::size_t i = 0; i < c; ++i) CHECK(y2[i] == 4.0 * y[i]);
  }
}

TEST_CASE("bce_loss") {
  CHECK(bce_loss(std::vector<double>{0, 0, 0}, std::vector<double>{1, 0, 1}) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(bce_loss(std::vector<double>{800.0}, std::vector<double>{1.0}) == 0.0);
  CHECK(bce_loss(std::vector<double>{40.0, -40.0}, std::vector<double>{1.0, 0.0}) < 1e-15);
  CHECK_THROWS_AS(bce_loss(std::vector<double>{NAN}, std::vector<double>{1.0}), NumericError);
  CHECK_THROWS_AS(bce_loss(std::vector<double>{1.0}, std::vector<double>{1.0, 0.0}), ShapeError);

  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 1 + rng.below(8);
    std::vector<double> y(c), l(c);
    double naive = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      y[i] = rng.uniform(-8.0, 8.0);
      l[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
      const double s = 1.0 / (1.0 + std::exp(-y[i]));
      naive -= l[i] * std::log(s) + (1.0 - l[i]) * std::log(1.0 - s);
    }
    naive /= static_cast<double>(c);
    const double loss = bce_loss(y, l);
    CHECK(loss >= 0.0);
    CHECK(loss == doctest::Approx(naive).epsilon(1e-10));
  }
}

TEST_CASE("end-to-end parameter gradients match finite differences") {
  const auto tree = cavitation();
  Rng rng(13);
  for (const auto head : {HeadKind::gcn, HeadKind::linear}) {
    auto model = small_model(tree, 21, head);
    const auto data = random_dataset(rng, tree, 1, 8);
    std::vector<std::size_t> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    ad::Tensor targets({data.size(), tree.class_count()});
    for (std::size_t b = 0; b < data.size(); ++b) {
      const auto l = hierarchy::label_vector(tree, data[b].leaf);
      std::copy(l.begin(), l.end(), targets.values().begin() + static_cast<std::ptrdiff_t>(b * l.size()));
    }
    model.zero_grad();
    {
      ad::Tape tape;
      const auto s = HKGModel::scores(model.features(tape, stack_batch(data, idx)), model.classifier(tape));
      tape.backward(ad::bce_with_logits(s, targets));
    }
    std::size_t checked = 0;
    for (auto& p : model.parameters()) {
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        if (rng.uniform() > 0.1 && i != 0) continue;
        const double orig = p.value[i];
        p.value[i] = orig + 1e-5;
        const double up = dataset_loss(model, tree, data);
        p.value[i] = orig - 1e-5;
        const double down = dataset_loss(model, tree, data);
        p.value[i] = orig;
        const double numeric = (up - down) / 2e-5;
        const double a = p.grad[i];
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
        CHECK_MESSAGE(rel < 1e-4, p.name << "[" << i << "] analytic " << a << " numeric " << numeric);
        ++checked;
      }
    }
    CHECK(checked > 10);
  }
}

TEST_CASE("training overfits one batch and respects lr = 0") {
  const auto tree = cavitation();
  Rng rng(17);
  const auto data = random_dataset(rng, tree, 4, 8);
  REQUIRE(data.size() == 16);

  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 16;
  cfg.lr = 0.1;  // one step per epoch
  cfg.augment.clear();
  cfg.weight_decay = 0.0;
  cfg.scheduler.patience = 1000;
  ModelConfig full;  // toy CNN, D = 64
  const auto counts = hierarchy::count_classes(tree, testing::random_labels(rng, tree));
  const auto pipe = hierarchy::MatrixPipeline::build(tree, counts);
  HKGModel model(full, pipe.rehkcm, random_matrix(rng, tree.class_count(), 4), tree.node_order(), 5);
  const auto result = train(model, tree, random_dataset(rng, tree, 4, 16), {}, cfg);
  REQUIRE(result.history.size() == 200);
  CHECK(result.history.back().train_loss < 0.01);
  CHECK(result.state.epoch == 200);

  auto frozen = small_model(tree, 5);
  const auto before = frozen.parameters();
  TrainConfig zero = cfg;
  zero.epochs = 5;
  zero.lr = 0.0;
  zero.weight_decay = 1e-4;
  train(frozen, tree, data, data, zero);
  for (std::size_t k = 0; k < before.size(); ++k) {
    const auto a = before[k].value.values();
    const auto b = frozen.parameters()[k].value.values();
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
}

TEST_CASE("untrained model sits near chance") {
  const auto tree = cavitation();
  Rng rng(19);
  const auto data = random_dataset(rng, tree, 25, 8);
  auto model = small_model(tree, 3);
  const auto ev = evaluate(model, tree, data);
  double correct = 0;
  for (const auto& r : ev.records) correct += metrics::leaf_prediction(r.probs, tree) == r.leaf_truth;
  const double acc = correct / static_cast<double>(ev.records.size());
  CHECK(acc >= 0.15);
  CHECK(acc <= 0.35);
}

TEST_CASE("feature files") {
  const auto tree = cavitation();
  const auto dir = testing::scratch_dir("features");
  {
    std::ofstream out(dir / "d4.csv");
    out << "f0,f1,f2,f3,label\n"
        << "0.1,0.2,0.3,0.4,non-cavitation\n"
        << "1,2,3,4,choked-flow-cavitation\n"
        << "-1,0,1e-3,5,incipient-cavitation\n";
  }
  const auto recs = import_features(dir / "d4.csv", tree);
  REQUIRE(recs.size() == 3);
  CHECK(recs[1].input.shape() == ad::Shape{4});
  CHECK(recs[1].leaf == tree.leaf_index("choked-flow-cavitation"));
  {
    std::ofstream out(dir / "header.csv");
    out << "f0,f1,label\n";
  }
  CHECK_THROWS_AS(import_features(dir / "header.csv", tree), EmptyInputError);
  {
    std::ofstream out(dir / "ragged.csv");
    out << "f0,f1,label\n1,2,non-cavitation\n1,non-cavitation\n";
  }
  CHECK_THROWS_AS(import_features(dir / "ragged.csv", tree), FormatError);

  // Export from the CNN, re-import, and score through a feature-only model.
  Rng rng(23);
  const auto data = random_dataset(rng, tree, 3, 8);
  auto cnn = small_model(tree, 29);
  export_features(dir / "cnn.csv", cnn, tree, data);
  const auto back = import_features(dir / "cnn.csv", tree);
  REQUIRE(back.size() == data.size());

  auto cfg = small_config();
  cfg.feature_learner.reset();
  cfg.feature_dim = cnn.feature_dim();
  HKGModel head(cfg, cnn.rehkcm(), cnn.embeddings(), tree.node_order(), 29);
  for (std::size_t k = 0; k < head.parameters().size(); ++k) {
    head.parameters()[k].value = cnn.parameters()[cnn.parameters().size() - head.parameters().size() + k].value;
  }
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  const auto direct = cnn.predict_scores(stack_batch(data, idx));
  const auto via_file = head.predict_scores(stack_batch(back, idx));
  CHECK(std::equal(direct.values().begin(), direct.values().end(), via_file.values().begin(),
                   via_file.values().end()));
  for (std::size_t i = 0; i < data.size(); ++i) CHECK(back[i].leaf == data[i].leaf);
}

TEST_CASE("checkpoint round trip and tree mismatch") {
  const auto tree = cavitation();
  auto model = small_model(tree, 31);
  TrainState state;
  state.epoch = 7;
  state.initialized = true;
  state.optimizer.lr = 0.001;
  state.optimizer.momentum_buffers.push_back(ad::Tensor({2}, {1.5, -2.0}));
  state.scheduler.best_metric = 0.25;
  state.scheduler.epochs_since_improve = 3;

  ad::Checkpoint ckpt;
  model.save_to(ckpt);
  state.save_to(ckpt);
  const auto dir = testing::scratch_dir("ckpt");
  ad::write_checkpoint(dir / "m.hkg", ckpt);
  const auto read = ad::read_checkpoint(dir / "m.hkg");

  auto other = small_model(tree, 99);
  other.load_from(read);
  for (std::size_t k = 0; k < model.parameters().size(); ++k) {
    const auto a = model.parameters()[k].value.values();
    const auto b = other.parameters()[k].value.values();
    CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
  }
  const auto s = TrainState::load_from(read);
  CHECK(s.epoch == 7);
  CHECK(s.optimizer.lr == 0.001);
  REQUIRE(s.optimizer.momentum_buffers.size() == 1);
  CHECK(s.optimizer.momentum_buffers[0][1] == -2.0);
  CHECK(s.scheduler.best_metric == 0.25);
  CHECK(s.scheduler.epochs_since_improve == 3);

  const auto pub = hierarchy::LabelTree::from_json_file(testing::source_dir() / "data/trees/pub.json");
  auto cfg = small_config();
  HKGModel wrong(cfg, Matrix::identity(pub.class_count()), Matrix(pub.class_count(), 4), pub.node_order(), 1);
  CHECK_THROWS_AS(wrong.load_from(read), TreeMismatchError);
}
