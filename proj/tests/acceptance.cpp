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

// Acceptance checks for the nine release criteria. Prints one PASS/FAIL line
// per criterion and exits non-zero when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <string>

#include "hkg/cli.hpp"
#include "hkg/datagen.hpp"
#include "hkg/error.hpp"
#include "hkg/hierarchy.hpp"
#include "hkg/metrics.hpp"
#include "hkg/model.hpp"
#include "hkg/signal.hpp"
#include "support.hpp"

using namespace hkg;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1 -----------------------------------------------------------------------

Outcome segment_counts() {
  const std::size_t w = 466944;
  const auto three = signal::segment_count(3 * 1562500, w, w);
  const auto twenty_five = signal::segment_count(39062500, w, w);
  signal::RawStream s{std::vector<double>(3 * 1562500, 0.0), 1562500.0, "x", "x-0"};
  const auto cut = signal::slide_window(s, w, w).size();
  return {three == 10 && twenty_five == 83 && cut == 10,
          "3 s -> " + std::to_string(three) + " (slide_window " + std::to_string(cut) + "), 25 s -> " +
              std::to_string(twenty_five)};
}

// 2 -----------------------------------------------------------------------

Outcome matrix_pipeline() {
  Rng rng(20240601);
  std::size_t bad = 0;
  std::string first;
  auto fail = [&](const std::string& what) {
    if (bad++ == 0) first = what;
  };
  double worst_row = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto tree = testing::random_tree(rng, 8);
    const auto counts = hierarchy::count_classes(tree, testing::random_labels(rng, tree));
    const double tau = 0.05 + 0.9 * rng.uniform();
    const double eta = rng.uniform();
    const auto p = hierarchy::MatrixPipeline::build(tree, counts, tau, eta);
    const std::size_t c = tree.class_count();
    for (std::size_t i = 0; i < c; ++i) {
      if (p.scm(i, i) != 1.0) fail("SCM diagonal");
      if (p.rehkcm(i, i) != 1.0 - eta) fail("Re-HKCM diagonal");
      double row = 0.0, off_b = 0.0, off_re = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        const double b = p.bhkcm(i, j);
        if (b != 0.0 && b != 1.0) fail("B-HKCM not binary");
        row += b;
        if (i == j) continue;
        off_b += b;
        off_re += p.rehkcm(i, j);
        if (p.scm(i, j) + p.scm(j, i) != 1.0) fail("SCM pair sum");
        if (tree.parent(i) == std::optional<std::size_t>(j) && p.hkcm(i, j) != 1.0) fail("child->parent entry");
        if (tree.are_siblings(i, j) && p.hkcm(i, j) != 0.0) fail("sibling entry");
      }
      const double expected = eta * off_b / (row + p.c);
      worst_row = std::max(worst_row, std::abs(off_re - expected));
    }
    const std::vector<double> taus{0.05, 0.2, 0.4, 0.6, 0.8, 1.0};
    for (std::size_t k = 1; k < taus.size(); ++k) {
      const auto lo = hierarchy::binarize(p.hkcm, taus[k - 1]);
      const auto hi = hierarchy::binarize(p.hkcm, taus[k]);
      for (std::size_t e = 0; e < c * c; ++e)
        if (hi.data()[e] > lo.data()[e]) fail("binarisation not monotone in tau");
    }
  }
  if (worst_row > 1e-12) fail("re-weighting row sum");
  return {bad == 0, "1000 trees, violations " + std::to_string(bad) + (bad ? " (first: " + first + ")" : "") +
                        ", worst row-sum error " + fmt("%.2e", worst_row)};
}

// 3 -----------------------------------------------------------------------

Outcome dft_accuracy() {
  Rng rng(33);
  double worst = 0.0, worst_parseval = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 8 * (1 + rng.below(32));
    std::vector<signal::Complex> x(n);
    for (auto& z : x) z = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto got = signal::dft(x);
    double scale = 0.0, err = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      signal::Complex acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        const double ang = -2.0 * M_PI * static_cast<double>((k * t) % n) / static_cast<double>(n);
        acc += x[t] * signal::Complex(std::cos(ang), std::sin(ang));
      }
      err = std::max(err, std::abs(got[k] - acc));
      scale = std::max(scale, std::abs(acc));
    }
    worst = std::max(worst, err / scale);
    double et = 0.0, ef = 0.0;
    for (const auto& z : x) et += std::norm(z);
    for (const auto& z : got) ef += std::norm(z);
    worst_parseval = std::max(worst_parseval, std::abs(et - ef / static_cast<double>(n)) / et);
  }
  return {worst < 1e-9 && worst_parseval < 1e-9,
          "200 inputs, max rel error " + fmt("%.2e", worst) + ", Parseval " + fmt("%.2e", worst_parseval)};
}

// 4 -----------------------------------------------------------------------

ad::Var project(ad::Var out, std::uint64_t seed) {
  Rng rng(seed ^ 0xabcdefULL);
  return ad::mean(ad::hadamard(out, out.tape().constant(testing::random_tensor(rng, out.shape()))));
}

double end_to_end_error(std::uint64_t seed) {
  const auto tree = hierarchy::LabelTree::from_json_file(testing::source_dir() / "data/trees/cavitation.json");
  Rng rng(seed);
  model::ModelConfig cfg;
  cfg.feature_learner->blocks = {{3, 3, 2}, {4, 3, 2}};
  cfg.gcn.layer_dims = {5, 4};
  const auto counts = hierarchy::count_classes(tree, testing::random_labels(rng, tree));
  const auto pipe = hierarchy::MatrixPipeline::build(tree, counts);
  Matrix emb(tree.class_count(), 3);
  for (auto& v : emb.data()) v = rng.uniform(-1, 1);
  model::HKGModel m(cfg, pipe.rehkcm, emb, tree.node_order(), seed);

  const std::size_t batch = 2;
  const auto input = testing::random_tensor(rng, {batch, 3, 6, 6}, -40.0, 40.0);
  ad::Tensor targets({batch, tree.class_count()});
  const auto leaves = tree.leaves();
  for (std::size_t b = 0; b < batch; ++b) {
    const auto y = hierarchy::label_vector(tree, leaves[rng.below(leaves.size())]);
    std::copy(y.begin(), y.end(), targets.data() + b * y.size());
  }
  auto loss = [&] {
    ad::Tape tape;
    return ad::bce_with_logits(model::HKGModel::scores(m.features(tape, input), m.classifier(tape)), targets)
        .value()[0];
  };
  m.zero_grad();
  {
    ad::Tape tape;
    tape.backward(
        ad::bce_with_logits(model::HKGModel::scores(m.features(tape, input), m.classifier(tape)), targets));
  }
  double worst = 0.0;
  for (auto& p : m.parameters()) {
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value[i];
      p.value[i] = orig + 1e-5;
      const double up = loss();
      p.value[i] = orig - 1e-5;
      const double down = loss();
      p.value[i] = orig;
      const double numeric = (up - down) / 2e-5;
      const double a = p.grad[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}));
    }
  }
  return worst;
}

Outcome gradient_checks() {
  using testing::gradient_error;
  using testing::random_tensor;
  using V = std::vector<ad::Var>;
  struct Check {
    const char* name;
    std::function<double(Rng&, std::uint64_t)> run;
  };
  const std::vector<Check> checks{
      {"matmul",
       [](Rng& r, std::uint64_t s) {
         return gradient_error({random_tensor(r, {3, 4}), random_tensor(r, {4, 2})},
                               [s](ad::Tape&, const V& v) { return project(ad::matmul(v[0], v[1]), s); });
       }},
      {"transpose",
       [](Rng& r, std::uint64_t s) {
         return gradient_error({random_tensor(r, {3, 5})},
                               [s](ad::Tape&, const V& v) { return project(ad::transpose(v[0]), s); });
       }},
      {"add",
       [](Rng& r, std::uint64_t s) {
         return gradient_error({random_tensor(r, {2, 3}), random_tensor(r, {2, 3})},
                               [s](ad::Tape&, const V& v) { return project(ad::add(v[0], v[1]), s); });
       }},
      {"hadamard",
       [](Rng& r, std::uint64_t s) {
         return gradient_error({random_tensor(r, {2, 3}), random_tensor(r, {2, 3})},
                               [s](ad::Tape&, const V& v) { return project(ad::hadamard(v[0], v[1]), s); });
       }},
      {"scale",
       [](Rng& r, std::uint64_t s) {
         return gradient_error({random_tensor(r, {4})},
                               [s](ad::Tape&, const V& v) { return project(ad::scale(v[0], -1.7), s); });
       }},
      {"leaky_relu",
       [](Rng& r, std::uint64_t s) {
         return gradient_error({random_tensor(r, {3, 3})},
                               [s](ad::Tape&, const V& v) { return project(ad::leaky_relu(v[0], 0.2), s); });
       }},
      {"sigmoid",
       [](Rng& r, std::uint64_t s) {
         return gradient_error({random_tensor(r, {3, 3}, -4, 4)},
                               [s](ad::Tape&, const V& v) { return project(ad::sigmoid(v[0]), s); });
       }},
      {"mean",
       [](Rng& r, std::uint64_t) {
         return gradient_error({random_tensor(r, {2, 5})}, [](ad::Tape&, const V& v) { return ad::mean(v[0]); });
       }},
      {"conv2d",
       [](Rng& r, std::uint64_t s) {
         const std::size_t stride = 1 + s % 2, pad = s % 3 == 0 ? 0 : 1;
         return gradient_error(
             {random_tensor(r, {2, 2, 5, 5}), random_tensor(r, {3, 2, 3, 3}), random_tensor(r, {3})},
             [=](ad::Tape&, const V& v) { return project(ad::conv2d(v[0], v[1], v[2], {stride, pad}), s); });
       }},
      {"global_max_pool",
       [](Rng& r, std::uint64_t s) {
         return gradient_error({random_tensor(r, {2, 3, 3, 4})},
                               [s](ad::Tape&, const V& v) { return project(ad::global_max_pool(v[0]), s); });
       }},
      {"bce_with_logits",
       [](Rng& r, std::uint64_t) {
         ad::Tensor t({3, 4});
         for (auto& x : t.values()) x = r.uniform() < 0.5 ? 0.0 : 1.0;
         return gradient_error({random_tensor(r, {3, 4}, -5, 5)},
                               [t](ad::Tape&, const V& v) { return ad::bce_with_logits(v[0], t); });
       }},
      {"end-to-end loss", [](Rng&, std::uint64_t s) { return end_to_end_error(500 + s); }},
  };
  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : checks) {
    for (std::uint64_t s = 0; s < 50; ++s) {
      Rng rng(1000 + s);
      const double e = c.run(rng, s);
      if (e > worst) {
        worst = e;
        worst_name = c.name;
      }
    }
  }
  return {worst < 1e-4, std::to_string(checks.size()) + " checks x 50 trials, worst rel error " + fmt("%.2e", worst) +
                            " (" + worst_name + ")"};
}

// 5, 6, 9 -----------------------------------------------------------------

struct Desk {
  fs::path root;
  fs::path data;
  cli::RunConfig base;
};

const Desk& desk() {
  static const Desk d = [] {
    Desk out;
    out.root = testing::scratch_dir("acceptance");
    out.data = out.root / "data";
    auto spec = datagen::SyntheticSpec::cavitation_default();
    spec.seed = 1;
    datagen::make_dataset(spec, out.data);
    out.base.data = out.data;
    out.base.tree = testing::source_dir() / "data/trees/cavitation.json";
    out.base.embeddings = testing::source_dir() / "data/embeddings/desk-d8.txt";
    out.base.epochs = 30;
    out.base.seed = 7;
    return out;
  }();
  return d;
}

double train_and_eval(cli::RunConfig cfg, const fs::path& out) {
  cfg.out = out;
  const auto t = cli::run_train(cfg);
  return cli::run_eval(cfg, *t.result.last_checkpoint, out / "splits.json").leaf_accuracy;
}

Outcome desk_end_to_end() {
  const auto& d = desk();
  const double gcn = train_and_eval(d.base, d.root / "gcn");
  auto linear_cfg = d.base;
  linear_cfg.head = "linear";
  const double linear = train_and_eval(linear_cfg, d.root / "linear");
  return {gcn >= 0.9 && gcn >= linear - 0.02,
          "GCN head leaf accuracy " + fmt("%.4f", gcn) + ", linear head " + fmt("%.4f", linear) + " (30 epochs)"};
}

Outcome depth_ablation() {
  const auto& d = desk();
  auto cfg = d.base;
  cfg.epochs = cli::RunConfig{}.epochs;
  cfg.out = d.root / "ablation";
  const auto rows = cli::run_ablation(cfg, "gcn_layers", {"0", "2"}, {1, 2, 3});
  const double zero = rows.at(0).mean_leaf_accuracy, two = rows.at(1).mean_leaf_accuracy;
  return {two >= zero, std::to_string(cfg.epochs) + " epochs, mean leaf accuracy over seeds 1,2,3: 0 layers " +
                           fmt("%.4f", zero) + ", 2 layers " + fmt("%.4f", two)};
}

Outcome determinism() {
  const auto& d = desk();
  auto cfg = d.base;
  cfg.out = d.root / "gcn-again";
  cli::run_train(cfg);
  const fs::path a = d.root / "gcn", b = d.root / "gcn-again";
  std::size_t files = 0, differ = 0;
  for (const auto& e : fs::directory_iterator(a / "checkpoints")) {
    ++files;
    const auto other = b / "checkpoints" / e.path().filename();
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++differ;
  }
  const bool history_same = slurp(a / "history.jsonl") == slurp(b / "history.jsonl");
  return {files == 30 && differ == 0 && history_same,
          std::to_string(files) + " checkpoints compared, " + std::to_string(differ) + " differ; history " +
              (history_same ? "identical" : "differs")};
}

// 7 -----------------------------------------------------------------------

double sweep_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<double> d = scores;
  std::sort(d.begin(), d.end());
  d.erase(std::unique(d.begin(), d.end()), d.end());
  const double pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double neg = static_cast<double>(labels.size()) - pos;
  const double inf = std::numeric_limits<double>::infinity();
  double best_j = -2.0, best_t = 0.0;
  for (std::size_t k = 0; k <= d.size(); ++k) {
    const double t = k == 0 ? -inf : k == d.size() ? inf : std::midpoint(d[k - 1], d[k]);
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (k < d.size() && scores[i] >= d[k]) (labels[i] ? tp : fp) += 1;
    const double j = tp / pos - fp / neg;
    if (j > best_j) {
      best_j = j;
      best_t = t;
    }
  }
  return best_t;
}

Outcome youden_and_prf1() {
  Rng rng(77);
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(99);
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = rng.uniform() < 0.3 ? static_cast<double>(rng.below(10)) / 10.0 : rng.uniform();
      l[i] = rng.uniform() < 0.5;
    }
    l[0] = 1;
    l[n - 1] = 0;
    if (metrics::youden_threshold(s, l) != sweep_oracle(s, l)) ++mismatches;
  }
  const auto r = metrics::prf1({8, 2, 9, 1});
  const bool fixture = std::abs(r.accuracy - 0.85) < 1e-4 && std::abs(r.precision - 0.8) < 1e-4 &&
                       std::abs(r.recall - 0.8889) < 1e-4 && std::abs(r.f1 - 0.8421) < 1e-4;
  return {mismatches == 0 && fixture, "500 instances, " + std::to_string(mismatches) + " mismatches; prf1 " +
                                          fmt("%.4f", r.accuracy) + "/" + fmt("%.4f", r.precision) + "/" +
                                          fmt("%.4f", r.recall) + "/" + fmt("%.4f", r.f1)};
}

// 8 -----------------------------------------------------------------------

Outcome physics_grid() {
  using datagen::FlowRegime;
  // p_v high enough that p_min can sit below it (X_F > X_FZ) and p_d too (X_F > 1).
  const double p_u = 10.0, p_v = 2.0;
  const std::vector<double> p_ds{1.0, 1.6, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5, 8.5, 9.5};
  const std::vector<double> p_mins{0.0, 0.4, 0.8, 1.2, 1.6, p_v, 2.6, 3.4, 4.5, 6.0};
  std::size_t points = 0, wrong = 0, equal_boundary = 0, flashing = 0;
  std::map<FlowRegime, std::size_t> seen;
  for (double p_d : p_ds) {
    for (double p_min : p_mins) {
      ++points;
      const auto k = datagen::cavitation_coefficients({p_u, p_d, p_min, p_v});
      const double x_fz = (p_u - p_d) / (p_u - p_min), x_f = (p_u - p_d) / (p_u - p_v);
      if (k.x_fz != x_fz || k.x_f != x_f) ++wrong;
      FlowRegime expected;
      if (x_f > 1.0) {
        expected = FlowRegime::flashing;
      } else if (std::abs(x_f - x_fz) <= datagen::kIncipientBand) {
        expected = FlowRegime::incipient;
      } else if (x_f < x_fz) {
        expected = FlowRegime::none;
      } else {
        expected = (x_f - x_fz) <= (2.0 / 3.0) * (1.0 - x_fz) ? FlowRegime::constant : FlowRegime::choked;
      }
      const auto got = datagen::regime(k.x_fz, k.x_f);
      if (got != expected) ++wrong;
      if (p_min == p_v) {
        equal_boundary += k.x_f == k.x_fz;
        if (k.x_f <= 1.0 && got != FlowRegime::incipient) ++wrong;
      }
      flashing += got == FlowRegime::flashing;
      ++seen[got];
    }
  }
  const bool covered = seen.size() == 5;
  return {wrong == 0 && covered && equal_boundary == p_ds.size() && flashing > 0,
          std::to_string(points) + " operating points, " + std::to_string(wrong) + " rule violations, " +
              std::to_string(seen.size()) + " regimes covered, " + std::to_string(equal_boundary) +
              " X_F = X_FZ points"};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments pick criteria by number; none runs all.
  std::vector<bool> chosen(10, argc == 1);
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (n >= 1 && n <= 9) chosen[static_cast<std::size_t>(n)] = true;
  }
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"segment counts", segment_counts},
      {"matrix pipeline oracles", matrix_pipeline},
      {"DFT correctness", dft_accuracy},
      {"gradient checks", gradient_checks},
      {"desk-scale end-to-end", desk_end_to_end},
      {"GCN depth ablation", depth_ablation},
      {"Youden thresholds and prf1", youden_and_prf1},
      {"cavitation physics", physics_grid},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!chosen[i + 1]) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("%s %zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
