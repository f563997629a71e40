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
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include "hkg/cli.hpp"
#include "hkg/embedding.hpp"
#include "hkg/error.hpp"
#include "hkg/rng.hpp"
#include "hkg/util.hpp"

namespace hkg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string stream_key(const signal::RawStream& s) { return s.leaf_class + "/" + s.stream_id; }

json StreamSplit::to_json() const { return {{"train", train_ids}, {"val", val_ids}, {"test", test_ids}}; }

StreamSplit StreamSplit::from_json(const json& j) {
  StreamSplit s;
  try {
    s.train_ids = j.at("train").get<std::vector<std::string>>();
    s.val_ids = j.at("val").get<std::vector<std::string>>();
    s.test_ids = j.at("test").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("split file: ") + e.what());
  }
  return s;
}

StreamSplit carve_validation(const std::vector<signal::RawStream>& train_streams, double fraction,
                             std::uint64_t seed) {
  std::map<std::string, std::vector<std::string>> by_leaf;
  for (const auto& s : train_streams) by_leaf[s.leaf_class].push_back(stream_key(s));
  StreamSplit out;
  std::uint64_t leaf_no = 0;
  for (auto& [leaf, keys] : by_leaf) {
    std::sort(keys.begin(), keys.end());
    Rng rng(derive_seed(seed, 0xa11dULL + leaf_no++));
    rng.shuffle(keys.begin(), keys.end());
    std::size_t n_val = 0;
    if (keys.size() >= 2) {
      n_val = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(keys.size())));
      n_val = std::clamp<std::size_t>(n_val, 1, keys.size() - 1);
    }
    out.val_ids.insert(out.val_ids.end(), keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(n_val));
    out.train_ids.insert(out.train_ids.end(), keys.begin() + static_cast<std::ptrdiff_t>(n_val), keys.end());
  }
  std::sort(out.train_ids.begin(), out.train_ids.end());
  std::sort(out.val_ids.begin(), out.val_ids.end());
  return out;
}

model::Dataset build_dataset(const std::vector<signal::RawStream>& streams, const std::vector<std::string>& ids,
                             const hierarchy::LabelTree& tree, const signal::PreprocessConfig& pre) {
  std::map<std::string, const signal::RawStream*> index;
  for (const auto& s : streams) index[stream_key(s)] = &s;
  std::vector<const signal::RawStream*> chosen;
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw LookupError("stream '" + id + "' not found in the dataset");
    chosen.push_back(it->second);
  }
  std::vector<std::vector<signal::Spectrogram>> parts(chosen.size());
  parallel_for(chosen.size(), [&](std::size_t i) { parts[i] = signal::preprocess(*chosen[i], pre); });
  std::vector<signal::Spectrogram> specs;
  for (auto& p : parts)
    for (auto& s : p) specs.push_back(std::move(s));
  return model::make_dataset(specs, tree);
}

hierarchy::ClassCounts stream_counts(const hierarchy::LabelTree& tree, const std::vector<signal::RawStream>& streams,
                                     const std::vector<std::string>& ids) {
  std::map<std::string, const signal::RawStream*> index;
  for (const auto& s : streams) index[stream_key(s)] = &s;
  std::vector<std::size_t> labels;
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw LookupError("stream '" + id + "' not found in the dataset");
    labels.push_back(tree.leaf_index(it->second->leaf_class));
  }
  return hierarchy::count_classes(tree, labels);
}

hierarchy::ClassCounts read_counts(const hierarchy::LabelTree& tree, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read counts file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  std::vector<std::size_t> labels;
  if (j.contains("streams") && j["streams"].is_array()) {
    for (const auto& s : j["streams"])
      if (s.value("split", "") == "train") labels.push_back(tree.leaf_index(s.at("leaf").get<std::string>()));
    return hierarchy::count_classes(tree, labels);
  }
  if (!j.is_object()) throw FormatError(path.string() + ": expected {\"leaf\": count, ...} or a dataset manifest");
  for (const auto& [leaf, n] : j.items()) {
    if (!n.is_number_integer() || n.get<std::int64_t>() < 0)
      throw FormatError(path.string() + ": count for '" + leaf + "' must be a non-negative integer");
    labels.insert(labels.end(), n.get<std::size_t>(), tree.leaf_index(leaf));
  }
  return hierarchy::count_classes(tree, labels);
}

namespace {

Matrix load_embeddings(const RunConfig& cfg, const hierarchy::LabelTree& tree) {
  const auto table = embedding::parse_embedding_file(cfg.embeddings);
  return embedding::class_embeddings(tree, table, embedding::parse_oov_policy(cfg.oov)).matrix;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out << text;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> list_stream_keys(const fs::path& root) {
  std::vector<std::string> keys;
  if (!fs::is_directory(root)) return keys;
  for (const auto& leaf : fs::directory_iterator(root)) {
    if (!leaf.is_directory()) continue;
    for (const auto& f : fs::directory_iterator(leaf.path()))
      if (f.is_regular_file() && f.path().extension() == ".csv")
        keys.push_back(leaf.path().filename().string() + "/" + f.path().stem().string());
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace

model::HKGModel make_model(const RunConfig& cfg, const hierarchy::LabelTree& tree,
                           const hierarchy::MatrixPipeline& matrices) {
  return model::HKGModel(cfg.model_config(), matrices.rehkcm, load_embeddings(cfg, tree), tree.node_order(), cfg.seed);
}

TrainOutcome run_train(const RunConfig& cfg, const std::optional<fs::path>& resume) {
  cfg.validate();
  const auto tree = hierarchy::LabelTree::from_json_file(cfg.tree);
  const auto train_streams = signal::read_stream_directory(cfg.data / "train");
  if (train_streams.empty()) throw EmptyInputError("no training streams under " + (cfg.data / "train").string());

  TrainOutcome outcome;
  outcome.split = carve_validation(train_streams, cfg.val_fraction, cfg.seed);
  outcome.split.test_ids = list_stream_keys(cfg.data / "test");

  const auto counts = stream_counts(tree, train_streams, outcome.split.train_ids);
  outcome.matrices = hierarchy::MatrixPipeline::build(tree, counts, cfg.tau, cfg.eta, cfg.c);
  const auto violations = outcome.matrices.check_invariants(tree);
  if (!violations.empty()) throw InvariantError("matrix invariant violated: " + violations.front());

  fs::create_directories(cfg.out);
  write_text(cfg.out / "run.json", cfg.to_json().dump(2) + "\n");
  write_text(cfg.out / "splits.json", outcome.split.to_json().dump(2) + "\n");
  outcome.matrices.write_csv(cfg.out / "matrices");

  auto model = make_model(cfg, tree, outcome.matrices);
  std::optional<model::TrainState> state;
  if (resume) {
    const auto ckpt = ad::read_checkpoint(*resume);
    model.load_from(ckpt);
    state = model::TrainState::load_from(ckpt);
  }

  const auto train_set = build_dataset(train_streams, outcome.split.train_ids, tree, cfg.preprocess);
  const auto val_set = build_dataset(train_streams, outcome.split.val_ids, tree, cfg.preprocess);
  outcome.result = model::train(model, tree, train_set, val_set, cfg.train_config(), state);
  return outcome;
}

metrics::MetricsReport run_eval(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& split_file) {
  cfg.validate();
  const auto tree = hierarchy::LabelTree::from_json_file(cfg.tree);
  const auto ckpt = ad::read_checkpoint(checkpoint);

  const auto* order = ckpt.find_text("model/node_order");
  std::string expected;
  for (std::size_t i = 0; i < tree.node_order().size(); ++i) expected += (i ? "\n" : "") + tree.node_order()[i];
  if (order == nullptr || *order != expected) {
    throw TreeMismatchError("checkpoint " + checkpoint.string() + " was trained on a different label tree than " +
                            cfg.tree.string());
  }
  const auto* rehkcm_t = ckpt.find_tensor("model/rehkcm");
  const auto* emb_t = ckpt.find_tensor("model/embeddings");
  if (rehkcm_t == nullptr || emb_t == nullptr || rehkcm_t->rank() != 2 || emb_t->rank() != 2)
    throw FormatError("checkpoint " + checkpoint.string() + " lacks the classifier matrices");
  Matrix rehkcm(rehkcm_t->dim(0), rehkcm_t->dim(1));
  std::copy(rehkcm_t->values().begin(), rehkcm_t->values().end(), rehkcm.data().begin());
  Matrix emb(emb_t->dim(0), emb_t->dim(1));
  std::copy(emb_t->values().begin(), emb_t->values().end(), emb.data().begin());
  model::HKGModel model(cfg.model_config(), rehkcm, emb, tree.node_order(), cfg.seed);
  model.load_from(ckpt);

  const auto split = StreamSplit::from_json(read_json(split_file));
  // Validation streams are read one by one; the fitting part is never opened.
  std::vector<signal::RawStream> val_streams;
  for (const auto& key : split.val_ids) {
    const auto slash = key.find('/');
    if (slash == std::string::npos) throw FormatError("split file: bad stream key '" + key + "'");
    val_streams.push_back(signal::read_stream_csv(cfg.data / "train" / (key + ".csv"), key.substr(0, slash)));
  }
  const auto test_streams = signal::read_stream_directory(cfg.data / "test");
  std::vector<std::string> test_ids;
  for (const auto& s : test_streams) test_ids.push_back(stream_key(s));

  const auto val_set = build_dataset(val_streams, split.val_ids, tree, cfg.preprocess);
  const auto test_set = build_dataset(test_streams, test_ids, tree, cfg.preprocess);
  if (test_set.empty()) throw EmptyInputError("no test segments under " + (cfg.data / "test").string());

  std::vector<std::string> warnings;
  const auto val_eval = model::evaluate(model, tree, val_set);
  const auto thresholds = metrics::fit_thresholds(val_eval.records, tree.class_count(), &warnings);
  const auto test_eval = model::evaluate(model, tree, test_set);
  auto report = metrics::build_report(tree, test_eval.records, thresholds, warnings);

  fs::create_directories(cfg.out);
  write_text(cfg.out / "metrics.json", report.to_json() + "\n");
  write_text(cfg.out / "metrics.txt", report.to_text());
  report.write_leaf_confusion_csv(cfg.out / "leaf_confusion.csv");
  fs::create_directories(cfg.out / "roc");
  metrics::write_roc_csv(cfg.out / "roc", tree, test_eval.records);
  return report;
}

std::vector<AblationRow> run_ablation(const RunConfig& cfg, const std::string& key,
                                      const std::vector<std::string>& values, const std::vector<std::uint64_t>& seeds) {
  if (values.empty()) throw ConfigError("ablation: no values for '" + key + "'");
  if (seeds.empty()) throw ConfigError("ablation: no seeds");
  // Reject bad values before any training starts.
  for (const auto& v : values) {
    RunConfig probe = cfg;
    probe.set(key, v);
    probe.validate();
  }
  std::vector<AblationRow> rows;
  for (const auto& v : values) {
    AblationRow row;
    row.value = v;
    for (auto s : seeds) {
      RunConfig sub = cfg;
      sub.set(key, v);
      sub.seed = s;
      sub.out = cfg.out / (key + "=" + v) / ("seed-" + std::to_string(s));
      const auto trained = run_train(sub);
      if (!trained.result.last_checkpoint) throw ConfigError("ablation: sub-run produced no checkpoint");
      const auto report = run_eval(sub, *trained.result.last_checkpoint, sub.out / "splits.json");
      row.leaf_accuracy.push_back(report.leaf_accuracy);
      row.macro_f1.push_back(report.macro.f1);
    }
    const auto n = static_cast<double>(seeds.size());
    row.mean_leaf_accuracy = std::accumulate(row.leaf_accuracy.begin(), row.leaf_accuracy.end(), 0.0) / n;
    row.mean_macro_f1 = std::accumulate(row.macro_f1.begin(), row.macro_f1.end(), 0.0) / n;
    rows.push_back(std::move(row));
  }

  std::ostringstream csv;
  csv << key << ",seed,leaf_accuracy,macro_f1\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < seeds.size(); ++i)
      csv << r.value << ',' << seeds[i] << ',' << format_double(r.leaf_accuracy[i]) << ','
          << format_double(r.macro_f1[i]) << '\n';
    csv << r.value << ",mean," << format_double(r.mean_leaf_accuracy) << ',' << format_double(r.mean_macro_f1)
        << '\n';
  }
  fs::create_directories(cfg.out);
  write_text(cfg.out / "ablation.csv", csv.str());
  write_text(cfg.out / "ablation.txt", format_ablation_table(key, rows));
  return rows;
}

std::string format_ablation_table(const std::string& key, const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %6s %14s %14s  %s\n", key.c_str(), "seeds", "leaf_acc_mean",
                "macro_f1_mean", "leaf_acc_per_seed");
  out << line;
  for (const auto& r : rows) {
    std::string per;
    for (std::size_t i = 0; i < r.leaf_accuracy.size(); ++i) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s%.4f", i ? " " : "", r.leaf_accuracy[i]);
      per += buf;
    }
    std::snprintf(line, sizeof line, "%-14s %6zu %14.4f %14.4f  %s\n", r.value.c_str(), r.leaf_accuracy.size(),
                  r.mean_leaf_accuracy, r.mean_macro_f1, per.c_str());
    out << line;
  }
  return out.str();
}

}  // namespace hkg::cli
