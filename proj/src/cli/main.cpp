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

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "hkg/cli.hpp"
#include "hkg/datagen.hpp"
#include "hkg/error.hpp"
#include "hkg/util.hpp"

namespace hkg::cli {

namespace fs = std::filesystem;

namespace {

/// Flag overrides shared by the config-driven commands.
struct Overrides {
  std::optional<fs::path> config;
  std::map<std::string, std::string> flags;
  std::vector<std::string> sets;

  void attach(CLI::App* app, const std::vector<std::string>& keys) {
    app->add_option("--config", config, "JSON run config (flags override it)");
    for (const auto& key : keys) app->add_option("--" + key, flags[key], "override '" + key + "'");
    app->add_option("--set", sets, "override any config key: key=value (repeatable)");
  }

  RunConfig resolve(const CLI::App* app, RunConfig base) const {
    if (config) base = RunConfig::from_file(*config);
    for (const auto& [key, value] : flags)
      if (app->count("--" + key) > 0) base.set(key, value);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      base.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    base.validate();
    return base;
  }
};

const std::vector<std::string> kRunKeys{"data", "tree",         "embeddings", "out",  "seed", "epochs", "batch",
                                        "lr",   "weight_decay", "momentum",   "tau",  "eta",  "c",      "head",
                                        "gcn_dims", "oov"};

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const double v = parse_double(item);
    if (v < 0.0 || v != static_cast<double>(static_cast<std::uint64_t>(v)))
      throw ConfigError("--seeds expects non-negative integers, got '" + item + "'");
    out.push_back(static_cast<std::uint64_t>(v));
  }
  return out;
}

std::optional<fs::path> latest_checkpoint(const fs::path& run_dir) {
  const auto dir = run_dir / "checkpoints";
  if (!fs::is_directory(dir)) return std::nullopt;
  std::optional<fs::path> best;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".hkg" && (!best || e.path().filename() > best->filename())) best = e.path();
  return best;
}

int cmd_gen_data(const std::optional<fs::path>& spec_file, const fs::path& out, std::optional<std::uint64_t> seed,
                 std::optional<std::size_t> streams) {
  auto spec = spec_file ? datagen::SyntheticSpec::from_json_file(*spec_file)
                        : datagen::SyntheticSpec::cavitation_default();
  if (seed) spec.seed = *seed;
  if (streams)
    for (auto& l : spec.leaves) l.streams = *streams;
  spec.validate();
  const auto manifest = datagen::make_dataset(spec, out);
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  std::size_t flashing = 0;
  for (const auto& s : manifest.streams) {
    auto& c = counts[s.leaf];
    (s.split == datagen::Split::train ? c.first : c.second)++;
    if (s.regime == datagen::FlowRegime::flashing) ++flashing;
  }
  std::printf("wrote %zu streams to %s\n", manifest.streams.size(), out.string().c_str());
  for (const auto& [leaf, c] : counts) std::printf("  %-24s train %3zu  test %3zu\n", leaf.c_str(), c.first, c.second);
  if (flashing > 0) std::printf("note: %zu flashing operating point(s) labelled as the choked-flow leaf\n", flashing);
  return kOk;
}

int cmd_build_matrices(const RunConfig& cfg, const std::optional<fs::path>& counts_file) {
  const auto tree = hierarchy::LabelTree::from_json_file(cfg.tree);
  hierarchy::ClassCounts counts;
  if (counts_file) {
    counts = read_counts(tree, *counts_file);
  } else {
    counts = read_counts(tree, cfg.data / "manifest.json");
  }
  const auto m = hierarchy::MatrixPipeline::build(tree, counts, cfg.tau, cfg.eta, cfg.c);
  fs::create_directories(cfg.out);
  m.write_csv(cfg.out);
  std::ofstream(cfg.out / "run.json") << cfg.to_json().dump(2) << '\n';
  std::printf("classes (%zu):", tree.class_count());
  for (std::size_t i = 0; i < tree.class_count(); ++i)
    std::printf(" %s=%llu", tree.name(i).c_str(), static_cast<unsigned long long>(counts.counts[i]));
  std::printf("\ntau %s  eta %s  c %s\nwrote scm, transition, hkcm, bhkcm, rehkcm CSVs to %s\n",
              format_double(cfg.tau).c_str(), format_double(cfg.eta).c_str(), format_double(cfg.c).c_str(),
              cfg.out.string().c_str());
  const auto violations = m.check_invariants(tree);
  if (violations.empty()) {
    std::printf("invariants: all checks passed\n");
    return kOk;
  }
  for (const auto& v : violations) std::printf("invariant violated: %s\n", v.c_str());
  return kInvariantViolation;
}

void print_history(const model::TrainResult& r) {
  for (const auto& h : r.history) {
    std::printf("epoch %3zu  lr %-8s train_loss %.5f  val_loss %.5f  val_leaf_acc %.4f  val_macro_f1 %.4f\n", h.epoch,
                format_double(h.lr).c_str(), h.train_loss, h.val_loss, h.val_leaf_accuracy, h.val_macro_f1);
  }
  if (r.last_checkpoint) std::printf("last checkpoint: %s\n", r.last_checkpoint->string().c_str());
}

int cmd_train(const RunConfig& cfg, const std::optional<fs::path>& resume, const std::optional<std::string>& ablate,
              const std::optional<std::string>& seeds) {
  if (ablate) {
    const auto eq = ablate->find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--ablate expects key=v1,v2,...");
    const std::string key = ablate->substr(0, eq);
    std::vector<std::string> values;
    std::stringstream ss(ablate->substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ','))
      if (!trim(item).empty()) values.push_back(trim(item));
    const auto seed_list = seeds ? parse_seeds(*seeds) : std::vector<std::uint64_t>{cfg.seed};
    const auto rows = run_ablation(cfg, key, values, seed_list);
    std::fputs(format_ablation_table(key, rows).c_str(), stdout);
    return kOk;
  }
  const auto outcome = run_train(cfg, resume);
  print_history(outcome.result);
  return kOk;
}

int cmd_eval(RunConfig cfg, const std::optional<fs::path>& run_dir, std::optional<fs::path> checkpoint,
             std::optional<fs::path> splits) {
  const fs::path base = run_dir ? *run_dir : cfg.out;
  if (!checkpoint) checkpoint = latest_checkpoint(base);
  if (!checkpoint) throw FormatError("no checkpoint given and none found under " + (base / "checkpoints").string());
  if (!splits) splits = base / "splits.json";
  const auto report = run_eval(cfg, *checkpoint, *splits);
  std::fputs(report.to_text().c_str(), stdout);
  std::printf("wrote metrics.json, metrics.txt, leaf_confusion.csv and roc/ to %s\n", cfg.out.string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical knowledge guided fault intensity diagnosis"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic cavitation dataset");
  std::optional<fs::path> spec_file;
  fs::path gen_out = "data/synthetic";
  std::optional<std::uint64_t> gen_seed;
  std::optional<std::size_t> gen_streams;
  gen->add_option("--spec", spec_file, "JSON synthetic spec (defaults to the 4-leaf cavitation recipe)");
  gen->add_option("--out", gen_out, "dataset root");
  gen->add_option("--seed", gen_seed, "override the spec seed");
  gen->add_option("--streams", gen_streams, "streams per leaf");

  auto* mats = app.add_subcommand("build-matrices", "Build and check the correlation matrices");
  Overrides mats_over;
  mats_over.attach(mats, {"data", "tree", "out", "tau", "eta", "c"});
  std::optional<fs::path> counts_file;
  mats->add_option("--counts", counts_file, "JSON {leaf: count} or a dataset manifest (default <data>/manifest.json)");

  auto* train = app.add_subcommand("train", "Train a model");
  Overrides train_over;
  train_over.attach(train, kRunKeys);
  std::optional<fs::path> resume;
  std::optional<std::string> ablate, seeds;
  train->add_option("--resume", resume, "checkpoint to continue from");
  train->add_option("--ablate", ablate, "key=v1,v2,... : one sub-run per value and a summary table");
  train->add_option("--seeds", seeds, "comma-separated seeds to average ablation runs over");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  Overrides eval_over;
  eval_over.attach(eval, kRunKeys);
  std::optional<fs::path> run_dir, checkpoint, splits;
  eval->add_option("--run", run_dir, "training run directory (its run.json is the base config)");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file (default: latest in the run)");
  eval->add_option("--splits", splits, "splits.json (default: the run's)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    if (*gen) return cmd_gen_data(spec_file, gen_out, gen_seed, gen_streams);
    if (*mats) {
      RunConfig base;
      base.out = "runs/matrices";
      return cmd_build_matrices(mats_over.resolve(mats, base), counts_file);
    }
    if (*train) return cmd_train(train_over.resolve(train, RunConfig{}), resume, ablate, seeds);
    if (*eval) {
      RunConfig base;
      if (run_dir) {
        const auto run_json = *run_dir / "run.json";
        if (!fs::exists(run_json)) throw ConfigError("no run.json in " + run_dir->string());
        base = RunConfig::from_file(run_json);
      }
      return cmd_eval(eval_over.resolve(eval, base), run_dir, checkpoint, splits);
    }
  } catch (const TrainingDivergedError& e) {
    std::fprintf(stderr, "error: training diverged: %s\n", e.what());
    if (!e.last_checkpoint().empty()) std::fprintf(stderr, "last good checkpoint: %s\n", e.last_checkpoint().c_str());
    return kDiverged;
  } catch (const TreeMismatchError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kTreeMismatch;
  } catch (const InvariantError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvariantViolation;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kBadInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return kUnexpected;
  }
  return kUnexpected;
}

}  // namespace hkg::cli
