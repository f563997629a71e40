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
#include <fstream>
#include <functional>
#include <sstream>

#include "hkg/cli.hpp"
#include "hkg/embedding.hpp"
#include "hkg/error.hpp"
#include "hkg/util.hpp"

namespace hkg::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class Kind { text, number, count, counts, texts };

struct Field {
  Kind kind;
  std::function<void(RunConfig&, const json&)> assign;
  std::function<json(const RunConfig&)> read;
};

template <typename T>
T get_as(const std::string& key, const json& v) {
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
        throw ConfigError("config: '" + key + "' must be a non-negative integer");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError("config: '" + key + "' must be a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError("config: '" + key + "' must be a string");
    }
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: '" + key + "' has the wrong type");
  }
}

#define HKG_FIELD(name, kind, type, member)                                                  \
  {                                                                                          \
    name, Field {                                                                            \
      kind, [](RunConfig& c, const json& v) { c.member = get_as<type>(name, v); },           \
          [](const RunConfig& c) { return json(c.member); }                                  \
    }                                                                                        \
  }

#define HKG_PATH(name, member)                                                                       \
  {                                                                                                  \
    name, Field {                                                                                    \
      Kind::text, [](RunConfig& c, const json& v) { c.member = get_as<std::string>(name, v); },      \
          [](const RunConfig& c) { return json(c.member.generic_string()); }                        \
    }                                                                                                \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      HKG_PATH("data", data),
      HKG_PATH("tree", tree),
      HKG_PATH("embeddings", embeddings),
      HKG_PATH("out", out),
      HKG_FIELD("oov", Kind::text, std::string, oov),
      HKG_FIELD("tau", Kind::number, double, tau),
      HKG_FIELD("eta", Kind::number, double, eta),
      HKG_FIELD("c", Kind::number, double, c),
      HKG_FIELD("lr", Kind::number, double, lr),
      HKG_FIELD("momentum", Kind::number, double, momentum),
      HKG_FIELD("weight_decay", Kind::number, double, weight_decay),
      HKG_FIELD("epochs", Kind::count, std::size_t, epochs),
      HKG_FIELD("batch", Kind::count, std::size_t, batch),
      HKG_FIELD("lr_factor", Kind::number, double, lr_factor),
      HKG_FIELD("lr_patience", Kind::count, std::size_t, lr_patience),
      HKG_FIELD("min_lr", Kind::number, double, min_lr),
      HKG_FIELD("augment", Kind::texts, std::vector<std::string>, augment),
      HKG_FIELD("augment_prob", Kind::number, double, augment_prob),
      HKG_FIELD("downsample", Kind::count, std::size_t, preprocess.downsample),
      HKG_FIELD("window_size", Kind::count, std::size_t, preprocess.window_size),
      HKG_FIELD("step_size", Kind::count, std::size_t, preprocess.step_size),
      HKG_FIELD("stft_window", Kind::count, std::size_t, preprocess.stft_window),
      HKG_FIELD("stft_hop", Kind::count, std::size_t, preprocess.stft_hop),
      {"window",
       Field{Kind::text,
             [](RunConfig& c, const json& v) {
               try {
                 c.preprocess.window = signal::parse_window_function(get_as<std::string>("window", v));
               } catch (const ParameterError& e) {
                 throw ConfigError(std::string("config: 'window': ") + e.what());
               }
             },
             [](const RunConfig& c) { return json(std::string(signal::to_string(c.preprocess.window))); }}},
      HKG_FIELD("height", Kind::count, std::size_t, preprocess.height),
      HKG_FIELD("width", Kind::count, std::size_t, preprocess.width),
      HKG_FIELD("cnn_channels", Kind::counts, std::vector<std::size_t>, cnn_channels),
      HKG_FIELD("cnn_kernel", Kind::count, std::size_t, cnn_kernel),
      HKG_FIELD("cnn_stride", Kind::count, std::size_t, cnn_stride),
      HKG_FIELD("gcn_dims", Kind::counts, std::vector<std::size_t>, gcn_dims),
      HKG_FIELD("head", Kind::text, std::string, head),
      HKG_FIELD("seed", Kind::count, std::uint64_t, seed),
      HKG_FIELD("val_fraction", Kind::number, double, val_fraction),
  };
  return table;
}

#undef HKG_FIELD
#undef HKG_PATH

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss{std::string(text)};
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void require(bool ok, const std::string& key, const std::string& message) {
  if (!ok) throw ConfigError("config: '" + key + "' " + message);
}

}  // namespace

json RunConfig::to_json() const {
  json j = json::object();
  for (const auto& [key, field] : fields()) j[key] = field.read(*this);
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  RunConfig cfg;
  for (const auto& [key, value] : j.items()) {
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError("config: unknown key '" + key + "'");
    it->second.assign(cfg, value);
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void RunConfig::set(std::string_view key_view, std::string_view value) {
  const std::string key(key_view);
  if (key == "gcn_layers") {
    std::size_t n = 0;
    try {
      const double v = parse_double(value);
      require(v >= 0.0 && v == std::floor(v), key, "must be a non-negative integer");
      n = static_cast<std::size_t>(v);
    } catch (const FormatError&) {
      throw ConfigError("config: 'gcn_layers' must be a non-negative integer");
    }
    if (n == 0) {
      head = "linear";
    } else {
      head = "gcn";
      gcn_dims.assign(n - 1, 32);
      gcn_dims.push_back(cnn_channels.empty() ? 64 : cnn_channels.back());
    }
    return;
  }
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("config: unknown key '" + key + "'");
  json v;
  switch (it->second.kind) {
    case Kind::text:
      v = std::string(trim(value));
      break;
    case Kind::texts: {
      auto items = split_list(value);
      if (items.size() == 1 && items[0] == "none") items.clear();
      v = items;
      break;
    }
    case Kind::counts: {
      json arr = json::array();
      for (const auto& item : split_list(value)) {
        try {
          arr.push_back(json::parse(item));
        } catch (const json::parse_error&) {
          throw ConfigError("config: '" + key + "' expects comma-separated integers");
        }
      }
      v = arr;
      break;
    }
    case Kind::number:
    case Kind::count:
      try {
        v = json::parse(std::string(trim(value)));
      } catch (const json::parse_error&) {
        throw ConfigError("config: '" + key + "' expects a number, got '" + std::string(value) + "'");
      }
      break;
  }
  it->second.assign(*this, v);
}

void RunConfig::validate() const {
  require(tau > 0.0 && tau <= 1.0, "tau", "must lie in (0, 1], got " + format_double(tau));
  require(eta >= 0.0 && eta <= 1.0, "eta", "must lie in [0, 1], got " + format_double(eta));
  require(c >= 0.0 && std::isfinite(c), "c", "must be a finite value >= 0");
  require(lr >= 0.0 && std::isfinite(lr), "lr", "must be a finite value >= 0");
  require(momentum >= 0.0 && momentum < 1.0, "momentum", "must lie in [0, 1)");
  require(weight_decay >= 0.0 && std::isfinite(weight_decay), "weight_decay", "must be >= 0");
  require(epochs >= 1, "epochs", "must be >= 1");
  require(batch >= 1, "batch", "must be >= 1");
  require(lr_factor > 0.0 && lr_factor <= 1.0, "lr_factor", "must lie in (0, 1]");
  require(lr_patience >= 1, "lr_patience", "must be >= 1");
  require(min_lr >= 0.0, "min_lr", "must be >= 0");
  require(augment_prob >= 0.0 && augment_prob <= 1.0, "augment_prob", "must lie in [0, 1]");
  for (const auto& a : augment) {
    try {
      signal::parse_augmentation(a);
    } catch (const ParameterError&) {
      throw ConfigError("config: 'augment' has unknown operation '" + a + "'");
    }
  }
  try {
    embedding::parse_oov_policy(oov);
  } catch (const ParameterError&) {
    throw ConfigError("config: 'oov' must be strict, skip or zero");
  }
  const auto& p = preprocess;
  require(p.downsample >= 1, "downsample", "must be >= 1");
  require(p.window_size >= 1, "window_size", "must be >= 1");
  require(p.step_size >= 1, "step_size", "must be >= 1");
  require(p.stft_window >= 2, "stft_window", "must be >= 2");
  require(p.stft_window <= p.window_size, "stft_window", "must not exceed window_size");
  require(p.stft_hop >= 1, "stft_hop", "must be >= 1");
  require(p.height >= 1, "height", "must be >= 1");
  require(p.width >= 1, "width", "must be >= 1");
  require(!cnn_channels.empty(), "cnn_channels", "needs at least one block");
  for (auto ch : cnn_channels) require(ch >= 1, "cnn_channels", "entries must be >= 1");
  require(cnn_kernel >= 1 && cnn_kernel % 2 == 1, "cnn_kernel", "must be odd");
  require(cnn_stride >= 1, "cnn_stride", "must be >= 1");
  require(head == "gcn" || head == "linear", "head", "must be gcn or linear");
  if (head == "gcn") {
    require(!gcn_dims.empty(), "gcn_dims", "needs at least one layer (use head=linear for none)");
    for (auto d : gcn_dims) require(d >= 1, "gcn_dims", "entries must be >= 1");
    require(gcn_dims.back() == cnn_channels.back(), "gcn_dims",
            "last width must equal the feature width " + std::to_string(cnn_channels.back()));
  }
  require(val_fraction > 0.0 && val_fraction < 1.0, "val_fraction", "must lie in (0, 1)");
}

model::ModelConfig RunConfig::model_config() const {
  model::ModelConfig m;
  model::FeatureLearnerConfig fl;
  fl.blocks.clear();
  for (auto ch : cnn_channels) fl.blocks.push_back({ch, cnn_kernel, cnn_stride});
  m.feature_learner = fl;
  m.feature_dim = cnn_channels.back();
  m.gcn.layer_dims = gcn_dims;
  m.head = head == "linear" ? model::HeadKind::linear : model::HeadKind::gcn;
  return m;
}

model::TrainConfig RunConfig::train_config() const {
  model::TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch;
  t.lr = lr;
  t.momentum = momentum;
  t.weight_decay = weight_decay;
  t.scheduler.factor = lr_factor;
  t.scheduler.patience = lr_patience;
  t.scheduler.min_lr = min_lr;
  t.seed = seed;
  t.augment.clear();
  for (const auto& a : augment) t.augment.push_back(signal::parse_augmentation(a));
  t.augment_prob = augment_prob;
  t.output_dir = out;
  return t;
}

}  // namespace hkg::cli
