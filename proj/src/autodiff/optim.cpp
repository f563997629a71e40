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
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>

#include <json.hpp>

#include "hkg/error.hpp"
#include "hkg/optim.hpp"

namespace hkg::ad {

void sgd_step(std::span<Parameter* const> params, OptimizerState& state) {
  if (state.momentum_buffers.size() != params.size()) {
    state.momentum_buffers.clear();
    for (const auto* p : params) state.momentum_buffers.emplace_back(p->value.shape());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = params[i]->grad;
    if (g.shape() != params[i]->value.shape() || state.momentum_buffers[i].shape() != g.shape()) {
      throw ShapeError("sgd_step: gradient or momentum buffer of '" + params[i]->name + "' has shape " +
                       shape_string(g.shape()) + ", parameter has " + shape_string(params[i]->value.shape()));
    }
    for (double v : g.values())
      if (!std::isfinite(v)) throw TrainingDivergedError("non-finite gradient in '" + params[i]->name + "'");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i]->value;
    const auto& g = params[i]->grad;
    auto& v = state.momentum_buffers[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      v[k] = state.momentum * v[k] + g[k] + state.weight_decay * p[k];
      p[k] -= state.lr * v[k];
    }
  }
}

double plateau_step(SchedulerState& state, double metric, double lr) {
  if (metric < state.best_metric) {
    state.best_metric = metric;
    state.epochs_since_improve = 0;
    return lr;
  }
  if (++state.epochs_since_improve >= state.patience) {
    state.epochs_since_improve = 0;
    return std::max(lr * state.factor, state.min_lr);
  }
  return lr;
}

const Tensor* Checkpoint::find_tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

const std::string* Checkpoint::find_text(const std::string& name) const {
  for (const auto& [n, s] : texts)
    if (n == name) return &s;
  return nullptr;
}

namespace {

constexpr char kMagic[4] = {'H', 'K', 'G', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::istream& in, const std::string& where) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int ch = in.get();
    if (ch == std::char_traits<char>::eof()) throw FormatError(where + ": truncated checkpoint");
    value |= static_cast<T>(static_cast<unsigned char>(ch)) << (8 * i);
  }
  return value;
}

std::string get_bytes(std::istream& in, std::uint64_t n, const std::string& where) {
  if (n > (1ULL << 32)) throw FormatError(where + ": implausible record length");
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw FormatError(where + ": truncated checkpoint");
  return s;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write checkpoint " + path.string());
    out.write(kMagic, 4);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size() + ckpt.texts.size()));
    for (const auto& [name, t] : ckpt.tensors) {
      put_le<std::uint8_t>(out, 0);
      put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
      for (auto d : t.shape()) put_le<std::uint64_t>(out, d);
      for (double v : t.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    for (const auto& [name, text] : ckpt.texts) {
      put_le<std::uint8_t>(out, 1);
      put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put_le<std::uint64_t>(out, text.size());
      out.write(text.data(), static_cast<std::streamsize>(text.size()));
    }
    if (!out) throw FormatError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  const std::string where = path.string();
  char magic[4];
  if (!in.read(magic, 4) || !std::equal(magic, magic + 4, kMagic)) throw FormatError(where + ": bad magic, not an HKG1 checkpoint");
  const auto count = get_le<std::uint32_t>(in, where);
  Checkpoint ckpt;
  for (std::uint32_t r = 0; r < count; ++r) {
    const auto kind = get_le<std::uint8_t>(in, where);
    const auto name = get_bytes(in, get_le<std::uint32_t>(in, where), where);
    if (kind == 0) {
      const auto rank = get_le<std::uint32_t>(in, where);
      if (rank > 8) throw FormatError(where + ": implausible tensor rank for '" + name + "'");
      Shape shape(rank);
      for (auto& d : shape) d = get_le<std::uint64_t>(in, where);
      const auto n = shape_size(shape);
      if (n > (1ULL << 28)) throw FormatError(where + ": implausible tensor size for '" + name + "'");
      std::vector<double> values(n);
      for (auto& v : values) v = std::bit_cast<double>(get_le<std::uint64_t>(in, where));
      ckpt.tensors.emplace_back(name, Tensor(std::move(shape), std::move(values)));
    } else if (kind == 1) {
      ckpt.texts.emplace_back(name, get_bytes(in, get_le<std::uint64_t>(in, where), where));
    } else {
      throw FormatError(where + ": unknown record kind " + std::to_string(kind));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(where + ": trailing bytes after last record");
  return ckpt;
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  nlohmann::ordered_json doc;
  doc["tensors"] = nlohmann::ordered_json::object();
  for (const auto& [name, t] : ckpt.tensors) {
    doc["tensors"][name]["shape"] = t.shape();
    doc["tensors"][name]["values"] = std::vector<double>(t.values().begin(), t.values().end());
  }
  doc["texts"] = nlohmann::ordered_json::object();
  for (const auto& [name, s] : ckpt.texts) doc["texts"][name] = s;
  return doc.dump(2);
}

}  // namespace hkg::ad
