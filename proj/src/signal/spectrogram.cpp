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
#include <string>

#include "hkg/error.hpp"
#include "hkg/signal.hpp"

namespace hkg::signal {

Spectrogram to_log_spectrogram(const Matrix& mag, double floor_ratio) {
  double peak = 0.0;
  for (double v : mag.data()) {
    if (!(v >= 0.0)) throw ParameterError("to_log_spectrogram: magnitudes must be nonnegative");
    peak = std::max(peak, v);
  }
  if (!(peak > 0.0)) throw DegenerateInputError("to_log_spectrogram: all magnitudes are zero");

  Spectrogram out;
  out.channels = 3;
  out.height = mag.cols();  // frequency
  out.width = mag.rows();   // time
  out.values.resize(out.channels * out.height * out.width);
  for (std::size_t t = 0; t < out.width; ++t) {
    for (std::size_t f = 0; f < out.height; ++f) {
      const double ratio = std::max(mag(t, f) / peak, floor_ratio);
      out.at(0, f, t) = 10.0 * std::log10(ratio);
    }
  }
  const std::size_t plane = out.height * out.width;
  for (std::size_t c = 1; c < out.channels; ++c)
    std::copy_n(out.values.begin(), plane, out.values.begin() + static_cast<std::ptrdiff_t>(c * plane));
  return out;
}

Augmentation parse_augmentation(std::string_view name) {
  if (name == "flip_h") return Augmentation::flip_h;
  if (name == "flip_v") return Augmentation::flip_v;
  if (name == "rot180") return Augmentation::rot180;
  throw ParameterError("unknown augmentation '" + std::string(name) + "'");
}

std::string_view to_string(Augmentation a) {
  switch (a) {
    case Augmentation::flip_h: return "flip_h";
    case Augmentation::flip_v: return "flip_v";
    case Augmentation::rot180: return "rot180";
  }
  return "?";
}

namespace {

void flip_width(Spectrogram& s) {
  for (std::size_t c = 0; c < s.channels; ++c)
    for (std::size_t y = 0; y < s.height; ++y) {
      auto first = s.values.begin() + static_cast<std::ptrdiff_t>((c * s.height + y) * s.width);
      std::reverse(first, first + static_cast<std::ptrdiff_t>(s.width));
    }
}

void flip_height(Spectrogram& s) {
  for (std::size_t c = 0; c < s.channels; ++c)
    for (std::size_t y = 0; y < s.height / 2; ++y)
      for (std::size_t x = 0; x < s.width; ++x) std::swap(s.at(c, y, x), s.at(c, s.height - 1 - y, x));
}

// Corner-aligned source coordinate for output index i.
double source_coord(std::size_t i, std::size_t in, std::size_t out) {
  if (out == 1) return static_cast<double>(in - 1) / 2.0;
  return static_cast<double>(i * (in - 1)) / static_cast<double>(out - 1);
}

}  // namespace

Spectrogram augment(Spectrogram spec, std::span<const Augmentation> ops) {
  for (auto op : ops) {
    switch (op) {
      case Augmentation::flip_h: flip_width(spec); break;
      case Augmentation::flip_v: flip_height(spec); break;
      case Augmentation::rot180:
        flip_width(spec);
        flip_height(spec);
        break;
    }
  }
  return spec;
}

Spectrogram resize(const Spectrogram& spec, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw ParameterError("resize: target dimensions must be >= 1");
  if (spec.height == 0 || spec.width == 0) throw ParameterError("resize: empty spectrogram");
  if (height == spec.height && width == spec.width) return spec;

  Spectrogram out = spec;
  out.height = height;
  out.width = width;
  out.values.assign(spec.channels * height * width, 0.0);
  for (std::size_t y = 0; y < height; ++y) {
    const double sy = source_coord(y, spec.height, height);
    const auto y0 = static_cast<std::size_t>(std::floor(sy));
    const std::size_t y1 = std::min(y0 + 1, spec.height - 1);
    const double wy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < width; ++x) {
      const double sx = source_coord(x, spec.width, width);
      const auto x0 = static_cast<std::size_t>(std::floor(sx));
      const std::size_t x1 = std::min(x0 + 1, spec.width - 1);
      const double wx = sx - static_cast<double>(x0);
      for (std::size_t c = 0; c < spec.channels; ++c) {
        const double top = (1.0 - wx) * spec.at(c, y0, x0) + wx * spec.at(c, y0, x1);
        const double bottom = (1.0 - wx) * spec.at(c, y1, x0) + wx * spec.at(c, y1, x1);
        out.at(c, y, x) = (1.0 - wy) * top + wy * bottom;
      }
    }
  }
  return out;
}

std::vector<Spectrogram> preprocess(const RawStream& stream, const PreprocessConfig& config) {
  RawStream reduced;
  const RawStream* source = &stream;
  if (config.downsample != 1) {
    reduced.samples = downsample(stream.samples, config.downsample);
    reduced.sample_rate = stream.sample_rate / static_cast<double>(config.downsample);
    reduced.leaf_class = stream.leaf_class;
    reduced.stream_id = stream.stream_id;
    source = &reduced;
  }
  const auto segments = slide_window(*source, config.window_size, config.step_size);
  std::vector<Spectrogram> out;
  out.reserve(segments.size());
  for (const auto& seg : segments) {
    auto spec = to_log_spectrogram(magnitude(stft(seg, config.stft_window, config.stft_hop, config.window)));
    spec.source_stream = seg.parent_stream;
    spec.source_offset = seg.offset;
    spec.leaf_class = stream.leaf_class;
    out.push_back(resize(spec, config.height, config.width));
  }
  return out;
}

}  // namespace hkg::signal
