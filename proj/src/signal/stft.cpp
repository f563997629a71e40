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
#include <numbers>
#include <string>

#include "hkg/error.hpp"
#include "hkg/signal.hpp"

namespace hkg::signal {

WindowFunction parse_window_function(std::string_view name) {
  if (name == "hann") return WindowFunction::hann;
  if (name == "hamming") return WindowFunction::hamming;
  if (name == "rect" || name == "rectangular") return WindowFunction::rectangular;
  throw ParameterError("unknown window function '" + std::string(name) + "'");
}

std::string_view to_string(WindowFunction w) {
  switch (w) {
    case WindowFunction::hann: return "hann";
    case WindowFunction::hamming: return "hamming";
    case WindowFunction::rectangular: return "rect";
  }
  return "?";
}

std::vector<double> make_window(WindowFunction w, std::size_t n) {
  std::vector<double> out(n, 1.0);
  if (w == WindowFunction::rectangular) return out;
  const double a0 = w == WindowFunction::hann ? 0.5 : 0.54;
  for (std::size_t i = 0; i < n; ++i) {
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    out[i] = a0 - (1.0 - a0) * std::cos(phase);
  }
  return out;
}

std::size_t segment_count(std::size_t m, std::size_t window, std::size_t step) {
  if (window == 0 || step == 0 || window > m) return 0;
  return (m - window) / step + 1;
}

std::vector<Segment> slide_window(const RawStream& stream, std::size_t s_w, std::size_t s_s) {
  if (s_s == 0) throw ParameterError("slide_window: step size must be positive");
  if (s_w == 0) throw ParameterError("slide_window: window size must be positive");
  const std::size_t m = stream.samples.size();
  if (s_w > m) {
    throw EmptyInputError("slide_window: window of " + std::to_string(s_w) + " samples exceeds stream '" +
                          stream.stream_id + "' of " + std::to_string(m) + " samples");
  }
  const std::size_t k = segment_count(m, s_w, s_s);
  std::vector<Segment> out;
  out.reserve(k);
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t offset = j * s_s;
    const auto first = stream.samples.begin() + static_cast<std::ptrdiff_t>(offset);
    out.push_back({std::vector<double>(first, first + static_cast<std::ptrdiff_t>(s_w)), stream.stream_id, offset});
  }
  return out;
}

ComplexMatrix stft(std::span<const double> samples, std::size_t win_len, std::size_t hop, WindowFunction window) {
  if (win_len == 0) throw ParameterError("stft: window length must be positive");
  if (hop == 0) throw ParameterError("stft: hop must be positive");
  if (win_len > samples.size()) {
    throw ParameterError("stft: window length " + std::to_string(win_len) + " exceeds segment length " +
                         std::to_string(samples.size()));
  }
  const std::size_t frames = segment_count(samples.size(), win_len, hop);
  const std::size_t bins = win_len / 2 + 1;
  const auto taper = make_window(window, win_len);
  ComplexMatrix out(frames, bins);
  std::vector<Complex> frame(win_len);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * hop;
    for (std::size_t n = 0; n < win_len; ++n) frame[n] = samples[start + n] * taper[n];
    const auto spectrum = dft(frame);
    for (std::size_t k = 0; k < bins; ++k) out(t, k) = spectrum[k];
  }
  return out;
}

ComplexMatrix stft(const Segment& segment, std::size_t win_len, std::size_t hop, WindowFunction window) {
  return stft(std::span<const double>(segment.samples), win_len, hop, window);
}

Matrix magnitude(const ComplexMatrix& spectrum) {
  Matrix out(spectrum.rows(), spectrum.cols());
  for (std::size_t r = 0; r < spectrum.rows(); ++r)
    for (std::size_t c = 0; c < spectrum.cols(); ++c) out(r, c) = std::abs(spectrum(r, c));
  return out;
}

std::vector<double> downsample(std::span<const double> samples, std::size_t factor) {
  if (factor == 0) throw ParameterError("downsample: factor must be positive");
  if (factor == 1) return {samples.begin(), samples.end()};
  std::vector<double> out(samples.size() / factor);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < factor; ++j) acc += samples[i * factor + j];
    out[i] = acc / static_cast<double>(factor);
  }
  return out;
}

}  // namespace hkg::signal
