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

#pragma once

#include <complex>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hkg/matrix.hpp"

namespace hkg::signal {

using Complex = std::complex<double>;

/// A labeled 1-D recording.
struct RawStream {
  std::vector<double> samples;
  double sample_rate = 0.0;  // Hz
  std::string leaf_class;
  std::string stream_id;
};

/// A fixed-length window cut from a RawStream.
struct Segment {
  std::vector<double> samples;
  std::string parent_stream;
  std::size_t offset = 0;
};

/// frames x bins complex matrix produced by stft().
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  Complex& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const Complex& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Complex> data_;
};

/// Log-magnitude image, channel-major [channel][height][width]. Height runs
/// over frequency bins (F) and width over time frames (T). Values are dB
/// relative to the strongest bin, so every element is <= 0.
struct Spectrogram {
  std::size_t channels = 3;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;
  std::string source_stream;
  std::size_t source_offset = 0;
  std::string leaf_class;

  double& at(std::size_t c, std::size_t y, std::size_t x) { return values[(c * height + y) * width + x]; }
  double at(std::size_t c, std::size_t y, std::size_t x) const { return values[(c * height + y) * width + x]; }
};

enum class WindowFunction { hann, hamming, rectangular };

WindowFunction parse_window_function(std::string_view name);
std::string_view to_string(WindowFunction w);

/// Periodic window of length n.
std::vector<double> make_window(WindowFunction w, std::size_t n);

/// Number of full windows: floor((m - window) / step) + 1, or 0 when the
/// window does not fit.
std::size_t segment_count(std::size_t m, std::size_t window, std::size_t step);

/// Cuts the stream into windows of s_w samples every s_s samples. Trailing
/// samples that do not fill a window are dropped.
std::vector<Segment> slide_window(const RawStream& stream, std::size_t s_w, std::size_t s_s);

/// Discrete Fourier transform X[k] = sum_n x[n] exp(-2 pi i n k / N).
/// Radix-2 for power-of-two lengths, Bluestein's chirp-z otherwise.
std::vector<Complex> dft(std::span<const Complex> x);

/// Inverse transform including the 1/N factor.
std::vector<Complex> inverse_dft(std::span<const Complex> x);

/// Short-time Fourier transform. Row t holds the one-sided spectrum
/// (win_len / 2 + 1 bins) of the windowed frame starting at t * hop.
ComplexMatrix stft(std::span<const double> samples, std::size_t win_len, std::size_t hop,
                   WindowFunction window = WindowFunction::hann);
ComplexMatrix stft(const Segment& segment, std::size_t win_len, std::size_t hop,
                   WindowFunction window = WindowFunction::hann);

/// |z| elementwise, frames x bins.
Matrix magnitude(const ComplexMatrix& spectrum);

/// Default magnitude floor relative to the maximum (-120 dB).
inline constexpr double kLogFloorRatio = 1e-12;

/// 10 log10(mag / max(mag)) with mag clamped at floor_ratio * max(mag),
/// transposed to frequency x time and replicated into three channels.
Spectrogram to_log_spectrogram(const Matrix& mag, double floor_ratio = kLogFloorRatio);

enum class Augmentation { flip_h, flip_v, rot180 };

Augmentation parse_augmentation(std::string_view name);
std::string_view to_string(Augmentation a);

/// flip_h reverses the width (time) axis, flip_v the height (frequency)
/// axis, rot180 both. Operations apply in the given order.
Spectrogram augment(Spectrogram spec, std::span<const Augmentation> ops);

/// Bilinear resampling per channel with corner-aligned sampling grids.
Spectrogram resize(const Spectrogram& spec, std::size_t height, std::size_t width);

/// Box-filter decimation by an integer factor (factor 1 is a copy).
std::vector<double> downsample(std::span<const double> samples, std::size_t factor);

struct PreprocessConfig {
  std::size_t downsample = 1;
  std::size_t window_size = 8192;  // s_w, samples after downsampling
  std::size_t step_size = 4096;    // s_s
  std::size_t stft_window = 2048;
  std::size_t stft_hop = 512;
  WindowFunction window = WindowFunction::hann;
  std::size_t height = 64;
  std::size_t width = 64;
};

/// Full chain: downsample, slide_window, stft, log spectrogram, resize.
std::vector<Spectrogram> preprocess(const RawStream& stream, const PreprocessConfig& config);

// File formats ------------------------------------------------------------

/// Reads `# sample_rate=<Hz>` on line 1 followed by one amplitude per line.
RawStream read_stream_csv(const std::filesystem::path& path, std::string leaf_class);
void write_stream_csv(const std::filesystem::path& path, const RawStream& stream);

/// Reads every `<root>/<leaf_class>/<stream_id>.csv`, sorted by class then id.
std::vector<RawStream> read_stream_directory(const std::filesystem::path& root);

/// Channel 0, row-major (frequency rows, time columns).
void write_spectrogram_csv(const std::filesystem::path& path, const Spectrogram& spec);

/// 8-bit binary PGM of channel 0; the dB range [min, 0] maps onto [0, 255].
void write_spectrogram_pgm(const std::filesystem::path& path, const Spectrogram& spec);

}  // namespace hkg::signal
