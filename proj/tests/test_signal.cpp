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

#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>

#include "hkg/error.hpp"
#include "hkg/rng.hpp"
#include "hkg/signal.hpp"
#include "support.hpp"

using namespace hkg;
using namespace hkg::signal;

namespace {

std::vector<Complex> naive_dft(const std::vector<Complex>& x) {
  const std::size_t n = x.size();
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    Complex acc = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((t * k) % n) / static_cast<double>(n);
      acc += x[t] * Complex(std::cos(angle), std::sin(angle));
    }
    out[k] = acc;
  }
  return out;
}

double max_rel_error(const std::vector<Complex>& got, const std::vector<Complex>& want) {
  double err = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < got.size(); ++i) {
    err = std::max(err, std::abs(got[i] - want[i]));
    scale = std::max(scale, std::abs(want[i]));
  }
  return err / scale;
}

Spectrogram toy(std::size_t h, std::size_t w, std::vector<double> values, std::size_t channels = 1) {
  Spectrogram s;
  s.channels = channels;
  s.height = h;
  s.width = w;
  s.values = std::move(values);
  return s;
}

}  // namespace

TEST_CASE("segment counts follow floor((M - s_w) / s_s) + 1") {
  CHECK(segment_count(4'687'500, 466'944, 466'944) == 10);
  CHECK(segment_count(39'062'500, 466'944, 466'944) == 83);
  CHECK(segment_count(10, 10, 1) == 1);
  CHECK(segment_count(9, 10, 1) == 0);
  CHECK(segment_count(31'250, 8192, 4096) == 6);
}

TEST_CASE("slide_window cuts full windows only") {
  RawStream s;
  s.sample_rate = 1.0;
  s.stream_id = "x";
  for (int i = 0; i < 10; ++i) s.samples.push_back(i);
  auto one = slide_window(s, 10, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].offset == 0);
  CHECK(one[0].samples == s.samples);

  auto segs = slide_window(s, 4, 3);
  REQUIRE(segs.size() == 3);
  CHECK(segs[2].offset == 6);
  CHECK(segs[2].samples == std::vector<double>{6, 7, 8, 9});
  CHECK(segs[1].parent_stream == "x");
  CHECK_THROWS_AS(slide_window(s, 0, 1), ParameterError);
  CHECK_THROWS_AS(slide_window(s, 4, 0), ParameterError);
  CHECK_THROWS_AS(slide_window(s, 11, 1), EmptyInputError);
}

TEST_CASE("dft of constant and impulse") {
  const std::vector<Complex> ones(4, 1.0);
  const auto a = dft(ones);
  CHECK(std::abs(a[0] - 4.0) < 1e-12);
  for (int k = 1; k < 4; ++k) CHECK(std::abs(a[k]) < 1e-12);

  const std::vector<Complex> impulse{1.0, 0.0, 0.0, 0.0};
  for (const auto& z : dft(impulse)) CHECK(std::abs(z - 1.0) < 1e-12);
}

TEST_CASE("dft matches the definitional sum and satisfies Parseval") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 8 + rng.below(249);
    std::vector<Complex> x(n);
    for (auto& z : x) z = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    const auto got = dft(x);
    CHECK(max_rel_error(got, naive_dft(x)) < 1e-9);

    double time_energy = 0.0, freq_energy = 0.0;
    for (const auto& z : x) time_energy += std::norm(z);
    for (const auto& z : got) freq_energy += std::norm(z);
    CHECK(std::abs(time_energy - freq_energy / static_cast<double>(n)) / time_energy < 1e-9);

    const auto back = inverse_dft(got);
    CHECK(max_rel_error(back, x) < 1e-9);
  }
}

TEST_CASE("dft of a prime length and of empty input") {
  std::vector<Complex> x(31);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.3 * static_cast<double>(i));
  CHECK(max_rel_error(dft(x), naive_dft(x)) < 1e-9);
  CHECK_THROWS_AS(dft(std::vector<Complex>{}), ParameterError);
}

TEST_CASE("stft frame count and zero input") {
  const std::vector<double> zeros(466'944, 0.0);
  const auto spec = stft(zeros, 2048, 512);
  CHECK(spec.rows() == 909);
  CHECK(spec.cols() == 1025);
  bool all_zero = true;
  for (std::size_t r = 0; r < spec.rows(); r += 101)
    for (std::size_t c = 0; c < spec.cols(); ++c) all_zero = all_zero && spec(r, c) == Complex(0.0);
  CHECK(all_zero);
}

TEST_CASE("stft of a bin-centred sinusoid peaks at that bin") {
  std::vector<double> x(512);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::cos(2.0 * std::numbers::pi * 5.0 * static_cast<double>(i) / 64.0);
  const auto mag = magnitude(stft(x, 64, 16));
  REQUIRE(mag.rows() == (512 - 64) / 16 + 1);
  for (std::size_t t = 0; t < mag.rows(); ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < mag.cols(); ++k)
      if (mag(t, k) > mag(t, best)) best = k;
    CHECK(best == 5);
  }
}

TEST_CASE("stft rejects windows longer than the segment") {
  const std::vector<double> x(100, 1.0);
  CHECK_THROWS(stft(x, 128, 32));
  CHECK_THROWS(stft(x, 64, 0));
}

TEST_CASE("log spectrogram levels") {
  Matrix mag(1, 3);  // one frame, three bins
  mag(0, 0) = 10.0;
  mag(0, 1) = 1.0;
  mag(0, 2) = 0.0;
  const auto s = to_log_spectrogram(mag);
  CHECK(s.channels == 3);
  CHECK(s.height == 3);
  CHECK(s.width == 1);
  CHECK(s.at(0, 0, 0) == 0.0);
  CHECK(s.at(0, 1, 0) == doctest::Approx(-10.0).epsilon(1e-12));
  CHECK(s.at(0, 2, 0) == doctest::Approx(-120.0).epsilon(1e-12));
  for (std::size_t y = 0; y < 3; ++y) {
    CHECK(s.at(1, y, 0) == s.at(0, y, 0));
    CHECK(s.at(2, y, 0) == s.at(0, y, 0));
  }
}

TEST_CASE("log spectrogram is frequency by time, max 0 dB and monotone") {
  Rng rng(3);
  Matrix mag(7, 5);  // 7 frames, 5 bins
  for (auto& v : mag.data()) v = rng.uniform(0.0, 3.0);
  const auto s = to_log_spectrogram(mag);
  REQUIRE(s.height == 5);
  REQUIRE(s.width == 7);
  double top = -1e9;
  for (double v : s.values) top = std::max(top, v);
  CHECK(top == 0.0);
  for (std::size_t t = 0; t < 7; ++t)
    for (std::size_t k = 0; k < 5; ++k)
      for (std::size_t t2 = 0; t2 < 7; ++t2)
        for (std::size_t k2 = 0; k2 < 5; ++k2)
          if (mag(t, k) < mag(t2, k2)) CHECK(s.at(0, k, t) <= s.at(0, k2, t2));
}

TEST_CASE("augmentations") {
  Rng rng(5);
  Spectrogram s = toy(4, 6, std::vector<double>(3 * 24), 3);
  for (auto& v : s.values) v = rng.uniform();
  const Augmentation h[] = {Augmentation::flip_h};
  const Augmentation hh[] = {Augmentation::flip_h, Augmentation::flip_h};
  const Augmentation hv[] = {Augmentation::flip_h, Augmentation::flip_v};
  const Augmentation r[] = {Augmentation::rot180};
  CHECK(augment(s, hh).values == s.values);
  CHECK(augment(s, r).values == augment(s, hv).values);
  CHECK(augment(s, h).at(1, 2, 0) == s.at(1, 2, 5));

  const auto t = toy(2, 2, {1, 2, 3, 4});
  const Augmentation v[] = {Augmentation::flip_v};
  CHECK(augment(t, v).values == std::vector<double>{3, 4, 1, 2});
  CHECK(parse_augmentation("rot180") == Augmentation::rot180);
  CHECK_THROWS_AS(parse_augmentation("spin"), ParameterError);
}

TEST_CASE("bilinear resize") {
  const auto src = toy(2, 2, {1, 5, 2, 11});
  const auto up = resize(src, 3, 3);
  const std::vector<double> want{1, 3, 5, 1.5, 4.75, 8, 2, 6.5, 11};
  for (std::size_t i = 0; i < 9; ++i) CHECK(up.values[i] == doctest::Approx(want[i]).epsilon(1e-15));

  Rng rng(9);
  auto img = toy(5, 7, std::vector<double>(35));
  for (auto& v : img.values) v = rng.uniform();
  CHECK(resize(img, 5, 7).values == img.values);

  const auto flat = resize(toy(3, 4, std::vector<double>(12, -7.5)), 9, 2);
  for (double v : flat.values) CHECK(v == doctest::Approx(-7.5).epsilon(1e-15));
}

TEST_CASE("downsample averages blocks") {
  const std::vector<double> x{1, 3, 5, 7, 9};
  CHECK(downsample(x, 2) == std::vector<double>{2, 6});
  CHECK(downsample(x, 1) == x);
  CHECK_THROWS_AS(downsample(x, 0), ParameterError);
}

TEST_CASE("preprocess produces fixed-size three-channel images") {
  RawStream s;
  s.sample_rate = 31250;
  s.leaf_class = "a";
  s.stream_id = "a-0";
  Rng rng(1);
  s.samples.resize(31'250);
  for (auto& v : s.samples) v = rng.normal();
  PreprocessConfig cfg;
  const auto specs = preprocess(s, cfg);
  REQUIRE(specs.size() == 6);
  for (const auto& sp : specs) {
    CHECK(sp.channels == 3);
    CHECK(sp.height == 64);
    CHECK(sp.width == 64);
    CHECK(sp.leaf_class == "a");
    CHECK(sp.source_stream == "a-0");
    for (double v : sp.values) CHECK(v <= 0.0);
  }
  CHECK(specs[3].source_offset == 3 * 4096);
}

TEST_CASE("stream csv round trip and header errors") {
  const auto dir = hkg::testing::scratch_dir("stream-io");
  RawStream s;
  s.sample_rate = 31250;
  s.samples = {0.1, -2.5, 1e-7, 3.0};
  write_stream_csv(dir / "leaf" / "s1.csv", s);
  const auto back = read_stream_csv(dir / "leaf" / "s1.csv", "leaf");
  CHECK(back.samples == s.samples);
  CHECK(back.sample_rate == 31250);
  CHECK(back.stream_id == "s1");
  const auto all = read_stream_directory(dir);
  REQUIRE(all.size() == 1);
  CHECK(all[0].leaf_class == "leaf");

  std::ofstream(dir / "bad.csv") << "0.1\n0.2\n";
  CHECK_THROWS_AS(read_stream_csv(dir / "bad.csv", "x"), FormatError);
  std::ofstream(dir / "bad2.csv") << "# sample_rate=100\n0.1\nabc\n";
  CHECK_THROWS_AS(read_stream_csv(dir / "bad2.csv", "x"), FormatError);
}
