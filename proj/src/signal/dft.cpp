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
#include <cstdint>
#include <map>
#include <numbers>
#include <vector>

#include "hkg/error.hpp"
#include "hkg/signal.hpp"

namespace hkg::signal {
namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// exp(-2 pi i k / n) for k < n / 2, cached per thread and length.
const std::vector<Complex>& twiddles(std::size_t n) {
  thread_local std::map<std::size_t, std::vector<Complex>> cache;
  auto& table = cache[n];
  if (table.empty() && n >= 2) {
    table.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
      table[k] = {std::cos(angle), std::sin(angle)};
    }
  }
  return table;
}

// In-place iterative radix-2 transform, forward sign, no scaling.
void fft_radix2(std::vector<Complex>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  const auto& w = twiddles(n);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t stride = n / len;
    for (std::size_t start = 0; start < n; start += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const Complex u = a[start + k];
        const Complex v = a[start + k + half] * w[k * stride];
        a[start + k] = u + v;
        a[start + k + half] = u - v;
      }
    }
  }
}

// Chirp-z for arbitrary n: X[k] = c[k] * sum_m (x[m] c[m]) conj(c[k - m]),
// c[m] = exp(-i pi m^2 / n). The convolution runs through radix-2 FFTs.
std::vector<Complex> fft_bluestein(std::span<const Complex> x) {
  const std::size_t n = x.size();
  const std::size_t m = next_power_of_two(2 * n - 1);
  std::vector<Complex> chirp(n);
  const std::uint64_t two_n = 2 * static_cast<std::uint64_t>(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle small and accurate for large k.
    const std::uint64_t k2 = (static_cast<std::uint64_t>(k) * k) % two_n;
    const double angle = -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
    chirp[k] = {std::cos(angle), std::sin(angle)};
  }
  std::vector<Complex> a(m), b(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
  b[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) {
    b[k] = std::conj(chirp[k]);
    b[m - k] = std::conj(chirp[k]);
  }
  fft_radix2(a);
  fft_radix2(b);
  for (std::size_t k = 0; k < m; ++k) a[k] = std::conj(a[k] * b[k]);
  fft_radix2(a);  // inverse via conjugation
  const double scale = 1.0 / static_cast<double>(m);
  std::vector<Complex> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = std::conj(a[k]) * scale * chirp[k];
  return out;
}

}  // namespace

std::vector<Complex> dft(std::span<const Complex> x) {
  if (x.empty()) throw ParameterError("dft: empty input");
  if (is_power_of_two(x.size())) {
    std::vector<Complex> a(x.begin(), x.end());
    fft_radix2(a);
    return a;
  }
  return fft_bluestein(x);
}

std::vector<Complex> inverse_dft(std::span<const Complex> x) {
  if (x.empty()) throw ParameterError("inverse_dft: empty input");
  std::vector<Complex> conj_in(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) conj_in[i] = std::conj(x[i]);
  auto out = dft(conj_in);
  const double scale = 1.0 / static_cast<double>(x.size());
  for (auto& v : out) v = std::conj(v) * scale;
  return out;
}

}  // namespace hkg::signal
