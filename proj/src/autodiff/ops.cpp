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

#include "gemm.hpp"
#include "hkg/autodiff.hpp"
#include "hkg/error.hpp"

namespace hkg::ad {

namespace {

[[noreturn]] void shape_mismatch(const char* op, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " + shape_string(b));
}

void require_rank(const char* op, const Var& v, std::size_t rank) {
  if (v.value().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                     shape_string(v.shape()));
  }
}

void accumulate(Tape& tape, std::size_t id, const Tensor& delta) {
  if (!tape.requires_grad(id)) return;
  auto& g = tape.grad(id);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

// Lays out the receptive fields of one image as columns: rows index
// (channel, ky, kx), columns index output positions.
void im2col(const double* img, std::size_t channels, std::size_t h, std::size_t w, std::size_t k, std::size_t stride,
            std::size_t pad, std::size_t ho, std::size_t wo, double* cols) {
  const std::size_t positions = ho * wo;
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* row = cols + ((c * k + ky) * k + kx) * positions;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(h) &&
                                ix < static_cast<std::ptrdiff_t>(w);
            row[oy * wo + ox] = inside ? img[(c * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)] : 0.0;
          }
        }
      }
}

void col2im(const double* cols, std::size_t channels, std::size_t h, std::size_t w, std::size_t k, std::size_t stride,
            std::size_t pad, std::size_t ho, std::size_t wo, double* img) {
  const std::size_t positions = ho * wo;
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* row = cols + ((c * k + ky) * k + kx) * positions;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride + ky) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride + kx) - static_cast<std::ptrdiff_t>(pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            img[(c * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)] += row[oy * wo + ox];
          }
        }
      }
}

}  // namespace

Var matmul(Var a, Var b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.value().dim(0), k = a.value().dim(1), n = b.value().dim(1);
  if (b.value().dim(0) != k) shape_mismatch("matmul", a.shape(), b.shape());
  Tensor out({m, n});
  detail::gemm_acc(false, false, m, n, k, a.value().data(), b.value().data(), out.data());
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib, m, n, k](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) detail::gemm_acc(false, true, m, k, n, g.data(), t.value(ib).data(), t.grad(ia).data());
    if (t.requires_grad(ib)) detail::gemm_acc(true, false, k, n, m, t.value(ia).data(), g.data(), t.grad(ib).data());
  });
}

Var transpose(Var a) {
  require_rank("transpose", a, 2);
  const std::size_t r = a.value().dim(0), c = a.value().dim(1);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.value()[i * c + j];
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, r, c](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
  });
}

Var add(Var a, Var b) {
  if (a.shape() != b.shape()) shape_mismatch("add", a.shape(), b.shape());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor g = t.grad(self);
    accumulate(t, ia, g);
    accumulate(t, ib, g);
  });
}

Var hadamard(Var a, Var b) {
  if (a.shape() != b.shape()) shape_mismatch("hadamard", a.shape(), b.shape());
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) {
      auto& ga = t.grad(ia);
      const auto& vb = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * vb[i];
    }
    if (t.requires_grad(ib)) {
      auto& gb = t.grad(ib);
      const auto& va = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * va[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= factor;
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [ia, factor](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
  });
}

Var leaky_relu(Var x, double slope) {
  Tensor out = x.value();
  for (auto& v : out.values()) v = v > 0.0 ? v : slope * v;
  const auto ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix, slope](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const auto& in = t.value(ix);
    auto& gx = t.grad(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += in[i] > 0.0 ? g[i] : slope * g[i];
  });
}

Var sigmoid(Var x) {
  Tensor out = x.value();
  for (auto& v : out.values()) v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  const auto ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    auto& gx = t.grad(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  if (n == 0) throw ShapeError("mean: empty tensor");
  double acc = 0.0;
  for (double v : x.value().values()) acc += v;
  const auto ix = x.id();
  return x.tape().record(Tensor({1}, {acc / static_cast<double>(n)}), {x}, [ix, n](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0] / static_cast<double>(n);
    auto& gx = t.grad(ix);
    for (auto& v : gx.values()) v += g;
  });
}

Var conv2d(Var x, Var weight, Var bias, Conv2dOptions options) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", weight, 4);
  require_rank("conv2d", bias, 1);
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  const std::size_t batch = xs[0], cin = xs[1], h = xs[2], w = xs[3];
  const std::size_t cout = ws[0], k = ws[2];
  if (ws[1] != cin || ws[3] != k) shape_mismatch("conv2d", xs, ws);
  if (bias.shape()[0] != cout) shape_mismatch("conv2d", ws, bias.shape());
  const std::size_t stride = options.stride, pad = options.padding;
  if (stride == 0) throw ParameterError("conv2d: stride must be positive");
  if (h + 2 * pad < k || w + 2 * pad < k) shape_mismatch("conv2d", xs, ws);
  const std::size_t ho = (h + 2 * pad - k) / stride + 1;
  const std::size_t wo = (w + 2 * pad - k) / stride + 1;
  const std::size_t ckk = cin * k * k, positions = ho * wo;

  Tensor out({batch, cout, ho, wo});
  std::vector<double> cols(ckk * positions);
  for (std::size_t b = 0; b < batch; ++b) {
    im2col(x.value().data() + b * cin * h * w, cin, h, w, k, stride, pad, ho, wo, cols.data());
    double* dst = out.data() + b * cout * positions;
    for (std::size_t co = 0; co < cout; ++co) std::fill_n(dst + co * positions, positions, bias.value()[co]);
    detail::gemm_acc(false, false, cout, positions, ckk, weight.value().data(), cols.data(), dst);
  }

  const auto ix = x.id(), iw = weight.id(), ib = bias.id();
  return x.tape().record(std::move(out), {x, weight, bias},
                         [=](Tape& t, std::size_t self) {
                           const Tensor& g = t.grad(self);
                           const bool need_x = t.requires_grad(ix), need_w = t.requires_grad(iw),
                                      need_b = t.requires_grad(ib);
                           std::vector<double> col_buf(ckk * positions);
                           for (std::size_t b = 0; b < batch; ++b) {
                             const double* gout = g.data() + b * cout * positions;
                             if (need_b) {
                               auto& gb = t.grad(ib);
                               for (std::size_t co = 0; co < cout; ++co)
                                 for (std::size_t p = 0; p < positions; ++p) gb[co] += gout[co * positions + p];
                             }
                             if (need_w) {
                               im2col(t.value(ix).data() + b * cin * h * w, cin, h, w, k, stride, pad, ho, wo,
                                      col_buf.data());
                               detail::gemm_acc(false, true, cout, ckk, positions, gout, col_buf.data(),
                                                t.grad(iw).data());
                             }
                             if (need_x) {
                               std::fill(col_buf.begin(), col_buf.end(), 0.0);
                               detail::gemm_acc(true, false, ckk, positions, cout, t.value(iw).data(), gout,
                                                col_buf.data());
                               col2im(col_buf.data(), cin, h, w, k, stride, pad, ho, wo,
                                      t.grad(ix).data() + b * cin * h * w);
                             }
                           }
                         });
}

Var global_max_pool(Var x) {
  require_rank("global_max_pool", x, 4);
  const auto& s = x.shape();
  const std::size_t batch = s[0], channels = s[1], plane = s[2] * s[3];
  if (plane == 0) throw ShapeError("global_max_pool: empty spatial extent " + shape_string(s));
  Tensor out({batch, channels});
  std::vector<std::size_t> argmax(batch * channels);
  for (std::size_t bc = 0; bc < batch * channels; ++bc) {
    const double* p = x.value().data() + bc * plane;
    std::size_t best = 0;
    for (std::size_t i = 1; i < plane; ++i)
      if (p[i] > p[best]) best = i;
    argmax[bc] = bc * plane + best;
    out[bc] = p[best];
  }
  const auto ix = x.id();
  return x.tape().record(std::move(out), {x}, [ix, argmax = std::move(argmax)](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    auto& gx = t.grad(ix);
    for (std::size_t i = 0; i < argmax.size(); ++i) gx[argmax[i]] += g[i];
  });
}

Var bce_with_logits(Var logits, const Tensor& targets) {
  if (logits.shape() != targets.shape()) shape_mismatch("bce_with_logits", logits.shape(), targets.shape());
  const std::size_t n = targets.size();
  if (n == 0) throw ShapeError("bce_with_logits: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double y = logits.value()[i];
    if (!std::isfinite(y)) throw NumericError("bce_with_logits: non-finite score");
    const double l = targets[i];
    // -[l log s(y) + (1-l) log(1-s(y))] = max(y,0) - l y + log(1 + e^{-|y|})
    acc += std::max(y, 0.0) - l * y + std::log1p(std::exp(-std::abs(y)));
  }
  const auto il = logits.id();
  return logits.tape().record(Tensor({1}, {acc / static_cast<double>(n)}), {logits},
                              [il, targets, n](Tape& t, std::size_t self) {
                                const double g = t.grad(self)[0] / static_cast<double>(n);
                                const auto& y = t.value(il);
                                auto& gy = t.grad(il);
                                for (std::size_t i = 0; i < n; ++i) {
                                  const double s = y[i] >= 0.0 ? 1.0 / (1.0 + std::exp(-y[i]))
                                                               : std::exp(y[i]) / (1.0 + std::exp(y[i]));
                                  gy[i] += g * (s - targets[i]);
                                }
                              });
}

}  // namespace hkg::ad
