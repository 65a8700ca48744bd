/* Copyright 2026 The MaskSup Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Forward and backward kernels for the layers used by the segmentation
// networks. All kernels work on a single C x H x W tensor; batching is done by
// the caller, and gradients are accumulated (+=) into the supplied buffers.

#ifndef MASKSUP_LAYERS_HPP_
#define MASKSUP_LAYERS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "masksup/blas.hpp"
#include "masksup/tensor.hpp"

namespace masksup::layers {

// Unfolds k x k neighbourhoods (zero padding k/2) into a
// (C*k*k) x (H*W) matrix.
template <typename T>
void Im2Col(const Tensor<T>& in, int k, std::vector<T>& cols) {
  const int c_in = in.channels(), h = in.height(), w = in.width();
  const int pad = k / 2;
  const std::size_t hw = in.plane_size();
  cols.assign(static_cast<std::size_t>(c_in) * k * k * hw, T(0));
  for (int c = 0; c < c_in; ++c) {
    const T* src = in.data() + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = cols.data() + ((c * k + ky) * k + kx) * hw;
        const int dy = ky - pad, dx = kx - pad;
        const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          std::copy(src + sy * w + x0 + dx, src + sy * w + x1 + dx,
                    dst + y * w + x0);
        }
      }
    }
  }
}

// Adjoint of Im2Col: scatters column gradients back onto the input grid.
template <typename T>
void Col2ImAdd(const std::vector<T>& cols, int k, Tensor<T>& grad_in) {
  const int c_in = grad_in.channels(), h = grad_in.height(),
            w = grad_in.width();
  const int pad = k / 2;
  const std::size_t hw = grad_in.plane_size();
  for (int c = 0; c < c_in; ++c) {
    T* dst = grad_in.data() + c * hw;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = cols.data() + ((c * k + ky) * k + kx) * hw;
        const int dy = ky - pad, dx = kx - pad;
        const int x0 = std::max(0, -dx), x1 = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          T* drow = dst + sy * w + dx;
          const T* srow = src + y * w;
          for (int x = x0; x < x1; ++x) drow[x] += srow[x];
        }
      }
    }
  }
}

namespace direct {

// Copies in into a zero-bordered (H+2) x (W+2) buffer per channel.
template <typename T>
void Pad1(const Tensor<T>& in, std::vector<T>& pad) {
  const int c = in.channels(), h = in.height(), w = in.width();
  const std::size_t pw = w + 2, ph = h + 2;
  pad.assign(static_cast<std::size_t>(c) * ph * pw, T(0));
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      std::copy(&in.At(ch, y, 0), &in.At(ch, y, 0) + w,
                &pad[(ch * ph + y + 1) * pw + 1]);
    }
  }
}

// Computes OB output channels starting at o0 of a 3x3 convolution over a
// padded input. Weight layout (c_out, c_in, 3, 3).
template <typename T, int OB>
void ConvRows(const T* pad, int c_in, int h, int w, const T* weight, int o0,
              T* out, std::vector<T>& acc_buf) {
  const std::size_t pw = w + 2, ph = h + 2;
  acc_buf.resize(static_cast<std::size_t>(OB) * w);
  T* acc = acc_buf.data();
  for (int y = 0; y < h; ++y) {
    std::fill(acc, acc + OB * w, T(0));
    for (int c = 0; c < c_in; ++c) {
      for (int ky = 0; ky < 3; ++ky) {
        const T* prow = pad + (c * ph + y + ky) * pw;
        for (int kx = 0; kx < 3; ++kx) {
          const T* __restrict src = prow + kx;
          for (int b = 0; b < OB; ++b) {
            const T wv =
                weight[((static_cast<std::size_t>(o0 + b) * c_in + c) * 3 + ky) *
                           3 + kx];
            T* __restrict a = acc + b * w;
            for (int x = 0; x < w; ++x) a[x] += wv * src[x];
          }
        }
      }
    }
    for (int b = 0; b < OB; ++b) {
      std::copy(acc + b * w, acc + (b + 1) * w,
                out + (static_cast<std::size_t>(o0 + b) * h + y) * w);
    }
  }
}

template <typename T>
void Conv3x3(const std::vector<T>& pad, int c_in, int h, int w,
             const T* weight, int c_out, T* out) {
  std::vector<T> acc;
  int o = 0;
  for (; o + 8 <= c_out; o += 8) {
    ConvRows<T, 8>(pad.data(), c_in, h, w, weight, o, out, acc);
  }
  for (; o + 4 <= c_out; o += 4) {
    ConvRows<T, 4>(pad.data(), c_in, h, w, weight, o, out, acc);
  }
  for (; o < c_out; ++o) {
    ConvRows<T, 1>(pad.data(), c_in, h, w, weight, o, out, acc);
  }
}

// grad_weight[o, c, ky, kx] += sum_{y,x} grad_out[o, y, x] * pad[c, y+ky, x+kx]
template <typename T, int OB>
void WeightGradRows(const T* pad, int c_in, int h, int w, const T* grad_out,
                    int o0, T* grad_weight, std::vector<T>& acc_buf) {
  const std::size_t pw = w + 2, ph = h + 2;
  acc_buf.resize(static_cast<std::size_t>(OB) * 9 * w);
  T* acc = acc_buf.data();
  for (int c = 0; c < c_in; ++c) {
    std::fill(acc, acc + OB * 9 * w, T(0));
    for (int y = 0; y < h; ++y) {
      for (int ky = 0; ky < 3; ++ky) {
        const T* prow = pad + (c * ph + y + ky) * pw;
        for (int kx = 0; kx < 3; ++kx) {
          const T* __restrict src = prow + kx;
          for (int b = 0; b < OB; ++b) {
            const T* __restrict g =
                grad_out + (static_cast<std::size_t>(o0 + b) * h + y) * w;
            T* __restrict a = acc + (b * 9 + ky * 3 + kx) * w;
            for (int x = 0; x < w; ++x) a[x] += g[x] * src[x];
          }
        }
      }
    }
    for (int b = 0; b < OB; ++b) {
      for (int t = 0; t < 9; ++t) {
        const T* a = acc + (b * 9 + t) * w;
        T s = 0;
        for (int x = 0; x < w; ++x) s += a[x];
        grad_weight[(static_cast<std::size_t>(o0 + b) * c_in + c) * 9 + t] += s;
      }
    }
  }
}

template <typename T>
void WeightGrad3x3(const std::vector<T>& pad, int c_in, int h, int w,
                   const T* grad_out, int c_out, T* grad_weight) {
  std::vector<T> acc;
  int o = 0;
  for (; o + 4 <= c_out; o += 4) {
    WeightGradRows<T, 4>(pad.data(), c_in, h, w, grad_out, o, grad_weight, acc);
  }
  for (; o < c_out; ++o) {
    WeightGradRows<T, 1>(pad.data(), c_in, h, w, grad_out, o, grad_weight, acc);
  }
}

}  // namespace direct

// Wide feature maps use the direct kernels; narrow ones go through
// im2col + GEMM, which is faster once the planes are small.
inline bool UseDirect3x3(int k, int width) { return k == 3 && width >= 32; }

// Stride-1 "same" convolution. weight is (c_out, c_in, k, k); bias may be
// empty.
template <typename T>
Tensor<T> Conv2d(const Tensor<T>& in, std::span<const T> weight,
                 std::span<const T> bias, int c_out, int k,
                 std::vector<T>& scratch) {
  const int c_in = in.channels();
  const int hw = static_cast<int>(in.plane_size());
  Tensor<T> out(c_out, in.height(), in.width());
  if (UseDirect3x3(k, in.width())) {
    direct::Pad1(in, scratch);
    direct::Conv3x3(scratch, c_in, in.height(), in.width(), weight.data(),
                    c_out, out.data());
  } else {
    const T* cols = in.data();
    if (k != 1) {
      Im2Col(in, k, scratch);
      cols = scratch.data();
    }
    blas::Gemm<T>(false, false, c_out, hw, c_in * k * k, T(1), weight.data(),
                  cols, T(0), out.data());
  }
  if (!bias.empty()) {
    for (int o = 0; o < c_out; ++o) {
      T* p = out.data() + static_cast<std::size_t>(o) * hw;
      for (int i = 0; i < hw; ++i) p[i] += bias[o];
    }
  }
  return out;
}

// Accumulates weight/bias gradients and, when grad_in is non-null, the input
// gradient.
template <typename T>
void Conv2dBackward(const Tensor<T>& in, std::span<const T> weight,
                    const Tensor<T>& grad_out, int k, std::span<T> grad_weight,
                    std::span<T> grad_bias, Tensor<T>* grad_in,
                    std::vector<T>& scratch) {
  const int c_in = in.channels();
  const int c_out = grad_out.channels();
  const int h = in.height(), w = in.width();
  const int hw = static_cast<int>(in.plane_size());
  const int ckk = c_in * k * k;
  if (!grad_bias.empty()) {
    for (int o = 0; o < c_out; ++o) {
      const T* p = grad_out.data() + static_cast<std::size_t>(o) * hw;
      T s = 0;
      for (int i = 0; i < hw; ++i) s += p[i];
      grad_bias[o] += s;
    }
  }
  if (UseDirect3x3(k, w)) {
    direct::Pad1(in, scratch);
    direct::WeightGrad3x3(scratch, c_in, h, w, grad_out.data(), c_out,
                          grad_weight.data());
    if (grad_in == nullptr) return;
    // The input gradient is a 3x3 convolution of the output gradient with
    // the flipped, channel-transposed kernel.
    std::vector<T> flipped(weight.size());
    for (int o = 0; o < c_out; ++o) {
      for (int c = 0; c < c_in; ++c) {
        for (int t = 0; t < 9; ++t) {
          flipped[(static_cast<std::size_t>(c) * c_out + o) * 9 + (8 - t)] =
              weight[(static_cast<std::size_t>(o) * c_in + c) * 9 + t];
        }
      }
    }
    direct::Pad1(grad_out, scratch);
    Tensor<T> g(c_in, h, w);
    direct::Conv3x3(scratch, c_out, h, w, flipped.data(), c_in, g.data());
    T* dst = grad_in->data();
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g.data()[i];
    return;
  }
  const T* cols = in.data();
  if (k != 1) {
    Im2Col(in, k, scratch);
    cols = scratch.data();
  }
  // dW += dY * cols^T
  blas::Gemm<T>(false, true, c_out, ckk, hw, T(1), grad_out.data(), cols,
                T(1), grad_weight.data());
  if (grad_in == nullptr) return;
  if (k == 1) {
    blas::Gemm<T>(true, false, c_in, hw, c_out, T(1), weight.data(),
                  grad_out.data(), T(1), grad_in->data());
    return;
  }
  std::vector<T> dcols(static_cast<std::size_t>(ckk) * hw);
  blas::Gemm<T>(true, false, ckk, hw, c_out, T(1), weight.data(),
                grad_out.data(), T(0), dcols.data());
  Col2ImAdd(dcols, k, *grad_in);
}

// Largest group count <= max_groups that divides channels.
inline int GroupCount(int channels, int max_groups) {
  for (int g = std::min(channels, max_groups); g > 1; --g) {
    if (channels % g == 0) return g;
  }
  return 1;
}

template <typename T>
struct NormActCache {
  Tensor<T> normalized;      // x-hat, before the affine transform
  std::vector<T> inv_std;    // one per group
  Tensor<T> out;             // post-ReLU output
};

inline constexpr double kNormEps = 1e-5;

// Group normalization with per-channel affine parameters, followed by ReLU.
// Statistics are computed per image, so results do not depend on batch
// composition.
template <typename T>
const Tensor<T>& GroupNormRelu(const Tensor<T>& in, std::span<const T> gamma,
                               std::span<const T> beta, int groups,
                               NormActCache<T>& cache) {
  const int c = in.channels();
  const std::size_t hw = in.plane_size();
  const int per_group = c / groups;
  const std::size_t n = per_group * hw;
  cache.normalized = Tensor<T>(c, in.height(), in.width());
  cache.out = Tensor<T>(c, in.height(), in.width());
  cache.inv_std.assign(groups, T(0));
  for (int g = 0; g < groups; ++g) {
    const T* x = in.data() + g * n;
    T mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += x[i];
    mean /= static_cast<T>(n);
    T var = 0;
    for (std::size_t i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= static_cast<T>(n);
    const T inv = T(1) / std::sqrt(var + static_cast<T>(kNormEps));
    cache.inv_std[g] = inv;
    T* xh = cache.normalized.data() + g * n;
    T* y = cache.out.data() + g * n;
    for (int cc = 0; cc < per_group; ++cc) {
      const int ch = g * per_group + cc;
      for (std::size_t i = 0; i < hw; ++i) {
        const std::size_t j = cc * hw + i;
        xh[j] = (x[j] - mean) * inv;
        const T v = gamma[ch] * xh[j] + beta[ch];
        y[j] = v > T(0) ? v : T(0);
      }
    }
  }
  return cache.out;
}

// Returns the input gradient; accumulates into grad_gamma / grad_beta.
template <typename T>
Tensor<T> GroupNormReluBackward(const Tensor<T>& grad_out,
                                std::span<const T> gamma, int groups,
                                const NormActCache<T>& cache,
                                std::span<T> grad_gamma,
                                std::span<T> grad_beta) {
  const int c = grad_out.channels();
  const std::size_t hw = grad_out.plane_size();
  const int per_group = c / groups;
  const std::size_t n = per_group * hw;
  Tensor<T> grad_in(c, grad_out.height(), grad_out.width());
  std::vector<T> dxhat(n);
  for (int g = 0; g < groups; ++g) {
    const T* dy = grad_out.data() + g * n;
    const T* y = cache.out.data() + g * n;
    const T* xh = cache.normalized.data() + g * n;
    T sum_d = 0, sum_dx = 0;
    for (int cc = 0; cc < per_group; ++cc) {
      const int ch = g * per_group + cc;
      T gsum = 0, bsum = 0;
      for (std::size_t i = 0; i < hw; ++i) {
        const std::size_t j = cc * hw + i;
        const T d = y[j] > T(0) ? dy[j] : T(0);
        bsum += d;
        gsum += d * xh[j];
        dxhat[j] = d * gamma[ch];
        sum_d += dxhat[j];
        sum_dx += dxhat[j] * xh[j];
      }
      grad_gamma[ch] += gsum;
      grad_beta[ch] += bsum;
    }
    const T inv_n = T(1) / static_cast<T>(n);
    const T inv = cache.inv_std[g];
    T* dx = grad_in.data() + g * n;
    for (std::size_t j = 0; j < n; ++j) {
      dx[j] = inv * (dxhat[j] - inv_n * sum_d - xh[j] * inv_n * sum_dx);
    }
  }
  return grad_in;
}

// 2x2 max pooling, stride 2. argmax receives the flat input index chosen for
// each output cell (first maximum wins).
template <typename T>
Tensor<T> MaxPool2(const Tensor<T>& in, std::vector<std::int32_t>& argmax) {
  const int c = in.channels(), h = in.height() / 2, w = in.width() / 2;
  const int in_w = in.width();
  Tensor<T> out(c, h, w);
  argmax.resize(out.size());
  std::size_t o = 0;
  for (int ch = 0; ch < c; ++ch) {
    const std::size_t base = ch * in.plane_size();
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x, ++o) {
        std::size_t best = base + (2 * y) * in_w + 2 * x;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx = base + (2 * y + dy) * in_w + 2 * x + dx;
            if (in.data()[idx] > in.data()[best]) best = idx;
          }
        }
        out.data()[o] = in.data()[best];
        argmax[o] = static_cast<std::int32_t>(best);
      }
    }
  }
  return out;
}

template <typename T>
void MaxPool2Backward(const Tensor<T>& grad_out,
                      const std::vector<std::int32_t>& argmax,
                      Tensor<T>& grad_in) {
  for (std::size_t o = 0; o < grad_out.size(); ++o) {
    grad_in.data()[argmax[o]] += grad_out.data()[o];
  }
}

// Nearest-neighbour 2x upsampling.
template <typename T>
Tensor<T> Upsample2(const Tensor<T>& in) {
  const int c = in.channels(), h = in.height(), w = in.width();
  Tensor<T> out(c, 2 * h, 2 * w);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < 2 * h; ++y) {
      for (int x = 0; x < 2 * w; ++x) {
        out.At(ch, y, x) = in.At(ch, y / 2, x / 2);
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> Upsample2Backward(const Tensor<T>& grad_out) {
  const int c = grad_out.channels(), h = grad_out.height() / 2,
            w = grad_out.width() / 2;
  Tensor<T> grad_in(c, h, w);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < 2 * h; ++y) {
      for (int x = 0; x < 2 * w; ++x) {
        grad_in.At(ch, y / 2, x / 2) += grad_out.At(ch, y, x);
      }
    }
  }
  return grad_in;
}

template <typename T>
Tensor<T> ConcatChannels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ShapeMismatch("concat of " + a.ShapeString() + " and " +
                        b.ShapeString());
  }
  Tensor<T> out(a.channels() + b.channels(), a.height(), a.width());
  std::copy(a.data(), a.data() + a.size(), out.data());
  std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
  return out;
}

// Splits a concatenated gradient back into its two parts.
template <typename T>
void SplitChannels(const Tensor<T>& grad, int first_channels,
                   Tensor<T>& grad_a, Tensor<T>& grad_b) {
  grad_a = Tensor<T>(first_channels, grad.height(), grad.width());
  grad_b = Tensor<T>(grad.channels() - first_channels, grad.height(),
                     grad.width());
  std::copy(grad.data(), grad.data() + grad_a.size(), grad_a.data());
  std::copy(grad.data() + grad_a.size(), grad.data() + grad.size(),
            grad_b.data());
}

template <typename T>
void AddInPlace(Tensor<T>& dst, const Tensor<T>& src) {
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

}  // namespace masksup::layers

#endif  // MASKSUP_LAYERS_HPP_
