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

// Segmentation, context and task-similarity losses with analytic gradients
// with respect to the logits.

#ifndef MASKSUP_LOSSES_HPP_
#define MASKSUP_LOSSES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "masksup/common.hpp"
#include "masksup/tensor.hpp"

namespace masksup {

struct LossWeights {
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  double alpha3 = 1.0;

  void Validate() const {
    if (alpha1 < 0 || alpha2 < 0 || alpha3 < 0 || !std::isfinite(alpha1) ||
        !std::isfinite(alpha2) || !std::isfinite(alpha3)) {
      throw InvalidArgument("loss weights must be finite and nonnegative");
    }
  }
  bool operator==(const LossWeights&) const = default;
};

struct LossBundle {
  double total = 0.0;
  double seg = 0.0;
  double context = 0.0;
  double tasksim = 0.0;
  LossWeights weights;
};

namespace losses_internal {

// Per-pixel softmax over the K planes.
template <typename T>
Tensor<T> Softmax(const LogitsMap<T>& logits) {
  const int k = logits.channels();
  const std::size_t hw = logits.plane_size();
  Tensor<T> p(k, logits.height(), logits.width());
  const T* z = logits.data();
  T* out = p.data();
  for (std::size_t i = 0; i < hw; ++i) {
    T m = z[i];
    for (int c = 1; c < k; ++c) m = std::max(m, z[c * hw + i]);
    T s = 0;
    for (int c = 0; c < k; ++c) {
      const T e = std::exp(z[c * hw + i] - m);
      out[c * hw + i] = e;
      s += e;
    }
    for (int c = 0; c < k; ++c) out[c * hw + i] /= s;
  }
  return p;
}

inline void CheckLabels(const LabelMap& gt, int k, const IgnoreLabel& ignore) {
  for (std::int32_t v : gt) {
    if (ignore && v == *ignore) continue;
    if (v < 0 || v >= k) {
      throw LabelOutOfRange("label " + std::to_string(v) +
                            " outside [0, " + std::to_string(k - 1) + "]");
    }
  }
}

}  // namespace losses_internal

template <typename T>
Tensor<T> Softmax(const LogitsMap<T>& logits) {
  return losses_internal::Softmax(logits);
}

// Mean pixel-wise cross-entropy over non-ignored pixels (0 when none).
// When `restrict_to` is given only pixels where it is 0 are scored. If grad
// is non-null, scale * dLoss/dlogits is added to it.
template <typename T>
double CrossEntropy(const LogitsMap<T>& logits, const LabelMap& gt,
                    const IgnoreLabel& ignore, const HoleMask* restrict_to,
                    LogitsMap<T>* grad, double scale) {
  if (logits.height() != gt.height() || logits.width() != gt.width()) {
    throw ShapeMismatch("logits " + logits.ShapeString() + " vs labels " +
                        std::to_string(gt.height()) + "x" +
                        std::to_string(gt.width()));
  }
  if (restrict_to != nullptr && (restrict_to->height() != gt.height() ||
                                 restrict_to->width() != gt.width())) {
    throw ShapeMismatch("restriction mask does not match labels");
  }
  const int k = logits.channels();
  losses_internal::CheckLabels(gt, k, ignore);
  const std::size_t hw = logits.plane_size();
  const T* z = logits.data();
  std::int64_t count = 0;
  for (std::size_t i = 0; i < hw; ++i) {
    if (ignore && gt[i] == *ignore) continue;
    if (restrict_to && (*restrict_to)[i] != 0) continue;
    ++count;
  }
  if (count == 0) return 0.0;
  double sum = 0.0;
  const double coeff = scale / static_cast<double>(count);
  std::vector<double> e(k);
  for (std::size_t i = 0; i < hw; ++i) {
    if (ignore && gt[i] == *ignore) continue;
    if (restrict_to && (*restrict_to)[i] != 0) continue;
    double m = z[i];
    for (int c = 1; c < k; ++c) m = std::max<double>(m, z[c * hw + i]);
    double s = 0.0;
    for (int c = 0; c < k; ++c) {
      e[c] = std::exp(static_cast<double>(z[c * hw + i]) - m);
      s += e[c];
    }
    const int label = gt[i];
    sum += std::log(s) - (static_cast<double>(z[label * hw + i]) - m);
    if (grad != nullptr) {
      T* g = grad->data();
      for (int c = 0; c < k; ++c) {
        const double target = c == label ? 1.0 : 0.0;
        g[c * hw + i] += static_cast<T>(coeff * (e[c] / s - target));
      }
    }
  }
  return sum / static_cast<double>(count);
}

template <typename T>
double SegLoss(const LogitsMap<T>& logits, const LabelMap& gt,
               const IgnoreLabel& ignore = std::nullopt) {
  return CrossEntropy<T>(logits, gt, ignore, nullptr, nullptr, 0.0);
}

// Same contract as SegLoss, applied to the context-branch output.
template <typename T>
double ContextLoss(const LogitsMap<T>& masked_logits, const LabelMap& gt,
                   const IgnoreLabel& ignore = std::nullopt) {
  return CrossEntropy<T>(masked_logits, gt, ignore, nullptr, nullptr, 0.0);
}

// Mean squared difference between the two softmax probability maps, over all
// H*W*K entries. Symmetric; when requested, scale * gradient is added to
// both grad_a and grad_b.
template <typename T>
double TaskSimLoss(const LogitsMap<T>& a, const LogitsMap<T>& b,
                   LogitsMap<T>* grad_a = nullptr,
                   LogitsMap<T>* grad_b = nullptr, double scale = 1.0) {
  if (!a.SameShape(b)) {
    throw ShapeMismatch("task similarity inputs differ: " + a.ShapeString() +
                        " vs " + b.ShapeString());
  }
  const Tensor<T> p = losses_internal::Softmax(a);
  const Tensor<T> q = losses_internal::Softmax(b);
  const std::size_t n = p.size();
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(p.data()[i]) - q.data()[i];
    sum += d * d;
  }
  if (grad_a != nullptr || grad_b != nullptr) {
    const int k = a.channels();
    const std::size_t hw = a.plane_size();
    const double coeff = 2.0 * scale / static_cast<double>(n);
    std::vector<double> g(k);
    for (std::size_t i = 0; i < hw; ++i) {
      for (int c = 0; c < k; ++c) {
        g[c] = coeff * (static_cast<double>(p.data()[c * hw + i]) -
                        q.data()[c * hw + i]);
      }
      // Softmax Jacobian-vector product: dz_c = s_c * (g_c - sum_j g_j s_j).
      if (grad_a != nullptr) {
        double dot = 0.0;
        for (int c = 0; c < k; ++c) dot += g[c] * p.data()[c * hw + i];
        for (int c = 0; c < k; ++c) {
          const double s = p.data()[c * hw + i];
          grad_a->data()[c * hw + i] += static_cast<T>(s * (g[c] - dot));
        }
      }
      if (grad_b != nullptr) {
        double dot = 0.0;
        for (int c = 0; c < k; ++c) dot -= g[c] * q.data()[c * hw + i];
        for (int c = 0; c < k; ++c) {
          const double s = q.data()[c * hw + i];
          grad_b->data()[c * hw + i] += static_cast<T>(s * (-g[c] - dot));
        }
      }
    }
  }
  return sum / static_cast<double>(n);
}

struct LossOptions {
  IgnoreLabel ignore_label;
  // Score the context branch only on removed pixels (requires a mask).
  bool context_masked_pixels_only = false;
  // Evaluate L_tasksim even when alpha3 is zero, for logging.
  bool always_compute_tasksim = true;
};

template <typename T>
struct LossGradients {
  LogitsMap<T> plain;
  LogitsMap<T> masked;
};

// Weighted sum alpha1 * L_seg + alpha2 * L_context + alpha3 * L_tasksim.
// When grads is non-null it receives dTotal/dm_p and dTotal/dm_pm.
template <typename T>
LossBundle TotalLoss(const LogitsMap<T>& m_p, const LogitsMap<T>& m_pm,
                     const LabelMap& gt, const LossWeights& w,
                     const LossOptions& opts = {},
                     const HoleMask* mask = nullptr,
                     LossGradients<T>* grads = nullptr) {
  w.Validate();
  if (!m_p.SameShape(m_pm)) {
    throw ShapeMismatch("branch outputs differ: " + m_p.ShapeString() +
                        " vs " + m_pm.ShapeString());
  }
  if (opts.context_masked_pixels_only && mask == nullptr) {
    throw InvalidArgument("context_masked_pixels_only requires the mask");
  }
  LogitsMap<T>* gp = nullptr;
  LogitsMap<T>* gm = nullptr;
  if (grads != nullptr) {
    grads->plain = LogitsMap<T>(m_p.channels(), m_p.height(), m_p.width());
    grads->masked = LogitsMap<T>(m_p.channels(), m_p.height(), m_p.width());
    gp = &grads->plain;
    gm = &grads->masked;
  }
  LossBundle b;
  b.weights = w;
  b.seg = CrossEntropy<T>(m_p, gt, opts.ignore_label, nullptr, gp, w.alpha1);
  b.context = CrossEntropy<T>(
      m_pm, gt, opts.ignore_label,
      opts.context_masked_pixels_only ? mask : nullptr, gm, w.alpha2);
  if (w.alpha3 > 0.0 || opts.always_compute_tasksim) {
    b.tasksim = TaskSimLoss<T>(m_p, m_pm, w.alpha3 > 0.0 ? gp : nullptr,
                               w.alpha3 > 0.0 ? gm : nullptr, w.alpha3);
  }
  b.total = w.alpha1 * b.seg + w.alpha2 * b.context + w.alpha3 * b.tasksim;
  return b;
}

// Single-branch objective used by the baseline arm: only L_seg is evaluated
// and the context/task-similarity components are exactly zero.
template <typename T>
LossBundle BaselineLoss(const LogitsMap<T>& m_p, const LabelMap& gt,
                        const LossWeights& w, const IgnoreLabel& ignore,
                        LogitsMap<T>* grad = nullptr) {
  w.Validate();
  if (grad != nullptr) {
    *grad = LogitsMap<T>(m_p.channels(), m_p.height(), m_p.width());
  }
  LossBundle b;
  b.weights = w;
  b.seg = CrossEntropy<T>(m_p, gt, ignore, nullptr, grad, w.alpha1);
  b.total = w.alpha1 * b.seg;
  return b;
}

}  // namespace masksup

#endif  // MASKSUP_LOSSES_HPP_
