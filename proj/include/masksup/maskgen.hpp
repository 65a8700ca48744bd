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

// Free-form occlusion masks built from random streaks and filled holes.

#ifndef MASKSUP_MASKGEN_HPP_
#define MASKSUP_MASKGEN_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "masksup/common.hpp"
#include "masksup/tensor.hpp"

namespace masksup {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool Contains(double v) const { return v >= lo && v <= hi; }
  bool operator==(const Interval&) const = default;
};

struct IntRange {
  int lo = 0;
  int hi = 0;
  bool operator==(const IntRange&) const = default;
};

enum class MaskLevel { kLow, kHigh };

// Masking regime: a named closed band of admissible masked-pixel fractions.
struct MaskRegime {
  MaskLevel level = MaskLevel::kHigh;
  Interval target_band{0.50, 0.75};

  static MaskRegime High() { return {MaskLevel::kHigh, {0.50, 0.75}}; }
  static MaskRegime Low() { return {MaskLevel::kLow, {0.10, 0.35}}; }
  // Arbitrary band, used by robustness sweeps. The level tag is cosmetic.
  static MaskRegime Band(double lo, double hi) {
    return {hi > 0.5 ? MaskLevel::kHigh : MaskLevel::kLow, {lo, hi}};
  }

  bool operator==(const MaskRegime&) const = default;
};

inline std::string ToString(MaskLevel level) {
  return level == MaskLevel::kHigh ? "high" : "low";
}

inline MaskLevel ParseMaskLevel(const std::string& s) {
  if (s == "high" || s == "HIGH") return MaskLevel::kHigh;
  if (s == "low" || s == "LOW") return MaskLevel::kLow;
  throw InvalidArgument("unknown mask regime '" + s + "'");
}

inline MaskRegime RegimeFor(MaskLevel level) {
  return level == MaskLevel::kHigh ? MaskRegime::High() : MaskRegime::Low();
}

// Checks the HIGH/LOW band relationship: HIGH reaches above one half and the
// LOW band sits strictly below it.
inline void ValidateRegimePair(const MaskRegime& low, const MaskRegime& high) {
  if (!(high.target_band.hi > 0.5)) {
    throw InvalidArgument("HIGH band must include fractions above 0.5");
  }
  if (!(low.target_band.hi < high.target_band.lo)) {
    throw InvalidArgument("LOW band must lie strictly below the HIGH band");
  }
}

struct MaskGenConfig {
  IntRange num_strokes_range{4, 40};
  Interval stroke_width_range{3.0, 9.0};
  IntRange num_holes_range{0, 12};
  Interval hole_radius_range{2.0, 8.0};
  // Length of one random-walk segment, in pixels.
  Interval segment_length_range{3.0, 10.0};
  int max_resample_attempts = 200;

  void Validate() const {
    auto bad_int = [](const IntRange& r) { return r.lo < 0 || r.hi < r.lo; };
    auto bad = [](const Interval& r) { return r.lo < 0.0 || r.hi < r.lo; };
    if (bad_int(num_strokes_range) || bad_int(num_holes_range) ||
        bad(stroke_width_range) || bad(hole_radius_range) ||
        bad(segment_length_range)) {
      throw InvalidArgument(
          "mask config intervals must be non-empty with non-negative bounds");
    }
    if (max_resample_attempts < 1) {
      throw InvalidArgument("max_resample_attempts must be >= 1");
    }
  }
};

namespace maskgen_internal {

// Clears every pixel within `radius` of (cx, cy).
inline void StampDisc(HoleMask& mask, double cx, double cy, double radius,
                      std::int64_t& removed) {
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
  const int y1 =
      std::min(mask.height() - 1, static_cast<int>(std::ceil(cy + radius)));
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
  const int x1 =
      std::min(mask.width() - 1, static_cast<int>(std::ceil(cx + radius)));
  const double r2 = radius * radius;
  for (int y = y0; y <= y1; ++y) {
    const double dy = y + 0.5 - cy;
    for (int x = x0; x <= x1; ++x) {
      const double dx = x + 0.5 - cx;
      if (dx * dx + dy * dy <= r2) {
        std::uint8_t& cell = mask.At(y, x);
        removed += cell;
        cell = 0;
      }
    }
  }
}

// Random walk of 8-24 segments; each turn is uniform in +-60 degrees.
inline void DrawStroke(HoleMask& mask, const MaskGenConfig& cfg, Rng& rng,
                       std::int64_t& removed) {
  const double h = mask.height();
  const double w = mask.width();
  double x = rng.Uniform(0.0, w);
  double y = rng.Uniform(0.0, h);
  double angle = rng.Uniform(0.0, 2.0 * std::numbers::pi);
  const double radius =
      0.5 * rng.Uniform(cfg.stroke_width_range.lo, cfg.stroke_width_range.hi);
  const int segments = static_cast<int>(rng.UniformInt(8, 24));
  constexpr double kMaxTurn = std::numbers::pi / 3.0;
  StampDisc(mask, x, y, radius, removed);
  for (int s = 0; s < segments; ++s) {
    angle += rng.Uniform(-kMaxTurn, kMaxTurn);
    const double len = rng.Uniform(cfg.segment_length_range.lo,
                                   cfg.segment_length_range.hi);
    const int steps = std::max(1, static_cast<int>(std::ceil(len * 2.0)));
    const double sx = std::cos(angle) * len / steps;
    const double sy = std::sin(angle) * len / steps;
    for (int i = 0; i < steps; ++i) {
      x += sx;
      y += sy;
      StampDisc(mask, x, y, radius, removed);
    }
    // Reflect off the borders so the walk stays on the canvas.
    if (x < 0 || x >= w) {
      angle = std::numbers::pi - angle;
      x = std::clamp(x, 0.0, w - 1e-9);
    }
    if (y < 0 || y >= h) {
      angle = -angle;
      y = std::clamp(y, 0.0, h - 1e-9);
    }
  }
}

inline void DrawHole(HoleMask& mask, const MaskGenConfig& cfg, Rng& rng,
                     std::int64_t& removed) {
  const double cx = rng.Uniform(0.0, mask.width());
  const double cy = rng.Uniform(0.0, mask.height());
  const double r =
      rng.Uniform(cfg.hole_radius_range.lo, cfg.hole_radius_range.hi);
  StampDisc(mask, cx, cy, r, removed);
}

}  // namespace maskgen_internal

namespace maskgen_internal {
inline std::atomic<std::int64_t> generate_calls{0};
}  // namespace maskgen_internal

// Process-wide number of GenerateMask calls, for instrumentation.
inline std::int64_t MaskGenerationCount() {
  return maskgen_internal::generate_calls.load();
}

// Share of removed (0) cells.
inline double MaskedFraction(const HoleMask& mask) {
  if (mask.size() == 0) return 0.0;
  std::int64_t zeros = 0;
  for (std::uint8_t v : mask) zeros += (v == 0);
  return static_cast<double>(zeros) / static_cast<double>(mask.size());
}

// Draws a free-form mask whose masked fraction lies in regime.target_band.
//
// Each attempt draws a stroke budget and a hole budget from the config
// ranges and a target coverage uniformly inside the band, then composites
// shapes in random order until the coverage reaches the target. Attempts
// that overshoot the band or run out of shapes are discarded and redrawn
// from a derived sub-seed.
inline HoleMask GenerateMask(int height, int width, const MaskRegime& regime,
                             const MaskGenConfig& cfg, std::uint64_t seed) {
  if (height < 8 || width < 8) {
    throw InvalidArgument("mask dimensions must be at least 8x8");
  }
  cfg.Validate();
  maskgen_internal::generate_calls.fetch_add(1, std::memory_order_relaxed);
  const Interval band = regime.target_band;
  if (band.lo < 0.0 || band.hi > 1.0 || band.hi < band.lo) {
    throw InvalidArgument("target band must be a sub-interval of [0, 1]");
  }
  const auto total = static_cast<double>(height) * width;
  for (int attempt = 0; attempt < cfg.max_resample_attempts; ++attempt) {
    Rng rng(DeriveSeed({seed, static_cast<std::uint64_t>(attempt)}));
    HoleMask mask(height, width, 1);
    std::int64_t removed = 0;
    const double target = rng.Uniform(band.lo, band.hi);
    int strokes = static_cast<int>(
        rng.UniformInt(cfg.num_strokes_range.lo, cfg.num_strokes_range.hi));
    int holes = static_cast<int>(
        rng.UniformInt(cfg.num_holes_range.lo, cfg.num_holes_range.hi));
    while (removed / total < target && strokes + holes > 0) {
      const bool stroke = rng.UniformInt(1, strokes + holes) <= strokes;
      if (stroke) {
        maskgen_internal::DrawStroke(mask, cfg, rng, removed);
        --strokes;
      } else {
        maskgen_internal::DrawHole(mask, cfg, rng, removed);
        --holes;
      }
    }
    if (band.Contains(removed / total)) return mask;
  }
  throw CoverageUnreachable(
      "no mask within masked-fraction band [" + std::to_string(band.lo) +
      ", " + std::to_string(band.hi) + "] after " +
      std::to_string(cfg.max_resample_attempts) + " attempts");
}

// Element-wise product of the image with the mask, broadcast over channels.
template <typename T>
Tensor<T> ApplyMask(const Tensor<T>& image, const HoleMask& mask) {
  if (image.height() != mask.height() || image.width() != mask.width()) {
    throw ShapeMismatch("image " + image.ShapeString() + " vs mask " +
                        std::to_string(mask.height()) + "x" +
                        std::to_string(mask.width()));
  }
  Tensor<T> out = image;
  const std::size_t plane = image.plane_size();
  T* dst = out.data();
  for (int c = 0; c < image.channels(); ++c) {
    for (std::size_t i = 0; i < plane; ++i) {
      if (mask[i] == 0) dst[c * plane + i] = T(0);
    }
  }
  return out;
}

}  // namespace masksup

#endif  // MASKSUP_MASKGEN_HPP_
