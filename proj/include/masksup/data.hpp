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

// Synthetic segmentation datasets.
//
// Two generators cover the regimes the framework is exercised on:
//  * binary shapes: textured background with 1-3 irregular blobs whose
//    boundary can be made ambiguous by blending the two textures;
//  * multi-class scenes: layered overlapping shapes whose classes are drawn
//    from a geometric distribution, giving a controllable class imbalance.
// Every sample keeps the shape layout it was drawn from so the label map can
// be re-rendered independently.

#ifndef MASKSUP_DATA_HPP_
#define MASKSUP_DATA_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "masksup/common.hpp"
#include "masksup/tensor.hpp"

namespace masksup {

enum class ShapeKind { kFill, kBlob, kRect, kEllipse };

// One painted layer. Later layers overwrite earlier ones.
struct Shape {
  ShapeKind kind = ShapeKind::kFill;
  std::int32_t label = 0;
  double cx = 0, cy = 0;
  double rx = 0, ry = 0;  // semi-axes (rect: half extents)
  double rotation = 0;
  // Radial harmonics for blobs: r(t) = 1 + sum amp[i] * sin((i+2) t + phase[i]).
  std::array<double, 3> amp{};
  std::array<double, 3> phase{};

  // Signed distance proxy in pixels, positive inside.
  double Inside(double x, double y) const {
    if (kind == ShapeKind::kFill) return 1e9;
    const double c = std::cos(rotation), s = std::sin(rotation);
    const double dx = x - cx, dy = y - cy;
    const double u = c * dx + s * dy;
    const double v = -s * dx + c * dy;
    if (kind == ShapeKind::kRect) {
      return std::min(rx - std::abs(u), ry - std::abs(v));
    }
    const double nu = u / rx, nv = v / ry;
    const double rho = std::sqrt(nu * nu + nv * nv);
    double radius = 1.0;
    if (kind == ShapeKind::kBlob) {
      const double t = std::atan2(nv, nu);
      for (int i = 0; i < 3; ++i) radius += amp[i] * std::sin((i + 2) * t + phase[i]);
    }
    return (radius - rho) * std::min(rx, ry);
  }
};

struct SceneLayout {
  std::vector<Shape> shapes;
};

// Rasterizes a layout at pixel centres.
inline LabelMap RenderLabels(const SceneLayout& layout, int height, int width) {
  LabelMap out(height, width, 0);
  for (const Shape& s : layout.shapes) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        if (s.Inside(x + 0.5, y + 0.5) >= 0.0) out.At(y, x) = s.label;
      }
    }
  }
  return out;
}

struct Sample {
  ImageTensor image;
  LabelMap label;
  std::string id;
  SceneLayout layout;
};

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
  int num_classes = 2;
  IgnoreLabel ignore_label;
  std::vector<double> class_frequencies;

  std::size_t size() const { return train.size() + val.size() + test.size(); }
};

// Split sizes for n items: train = floor(0.7 n), val = floor(0.15 n),
// test = the remainder.
struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0;
};

inline SplitCounts SplitSizes(std::size_t n) {
  SplitCounts c;
  c.train = n * 70 / 100;
  c.val = n * 15 / 100;
  c.test = n - c.train - c.val;
  return c;
}

// Per-class pixel fractions over non-ignored pixels of every split.
inline std::vector<double> ClassFrequencies(const DatasetSplit& d) {
  std::vector<double> counts(d.num_classes, 0.0);
  double total = 0.0;
  for (const auto* part : {&d.train, &d.val, &d.test}) {
    for (const Sample& s : *part) {
      for (std::int32_t v : s.label) {
        if (d.ignore_label && v == *d.ignore_label) continue;
        if (v >= 0 && v < d.num_classes) {
          counts[v] += 1.0;
          total += 1.0;
        }
      }
    }
  }
  if (total > 0) {
    for (double& c : counts) c /= total;
  }
  return counts;
}

// Distributes samples (already in their final order) 70/15/15.
inline DatasetSplit AssembleSplit(std::vector<Sample> samples, int num_classes,
                                  IgnoreLabel ignore = std::nullopt) {
  DatasetSplit d;
  d.num_classes = num_classes;
  d.ignore_label = ignore;
  const SplitCounts c = SplitSizes(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& dst = i < c.train ? d.train : (i < c.train + c.val ? d.val : d.test);
    dst.push_back(std::move(samples[i]));
  }
  d.class_frequencies = ClassFrequencies(d);
  return d;
}

namespace data_internal {

struct Rgb {
  double r = 0, g = 0, b = 0;
};

// Sum of a few oriented gratings; smooth texture with zero-ish mean.
struct Texture {
  std::array<double, 3> freq{};
  std::array<double, 3> angle{};
  std::array<double, 3> phase{};
  double amplitude = 0.0;

  static Texture Random(Rng& rng, double fmin, double fmax, double amplitude) {
    Texture t;
    for (int i = 0; i < 3; ++i) {
      t.freq[i] = rng.Uniform(fmin, fmax);
      t.angle[i] = rng.Uniform(0.0, std::numbers::pi);
      t.phase[i] = rng.Uniform(0.0, 2.0 * std::numbers::pi);
    }
    t.amplitude = amplitude;
    return t;
  }

  double At(double x, double y) const {
    double v = 0.0;
    for (int i = 0; i < 3; ++i) {
      v += std::sin(freq[i] * (std::cos(angle[i]) * x + std::sin(angle[i]) * y) +
                    phase[i]);
    }
    return amplitude * v / 3.0;
  }
};

inline float Clamp01(double v) {
  return static_cast<float>(std::clamp(v, 0.0, 1.0));
}

inline Rgb HueColor(double hue, double sat, double val) {
  // HSV -> RGB with hue in [0, 1).
  const double h6 = (hue - std::floor(hue)) * 6.0;
  const int sector = static_cast<int>(h6) % 6;
  const double f = h6 - std::floor(h6);
  const double p = val * (1 - sat), q = val * (1 - sat * f),
               t = val * (1 - sat * (1 - f));
  switch (sector) {
    case 0: return {val, t, p};
    case 1: return {q, val, p};
    case 2: return {p, val, t};
    case 3: return {p, q, val};
    case 4: return {t, p, val};
    default: return {val, p, q};
  }
}

inline Shape RandomBlob(Rng& rng, int size, std::int32_t label) {
  Shape s;
  s.kind = ShapeKind::kBlob;
  s.label = label;
  const double r0 = rng.Uniform(0.08, 0.22) * size;
  s.rx = r0 * rng.Uniform(0.75, 1.25);
  s.ry = r0 * rng.Uniform(0.75, 1.25);
  s.cx = rng.Uniform(0.15, 0.85) * size;
  s.cy = rng.Uniform(0.15, 0.85) * size;
  s.rotation = rng.Uniform(0.0, std::numbers::pi);
  for (int i = 0; i < 3; ++i) {
    s.amp[i] = rng.Uniform(0.0, 0.12);
    s.phase[i] = rng.Uniform(0.0, 2.0 * std::numbers::pi);
  }
  return s;
}

// Draws a class index with P(k) proportional to imbalance^-k.
inline std::int32_t GeometricClass(Rng& rng, int k, double imbalance) {
  double total = 0.0;
  for (int c = 0; c < k; ++c) total += std::pow(imbalance, -c);
  double u = rng.Uniform() * total;
  for (int c = 0; c < k; ++c) {
    u -= std::pow(imbalance, -c);
    if (u < 0.0) return c;
  }
  return k - 1;
}

inline bool HasAllClasses(const LabelMap& label, int k) {
  std::vector<bool> seen(k, false);
  for (std::int32_t v : label) seen[v] = true;
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

}  // namespace data_internal

// Binary dataset: textured background plus 1-3 blob-shaped regions of
// interest. `ambiguity` in [0, 1] widens a soft transition band between the
// foreground and background textures and pulls their mean colours together.
inline DatasetSplit SynthBinaryShapes(int n, int size, double ambiguity,
                                      std::uint64_t seed) {
  using namespace data_internal;
  if (n < 10) throw InvalidArgument("dataset needs at least 10 samples");
  if (size < 8) throw InvalidArgument("image size must be >= 8");
  if (ambiguity < 0.0 || ambiguity > 1.0) {
    throw InvalidArgument("ambiguity must lie in [0, 1]");
  }
  std::vector<Sample> samples;
  samples.reserve(n);
  for (int i = 0; i < n; ++i) {
    Sample smp;
    smp.id = "binary-" + std::to_string(i);
    for (std::uint64_t attempt = 0;; ++attempt) {
      Rng rng(DeriveSeed({seed, 0xb1ULL, static_cast<std::uint64_t>(i), attempt}));
      SceneLayout layout;
      layout.shapes.push_back(Shape{});  // background fill, class 0
      const int blobs = static_cast<int>(rng.UniformInt(1, 3));
      for (int b = 0; b < blobs; ++b) layout.shapes.push_back(RandomBlob(rng, size, 1));
      LabelMap label = RenderLabels(layout, size, size);
      if (!HasAllClasses(label, 2)) continue;

      // Appearance: pink-ish background, purple-ish foreground, both
      // jittered per image.
      const Rgb bg = HueColor(rng.Uniform(0.90, 1.02), rng.Uniform(0.25, 0.45),
                              rng.Uniform(0.75, 0.92));
      const Rgb fg = HueColor(rng.Uniform(0.72, 0.84), rng.Uniform(0.35, 0.60),
                              rng.Uniform(0.35, 0.55));
      const Texture bg_tex = Texture::Random(rng, 0.15, 0.45, 0.10);
      const Texture fg_tex = Texture::Random(rng, 0.6, 1.2, 0.14);
      // Colour contrast shrinks as ambiguity grows.
      const double pull = 0.45 * ambiguity;
      const Rgb fg_mix{fg.r + pull * (bg.r - fg.r), fg.g + pull * (bg.g - fg.g),
                       fg.b + pull * (bg.b - fg.b)};
      const double width = 0.05 + 6.0 * ambiguity;

      ImageTensor img(3, size, size);
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          double d = -1e9;
          for (std::size_t s = 1; s < layout.shapes.size(); ++s) {
            d = std::max(d, layout.shapes[s].Inside(x + 0.5, y + 0.5));
          }
          // Foreground weight: hard step at ambiguity 0, a logistic ramp of
          // growing width otherwise.
          const double wf = 1.0 / (1.0 + std::exp(-d / width));
          const double tb = bg_tex.At(x, y), tf = fg_tex.At(x, y);
          const double noise = 0.02 * rng.Normal();
          const double vals[3] = {
              (1 - wf) * (bg.r + tb) + wf * (fg_mix.r + tf),
              (1 - wf) * (bg.g + tb) + wf * (fg_mix.g + tf),
              (1 - wf) * (bg.b + tb) + wf * (fg_mix.b + tf)};
          for (int c = 0; c < 3; ++c) img.At(c, y, x) = Clamp01(vals[c] + noise);
        }
      }
      smp.image = std::move(img);
      smp.label = std::move(label);
      smp.layout = std::move(layout);
      break;
    }
    samples.push_back(std::move(smp));
  }
  return AssembleSplit(std::move(samples), 2);
}

// Multi-class scenes of overlapping shapes. Every layer (including the
// full-canvas first layer) draws its class with P(k) proportional to
// imbalance^-k, so the expected pixel share of class k decays geometrically.
// Classes have fixed per-dataset colours and textures; each image adds a
// lighting gain and gradient plus per-instance colour jitter.
inline DatasetSplit SynthMulticlassScenes(int n, int size, int num_classes,
                                          double imbalance,
                                          std::uint64_t seed) {
  using namespace data_internal;
  if (n < 10) throw InvalidArgument("dataset needs at least 10 samples");
  if (size < 8) throw InvalidArgument("image size must be >= 8");
  if (num_classes < 4) throw InvalidArgument("num_classes must be >= 4");
  if (!(imbalance >= 1.0)) throw InvalidArgument("imbalance must be >= 1");

  Rng palette_rng(DeriveSeed({seed, 0xc0ULL}));
  std::vector<Rgb> colors;
  std::vector<Texture> textures;
  const double hue0 = palette_rng.Uniform();
  for (int k = 0; k < num_classes; ++k) {
    // Neighbouring classes get well separated hues but similar brightness.
    const double hue = hue0 + static_cast<double>(k) / num_classes;
    colors.push_back(HueColor(hue, palette_rng.Uniform(0.35, 0.65),
                              palette_rng.Uniform(0.45, 0.75)));
    textures.push_back(Texture::Random(palette_rng, 0.2 + 0.15 * k,
                                       0.35 + 0.2 * k, 0.10));
  }

  std::vector<Sample> samples;
  samples.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng(DeriveSeed({seed, 0x3cULL, static_cast<std::uint64_t>(i)}));
    Sample smp;
    smp.id = "scene-" + std::to_string(i);
    SceneLayout layout;
    Shape fill;
    fill.label = GeometricClass(rng, num_classes, imbalance);
    layout.shapes.push_back(fill);
    const int layers = static_cast<int>(rng.UniformInt(5, 9));
    std::vector<Rgb> jitter;
    for (int l = 0; l <= layers; ++l) {
      jitter.push_back({rng.Uniform(-0.06, 0.06), rng.Uniform(-0.06, 0.06),
                        rng.Uniform(-0.06, 0.06)});
    }
    for (int l = 0; l < layers; ++l) {
      Shape s;
      const auto kind = rng.UniformInt(0, 2);
      s.kind = kind == 0 ? ShapeKind::kRect
                         : (kind == 1 ? ShapeKind::kEllipse : ShapeKind::kBlob);
      s.label = GeometricClass(rng, num_classes, imbalance);
      s.cx = rng.Uniform(0.0, size);
      s.cy = rng.Uniform(0.0, size);
      s.rx = rng.Uniform(0.06, 0.28) * size;
      s.ry = rng.Uniform(0.06, 0.28) * size;
      s.rotation = rng.Uniform(0.0, std::numbers::pi);
      for (int h = 0; h < 3; ++h) {
        s.amp[h] = rng.Uniform(0.0, 0.15);
        s.phase[h] = rng.Uniform(0.0, 2.0 * std::numbers::pi);
      }
      layout.shapes.push_back(s);
    }
    LabelMap label = RenderLabels(layout, size, size);

    // Index of the topmost layer at each pixel, for per-instance jitter.
    Grid<std::int32_t> owner(size, size, 0);
    for (std::size_t l = 1; l < layout.shapes.size(); ++l) {
      for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
          if (layout.shapes[l].Inside(x + 0.5, y + 0.5) >= 0.0) {
            owner.At(y, x) = static_cast<std::int32_t>(l);
          }
        }
      }
    }
    const double gain = rng.Uniform(0.7, 1.25);
    const double grad_angle = rng.Uniform(0.0, 2.0 * std::numbers::pi);
    const double grad_strength = rng.Uniform(0.0, 0.25);
    ImageTensor img(3, size, size);
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const int cls = label.At(y, x);
        const Rgb& base = colors[cls];
        const Rgb& j = jitter[owner.At(y, x)];
        const double light =
            gain * (1.0 + grad_strength *
                              ((std::cos(grad_angle) * x + std::sin(grad_angle) * y) /
                                   size -
                               0.5));
        const double t = textures[cls].At(x, y);
        const double noise = 0.02 * rng.Normal();
        img.At(0, y, x) = Clamp01(light * (base.r + j.r + t) + noise);
        img.At(1, y, x) = Clamp01(light * (base.g + j.g + t) + noise);
        img.At(2, y, x) = Clamp01(light * (base.b + j.b + t) + noise);
      }
    }
    smp.image = std::move(img);
    smp.label = std::move(label);
    smp.layout = std::move(layout);
    samples.push_back(std::move(smp));
  }
  return AssembleSplit(std::move(samples), num_classes);
}

}  // namespace masksup

#endif  // MASKSUP_DATA_HPP_
