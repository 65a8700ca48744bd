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

// Confusion-matrix based mIoU and masked-corruption robustness sweeps.

#ifndef MASKSUP_METRICS_HPP_
#define MASKSUP_METRICS_HPP_

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "masksup/common.hpp"
#include "masksup/data.hpp"
#include "masksup/inference.hpp"
#include "masksup/maskgen.hpp"
#include "masksup/models.hpp"
#include "masksup/tensor.hpp"

namespace masksup {

// K x K counts; entry (i, j) = pixels with true class i predicted as j.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int num_classes)
      : k_(num_classes),
        counts_(static_cast<std::size_t>(num_classes) * num_classes, 0) {}

  int num_classes() const { return k_; }
  std::int64_t& At(int truth, int pred) { return counts_[truth * k_ + pred]; }
  std::int64_t At(int truth, int pred) const {
    return counts_[truth * k_ + pred];
  }
  std::int64_t Total() const {
    std::int64_t s = 0;
    for (auto c : counts_) s += c;
    return s;
  }
  std::int64_t RowSum(int i) const {
    std::int64_t s = 0;
    for (int j = 0; j < k_; ++j) s += At(i, j);
    return s;
  }
  std::int64_t ColSum(int j) const {
    std::int64_t s = 0;
    for (int i = 0; i < k_; ++i) s += At(i, j);
    return s;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    if (o.k_ != k_) throw ShapeMismatch("confusion matrices differ in K");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += o.counts_[i];
    return *this;
  }
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int k_ = 0;
  std::vector<std::int64_t> counts_;
};

// Returns cm with the pixels of (pred, gt) added; ignore-labeled ground truth
// is skipped.
inline ConfusionMatrix Accumulate(ConfusionMatrix cm, const LabelMap& pred,
                                  const LabelMap& gt,
                                  const IgnoreLabel& ignore = std::nullopt) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw ShapeMismatch("prediction and ground truth sizes differ");
  }
  const int k = cm.num_classes();
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const std::int32_t t = gt[i];
    if (ignore && t == *ignore) continue;
    const std::int32_t p = pred[i];
    if (t < 0 || t >= k) {
      throw LabelOutOfRange("ground-truth label " + std::to_string(t) +
                            " outside [0, " + std::to_string(k - 1) + "]");
    }
    if (p < 0 || p >= k) {
      throw LabelOutOfRange("predicted label " + std::to_string(p) +
                            " outside [0, " + std::to_string(k - 1) + "]");
    }
    ++cm.At(t, p);
  }
  return cm;
}

struct MetricsReport {
  std::vector<std::optional<double>> per_class_iou;
  double miou = 0.0;
  double pixel_accuracy = 0.0;
  std::int64_t params = 0;
  std::int64_t num_images = 0;
  ConfusionMatrix confusion;
};

// IoU_k = cm[k,k] / (row_k + col_k - cm[k,k]); classes with an empty union
// are undefined and left out of the mean.
inline MetricsReport Miou(const ConfusionMatrix& cm) {
  MetricsReport r;
  r.confusion = cm;
  const int k = cm.num_classes();
  r.per_class_iou.assign(k, std::nullopt);
  double sum = 0.0;
  int defined = 0;
  std::int64_t diag = 0;
  for (int c = 0; c < k; ++c) {
    const std::int64_t tp = cm.At(c, c);
    diag += tp;
    const std::int64_t uni = cm.RowSum(c) + cm.ColSum(c) - tp;
    if (uni == 0) continue;
    const double iou = static_cast<double>(tp) / static_cast<double>(uni);
    r.per_class_iou[c] = iou;
    sum += iou;
    ++defined;
  }
  if (defined == 0) {
    throw EmptyEvaluation("no class has a nonzero union");
  }
  r.miou = sum / defined;
  const std::int64_t total = cm.Total();
  r.pixel_accuracy =
      total > 0 ? static_cast<double>(diag) / static_cast<double>(total) : 0.0;
  return r;
}

inline nlohmann::json ToJson(const MetricsReport& r) {
  nlohmann::json j;
  nlohmann::json ious = nlohmann::json::array();
  for (const auto& v : r.per_class_iou) {
    ious.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
  }
  j["per_class_iou"] = ious;
  j["miou"] = r.miou;
  j["pixel_accuracy"] = r.pixel_accuracy;
  j["params"] = r.params;
  j["num_images"] = r.num_images;
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < r.confusion.num_classes(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < r.confusion.num_classes(); ++c) {
      row.push_back(r.confusion.At(i, c));
    }
    rows.push_back(row);
  }
  j["confusion"] = rows;
  return j;
}

inline MetricsReport MetricsReportFromJson(const nlohmann::json& j) {
  MetricsReport r;
  for (const auto& v : j.at("per_class_iou")) {
    r.per_class_iou.push_back(v.is_null() ? std::nullopt
                                          : std::optional<double>(v.get<double>()));
  }
  r.miou = j.at("miou").get<double>();
  r.pixel_accuracy = j.at("pixel_accuracy").get<double>();
  r.params = j.at("params").get<std::int64_t>();
  r.num_images = j.at("num_images").get<std::int64_t>();
  const auto& rows = j.at("confusion");
  r.confusion = ConfusionMatrix(static_cast<int>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      r.confusion.At(static_cast<int>(i), static_cast<int>(c)) =
          rows[i][c].get<std::int64_t>();
    }
  }
  return r;
}

// Optional per-image input transform applied before the forward pass.
using InputTransform =
    std::function<ImageTensor(const ImageTensor&, std::size_t index)>;

// Dataset-level mIoU: confusion counts are pooled over every sample.
template <typename T>
MetricsReport Evaluate(const UNet<T>& net, const std::vector<Sample>& samples,
                       const IgnoreLabel& ignore = std::nullopt,
                       const InputTransform& transform = nullptr) {
  ConfusionMatrix cm(net.num_classes());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const ImageTensor input =
        transform ? transform(samples[i].image, i) : samples[i].image;
    LabelMap pred;
    if constexpr (std::is_same_v<T, float>) {
      pred = Infer(net, input);
    } else {
      pred = Infer(net, input.template Cast<T>());
    }
    cm = Accumulate(std::move(cm), pred, samples[i].label, ignore);
  }
  MetricsReport r = Miou(cm);
  r.params = net.parameter_count();
  r.num_images = static_cast<std::int64_t>(samples.size());
  return r;
}

struct RobustnessPoint {
  double coverage = 0.0;
  double miou = 0.0;
};

// Seed of the corruption mask for one (coverage index, sample) pair. Two
// models evaluated with the same seed see identical masks.
inline std::uint64_t CorruptionSeed(std::uint64_t seed,
                                    std::size_t coverage_index,
                                    const std::string& sample_id) {
  return DeriveSeed({seed, 0x726f62ULL, coverage_index, HashString(sample_id)});
}

// Masks every sample with a fresh mask targeting [c - 0.05, c + 0.05]
// (clamped to [0, 1]) and records the pooled mIoU of single-pass
// predictions. Coverage 0 uses the identity mask.
template <typename T>
std::vector<RobustnessPoint> RobustnessCurve(
    const UNet<T>& net, const std::vector<Sample>& samples,
    const std::vector<double>& coverages, const MaskGenConfig& cfg,
    std::uint64_t seed, const IgnoreLabel& ignore = std::nullopt) {
  std::vector<RobustnessPoint> curve;
  for (std::size_t ci = 0; ci < coverages.size(); ++ci) {
    const double c = coverages[ci];
    if (!(c >= 0.0 && c < 1.0)) {
      throw InvalidArgument("coverage " + std::to_string(c) +
                            " outside [0, 1)");
    }
    InputTransform transform = nullptr;
    if (c > 0.0) {
      const MaskRegime regime =
          MaskRegime::Band(std::max(0.0, c - 0.05), std::min(1.0, c + 0.05));
      transform = [&, regime, ci](const ImageTensor& img, std::size_t i) {
        const HoleMask m =
            GenerateMask(img.height(), img.width(), regime, cfg,
                         CorruptionSeed(seed, ci, samples[i].id));
        return ApplyMask(img, m);
      };
    }
    curve.push_back({c, Evaluate(net, samples, ignore, transform).miou});
  }
  return curve;
}

}  // namespace masksup

#endif  // MASKSUP_METRICS_HPP_
