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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. Set MASKSUP_ACCEPTANCE_ONLY to a comma
// separated list of criterion ids to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "masksup/data.hpp"
#include "masksup/inference.hpp"
#include "masksup/maskgen.hpp"
#include "masksup/metrics.hpp"
#include "masksup/models.hpp"
#include "masksup/trainer.hpp"

namespace masksup {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

std::string Join(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += Fmt("%.4f", v[i]);
  }
  return s + "]";
}

double Mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Shared settings of the directional experiments.
constexpr int kSeeds = 3;
constexpr int kEpochs = 30;
constexpr double kLearningRate = 3e-3;
constexpr std::uint64_t kDataSeed = 0;
constexpr std::uint64_t kCorruptionSeed = 2026;

TrainConfig ArmConfig(TrainMode mode, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.weights = DefaultWeights(mode);
  cfg.epochs = kEpochs;
  cfg.seed = seed;
  cfg.learning_rate = kLearningRate;
  return cfg;
}

Outcome GradientSuite() {
  const auto r = testing::CheckNetworkGradient(
      {.in_channels = 3, .num_classes = 2, .base_width = 2, .depth = 2}, 8,
      {1, 1, 1}, 1e-3);
  const auto fine = testing::CheckNetworkGradient(
      {.in_channels = 3, .num_classes = 2, .base_width = 2, .depth = 2}, 8,
      {1, 1, 1}, 1e-5);
  Outcome o;
  o.pass = r.params <= 500 && r.max_rel_error < 1e-4;
  o.detail = std::to_string(r.params) + " params, step 1e-3 max rel error " +
             Fmt("%.3g", r.max_rel_error) + " (step 1e-5: " +
             Fmt("%.3g", fine.max_rel_error) + ")";
  return o;
}

// Set-based IoU straight from the definition.
std::vector<std::optional<double>> BruteForceIou(const LabelMap& pred,
                                                 const LabelMap& gt, int k) {
  std::vector<std::optional<double>> iou(k);
  for (int c = 0; c < k; ++c) {
    std::set<std::size_t> p, g;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (pred[i] == c) p.insert(i);
      if (gt[i] == c) g.insert(i);
    }
    std::vector<std::size_t> inter, uni;
    std::set_intersection(p.begin(), p.end(), g.begin(), g.end(),
                          std::back_inserter(inter));
    std::set_union(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(uni));
    if (!uni.empty()) {
      iou[c] = static_cast<double>(inter.size()) / static_cast<double>(uni.size());
    }
  }
  return iou;
}

Outcome MiouOracle() {
  Rng rng(77);
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const int h = static_cast<int>(rng.UniformInt(1, 8));
    const int w = static_cast<int>(rng.UniformInt(1, 8));
    const int k = static_cast<int>(rng.UniformInt(1, 4));
    LabelMap pred(h, w), gt(h, w);
    for (auto& v : pred) v = static_cast<std::int32_t>(rng.UniformInt(0, k - 1));
    for (auto& v : gt) v = static_cast<std::int32_t>(rng.UniformInt(0, k - 1));
    const auto expect = BruteForceIou(pred, gt, k);
    double sum = 0.0;
    int defined = 0;
    for (const auto& v : expect) {
      if (v) {
        sum += *v;
        ++defined;
      }
    }
    const MetricsReport r = Miou(Accumulate(ConfusionMatrix(k), pred, gt));
    if (r.per_class_iou != expect || r.miou != sum / defined) ++mismatches;
  }
  return {mismatches == 0, std::to_string(1000 - mismatches) + "/1000 exact matches"};
}

Outcome MaskContract() {
  const auto band = MaskRegime::High().target_band;
  int inside = 0;
  int repeat = 0;
  double lo = 1.0, hi = 0.0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const HoleMask m = GenerateMask(64, 64, MaskRegime::High(), {}, seed);
    const double f = MaskedFraction(m);
    lo = std::min(lo, f);
    hi = std::max(hi, f);
    inside += band.Contains(f);
    repeat += GenerateMask(64, 64, MaskRegime::High(), {}, seed) == m;
  }
  return {inside == 1000 && repeat == 1000,
          std::to_string(inside) + "/1000 in band, fractions in [" + Fmt("%.4f", lo) +
              ", " + Fmt("%.4f", hi) + "], " + std::to_string(repeat) +
              "/1000 reproduced"};
}

Outcome ZeroOverhead() {
  auto net = BuildReferenceUNet<float>(2, 8, 3, 0);
  const MaskSupModel<float> model(net);
  const DatasetSplit d = SynthBinaryShapes(10, 64, 0.3, 0);
  net.ResetForwardCalls();
  const auto masks = MaskGenerationCount();
  Infer(net, d.test.front().image);
  const std::int64_t passes = net.forward_calls();
  const std::int64_t made = MaskGenerationCount() - masks;
  const bool same = ParameterCount(model) == ParameterCount(net);
  return {same && passes == 1 && made == 0,
          "params " + std::to_string(ParameterCount(model)) + " wrapped vs " +
              std::to_string(ParameterCount(net)) + " backbone, infer " +
              std::to_string(passes) + " forward pass, " + std::to_string(made) +
              " masks"};
}

// Trained models of the multiclass ablation, shared by later criteria.
struct Ablation {
  DatasetSplit data;
  std::vector<double> test[3];
  std::vector<UNet<float>> best[3];
};

const Ablation& RunAblation() {
  static const Ablation a = [] {
    Ablation r;
    r.data = SynthMulticlassScenes(300, 64, 6, 3.0, kDataSeed);
    const TrainMode modes[3] = {TrainMode::kBaseline, TrainMode::kCb,
                                TrainMode::kMaskSup};
    for (int s = 0; s < kSeeds; ++s) {
      for (int m = 0; m < 3; ++m) {
        TrainResult t = Train(ArmConfig(modes[m], s), r.data);
        r.test[m].push_back(Evaluate(t.best, r.data.test).miou);
        r.best[m].push_back(std::move(t.best));
        std::printf("  ablation seed %d %-8s test mIoU %.4f\n", s,
                    ToString(modes[m]).c_str(), r.test[m].back());
        std::fflush(stdout);
      }
    }
    return r;
  }();
  return a;
}

Outcome AblationDirection() {
  const Ablation& a = RunAblation();
  const double base = Mean(a.test[0]), cb = Mean(a.test[1]), ms = Mean(a.test[2]);
  return {ms - cb >= -0.01 && cb - base >= -0.01,
          "mean test mIoU baseline " + Fmt("%.4f", base) + ", cb " + Fmt("%.4f", cb) +
              ", masksup " + Fmt("%.4f", ms) + " (baseline " + Join(a.test[0]) +
              ", cb " + Join(a.test[1]) + ", masksup " + Join(a.test[2]) + ")"};
}

Outcome HighVsLow() {
  const DatasetSplit data = SynthBinaryShapes(200, 64, 0.3, kDataSeed);
  std::vector<double> high, low;
  for (int s = 0; s < kSeeds; ++s) {
    for (auto* out : {&high, &low}) {
      TrainConfig cfg = ArmConfig(TrainMode::kMaskSup, s);
      cfg.regime = out == &high ? MaskRegime::High() : MaskRegime::Low();
      const TrainResult t = Train(cfg, data);
      out->push_back(Evaluate(t.best, data.test).miou);
      std::printf("  regime seed %d %-4s test mIoU %.4f\n", s,
                  out == &high ? "high" : "low", out->back());
      std::fflush(stdout);
    }
  }
  return {Mean(high) >= Mean(low) - 0.01,
          "mean test mIoU high " + Fmt("%.4f", Mean(high)) + ", low " +
              Fmt("%.4f", Mean(low)) + " (high " + Join(high) + ", low " + Join(low) +
              ")"};
}

Outcome Robustness() {
  const Ablation& a = RunAblation();
  std::vector<double> ms, base;
  for (int s = 0; s < kSeeds; ++s) {
    ms.push_back(
        RobustnessCurve(a.best[2][s], a.data.test, {0.5}, {}, kCorruptionSeed)[0].miou);
    base.push_back(
        RobustnessCurve(a.best[0][s], a.data.test, {0.5}, {}, kCorruptionSeed)[0].miou);
  }
  const double gap = Mean(ms) - Mean(base);
  return {gap >= 0.02, "coverage 0.5 mean mIoU masksup " + Fmt("%.4f", Mean(ms)) +
                           ", baseline " + Fmt("%.4f", Mean(base)) + ", gap " +
                           Fmt("%+.4f", gap) + " (masksup " + Join(ms) +
                           ", baseline " + Join(base) + ")"};
}

Outcome Reduction() {
  const DatasetSplit data = SynthBinaryShapes(40, 32, 0.3, kDataSeed);
  TrainConfig cfg = ArmConfig(TrainMode::kCb, 0);
  cfg.weights = {1.0, 1.0, 0.0};
  cfg.epochs = 3;
  const TrainResult t = Train(cfg, data);
  double worst = 0.0;
  for (const auto& s : t.report.steps) {
    const double rel =
        std::abs(s.loss.total - (s.loss.seg + s.loss.context)) / s.loss.total;
    worst = std::max(worst, rel);
  }
  return {!t.report.steps.empty() && worst <= 1e-6,
          std::to_string(t.report.steps.size()) + " steps, max relative gap " +
              Fmt("%.3g", worst)};
}

// Rarest class: lowest pixel share among classes present in the test split.
// Present classes always have a nonempty union, so their IoU is defined.
int RarestTestClass(const DatasetSplit& d) {
  std::vector<std::int64_t> counts(d.num_classes, 0);
  for (const auto& s : d.test)
    for (auto v : s.label) ++counts[v];
  int rare = -1;
  for (int c = 0; c < d.num_classes; ++c) {
    if (counts[c] > 0 && (rare < 0 || counts[c] < counts[rare])) rare = c;
  }
  return rare;
}

Outcome RarestClass() {
  const Ablation& a = RunAblation();
  const int c = RarestTestClass(a.data);
  std::vector<double> ms, base;
  for (int s = 0; s < kSeeds; ++s) {
    ms.push_back(*Evaluate(a.best[2][s], a.data.test).per_class_iou[c]);
    base.push_back(*Evaluate(a.best[0][s], a.data.test).per_class_iou[c]);
  }
  return {Mean(ms) >= Mean(base) - 0.01,
          "class " + std::to_string(c) + " mean IoU masksup " + Fmt("%.4f", Mean(ms)) +
              ", baseline " + Fmt("%.4f", Mean(base)) + " (masksup " + Join(ms) +
              ", baseline " + Join(base) + ")"};
}

struct Criterion {
  std::string id;
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

bool Selected(const std::string& id) {
  const char* only = std::getenv("MASKSUP_ACCEPTANCE_ONLY");
  if (only == nullptr || *only == '\0') return true;
  std::stringstream ss(only);
  for (std::string tok; std::getline(ss, tok, ',');) {
    if (tok == id) return true;
  }
  return false;
}

int Main() {
  const std::vector<Criterion> criteria = {
      {"gradient", "gradient suite", 30, GradientSuite},
      {"miou", "mIoU oracle", 10, MiouOracle},
      {"masks", "mask contract", 30, MaskContract},
      {"overhead", "zero overhead", 60, ZeroOverhead},
      {"ablation", "ablation direction", 1800, AblationDirection},
      {"regime", "high vs low masking", 1200, HighVsLow},
      {"robustness", "robustness at coverage 0.5", 600, Robustness},
      {"reduction", "alpha3 = 0 reduction", 60, Reduction},
      {"rarest", "rarest-class IoU", 600, RarestClass},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (!Selected(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::printf("[%s] %s: %s (%.1f s, budget %.0f s)\n", o.pass ? "PASS" : "FAIL",
                c.name.c_str(), o.detail.c_str(), secs, c.budget_seconds);
    std::fflush(stdout);
  }
  std::printf("%d criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}

}  // namespace
}  // namespace masksup

int main() { return masksup::Main(); }
