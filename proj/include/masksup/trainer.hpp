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

// Masked supervised training loop.
//
// Each step, every image in the batch goes through the shared network twice:
// once as is (segmentation branch) and once multiplied by a freshly drawn
// free-form mask (context branch). The weighted three-term loss is
// back-propagated through both passes into the single parameter set. The
// baseline arm skips the mask and the second pass entirely.

#ifndef MASKSUP_TRAINER_HPP_
#define MASKSUP_TRAINER_HPP_

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "masksup/checkpoint.hpp"
#include "masksup/common.hpp"
#include "masksup/config.hpp"
#include "masksup/data.hpp"
#include "masksup/inference.hpp"
#include "masksup/losses.hpp"
#include "masksup/maskgen.hpp"
#include "masksup/metrics.hpp"
#include "masksup/models.hpp"
#include "masksup/optim.hpp"

namespace masksup {

struct StepRecord {
  std::int64_t step = 0;
  int epoch = 0;
  LossBundle loss;  // batch means
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  MetricsReport val;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  double best_val_miou = -1.0;
  std::string best_checkpoint_path;
  std::int64_t parameter_count = 0;
  std::int64_t masks_generated = 0;
  std::int64_t forward_passes = 0;
};

struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainOptions {
  // Checkpoints are written here when set.
  std::optional<std::filesystem::path> output_dir;
  // Stored inside checkpoints; defaults to the train config with default data.
  std::optional<ExperimentConfig> experiment;
  IgnoreLabel ignore_label;
  TrainHooks hooks;
};

struct TrainResult {
  TrainReport report;
  UNet<float> best;   // parameters of the best validation epoch
  UNet<float> last;   // parameters after the final step
};

// Seed of the context-branch mask for one sample at one step. Depends only on
// its arguments, so masks are reproducible regardless of processing order.
inline std::uint64_t TrainingMaskSeed(std::uint64_t seed, int epoch,
                                      std::int64_t step,
                                      const std::string& sample_id) {
  return DeriveSeed({seed, 0x6d61736bULL, static_cast<std::uint64_t>(epoch),
                     static_cast<std::uint64_t>(step), HashString(sample_id)});
}

inline std::size_t StepsPerEpoch(std::size_t train_size, int batch_size) {
  return (train_size + batch_size - 1) / batch_size;
}

// Accumulates the gradient of one sample's loss into grads. Returns the
// unscaled loss bundle. `masks_generated` counts drawn masks.
inline LossBundle SampleGradient(const UNet<float>& net, const TrainConfig& cfg,
                                 const Sample& sample, int epoch,
                                 std::int64_t step, const IgnoreLabel& ignore,
                                 GradientSet<float>& grads,
                                 std::int64_t& masks_generated) {
  ForwardTape<float> plain_tape;
  if (cfg.mode == TrainMode::kBaseline) {
    const LogitsMap<float> m_p = net.Forward(sample.image, &plain_tape);
    LogitsMap<float> g;
    const LossBundle b = BaselineLoss(m_p, sample.label, cfg.weights, ignore, &g);
    net.Backward(plain_tape, g, grads);
    return b;
  }
  const HoleMask mask =
      GenerateMask(sample.image.height(), sample.image.width(), cfg.regime,
                   cfg.mask, TrainingMaskSeed(cfg.seed, epoch, step, sample.id));
  ++masks_generated;
  const ImageTensor masked = ApplyMask(sample.image, mask);
  ForwardTape<float> masked_tape;
  const SiameseOutputs<float> out =
      SiameseForward(net, sample.image, masked, &plain_tape, &masked_tape);
  LossOptions opts;
  opts.ignore_label = ignore;
  opts.context_masked_pixels_only = cfg.context_masked_pixels_only;
  LossGradients<float> g;
  const LossBundle b =
      TotalLoss(out.plain, out.masked, sample.label, cfg.weights, opts, &mask, &g);
  net.Backward(plain_tape, g.plain, grads);
  net.Backward(masked_tape, g.masked, grads);
  return b;
}

inline TrainResult Train(const TrainConfig& cfg, const DatasetSplit& data,
                         const TrainOptions& options = {}) {
  cfg.Validate();
  if (data.train.empty()) throw EmptyDataset("training split is empty");
  const std::vector<Sample>& val = data.val.empty() ? data.train : data.val;
  const int in_channels = data.train.front().image.channels();

  UNet<float> net = BuildReferenceUNet<float>(data.num_classes, cfg.base_width,
                                              cfg.depth, cfg.seed, in_channels);
  Adam<float> optimizer(net.parameters(), {.learning_rate = cfg.learning_rate});
  GradientSet<float> grads = net.parameters().ZerosLike();

  ExperimentConfig experiment;
  if (options.experiment) experiment = *options.experiment;
  experiment.train = cfg;
  if (options.output_dir) std::filesystem::create_directories(*options.output_dir);

  TrainResult result{{}, net, net};
  TrainReport& report = result.report;
  report.parameter_count = net.parameter_count();
  const IgnoreLabel& ignore = options.ignore_label;

  std::vector<std::size_t> order(data.train.size());
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle(DeriveSeed({cfg.seed, 0x5348ULL, static_cast<std::uint64_t>(epoch)}));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle.UniformInt(0, static_cast<std::int64_t>(i) - 1)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size), ++step) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      grads.SetZero();
      StepRecord rec;
      rec.step = step;
      rec.epoch = epoch;
      rec.loss.weights = cfg.weights;
      for (std::size_t i = start; i < end; ++i) {
        const LossBundle b =
            SampleGradient(net, cfg, data.train[order[i]], epoch, step, ignore,
                           grads, report.masks_generated);
        rec.loss.seg += b.seg;
        rec.loss.context += b.context;
        rec.loss.tasksim += b.tasksim;
        rec.loss.total += b.total;
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      rec.loss.seg *= inv;
      rec.loss.context *= inv;
      rec.loss.tasksim *= inv;
      rec.loss.total *= inv;
      if (!std::isfinite(rec.loss.total)) {
        throw NonFiniteLoss("non-finite loss at step " + std::to_string(step),
                            step);
      }
      grads.Scale(static_cast<float>(inv));
      optimizer.Step(net.parameters(), grads);
      epoch_loss += rec.loss.total * static_cast<double>(end - start);
      report.steps.push_back(rec);
      if (options.hooks.on_step) options.hooks.on_step(rec);
      if (options.output_dir && cfg.checkpoint_every > 0 &&
          (step + 1) % cfg.checkpoint_every == 0) {
        SaveCheckpoint(net, experiment, step + 1,
                       (*options.output_dir / "last.ckpt").string());
      }
    }
    EpochRecord er;
    er.epoch = epoch;
    er.train_loss = epoch_loss / static_cast<double>(order.size());
    er.val = Evaluate(net, val, ignore);
    er.seconds = std::chrono::duration<double>(
                     std::chrono::steady_clock::now() - t0).count();
    if (er.val.miou > report.best_val_miou) {
      report.best_val_miou = er.val.miou;
      report.best_epoch = epoch;
      result.best = net;
      if (options.output_dir) {
        report.best_checkpoint_path = (*options.output_dir / "best.ckpt").string();
        SaveCheckpoint(net, experiment, step, report.best_checkpoint_path);
      }
    }
    report.epochs.push_back(er);
    if (options.hooks.on_epoch) options.hooks.on_epoch(er);
  }
  report.forward_passes = net.forward_calls();
  result.last = net;
  return result;
}

inline nlohmann::json ToJson(const StepRecord& r) {
  return {{"step", r.step},
          {"epoch", r.epoch},
          {"seg", r.loss.seg},
          {"context", r.loss.context},
          {"tasksim", r.loss.tasksim},
          {"total", r.loss.total}};
}

inline nlohmann::json ToJson(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"train_loss", r.train_loss},
          {"val_miou", r.val.miou},
          {"seconds", r.seconds}};
}

}  // namespace masksup

#endif  // MASKSUP_TRAINER_HPP_
