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

#include "masksup/trainer.hpp"

#include <cmath>

#include "gradcheck.hpp"
#include "gtest/gtest.h"
#include "test_util.hpp"

namespace masksup {
namespace {

TrainConfig SmallConfig(TrainMode mode, int epochs = 2) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.weights = DefaultWeights(mode);
  cfg.epochs = epochs;
  cfg.batch_size = 4;
  cfg.base_width = 4;
  cfg.depth = 2;
  return cfg;
}

const DatasetSplit& SmallData() {
  static const DatasetSplit d = SynthBinaryShapes(20, 16, 0.2, 3);
  return d;
}

// A small step keeps the central difference clear of ReLU and max-pool kinks.
TEST(GradientTest, NetworkGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 3; seed < 8; ++seed) {
    const auto r = testing::CheckNetworkGradient(
        {.in_channels = 3, .num_classes = 2, .base_width = 2, .depth = 2}, 8,
        {1, 1, 1}, 1e-5, seed);
    EXPECT_LE(r.params, 500);
    EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed;
  }
}

TEST(GradientTest, ThreeClassWeightedObjective) {
  for (std::uint64_t seed = 3; seed < 6; ++seed) {
    const auto r = testing::CheckNetworkGradient(
        {.in_channels = 1, .num_classes = 3, .base_width = 2, .depth = 2}, 8,
        {0.5, 2.0, 3.0}, 1e-5, seed);
    EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed;
  }
}

TEST(TrainerTest, FreshMaskPerStep) {
  const Sample& s = SmallData().train.front();
  const auto a = GenerateMask(64, 64, MaskRegime::High(), {},
                              TrainingMaskSeed(0, 0, 0, s.id));
  const auto b = GenerateMask(64, 64, MaskRegime::High(), {},
                              TrainingMaskSeed(0, 1, 0, s.id));
  const auto c = GenerateMask(64, 64, MaskRegime::High(), {},
                              TrainingMaskSeed(0, 0, 0, s.id));
  EXPECT_FALSE(a == b);
  EXPECT_TRUE(a == c);
  EXPECT_NE(TrainingMaskSeed(0, 0, 1, s.id), TrainingMaskSeed(0, 0, 0, s.id));
  EXPECT_NE(TrainingMaskSeed(0, 0, 0, "a"), TrainingMaskSeed(0, 0, 0, "b"));
}

TEST(TrainerTest, BaselineSkipsContextBranch) {
  const auto masks = MaskGenerationCount();
  const TrainResult r = Train(SmallConfig(TrainMode::kBaseline), SmallData());
  EXPECT_EQ(MaskGenerationCount(), masks);
  EXPECT_EQ(r.report.masks_generated, 0);
  for (const auto& s : r.report.steps) {
    EXPECT_EQ(s.loss.context, 0.0);
    EXPECT_EQ(s.loss.tasksim, 0.0);
    EXPECT_EQ(s.loss.total, s.loss.seg);
  }
  // One forward per training image per epoch plus validation.
  const std::int64_t per_epoch = static_cast<std::int64_t>(
      SmallData().train.size() + SmallData().val.size());
  EXPECT_EQ(r.report.forward_passes, 2 * per_epoch);
}

TEST(TrainerTest, MaskSupUsesTwoPassesAndOneMaskPerImage) {
  const TrainResult r = Train(SmallConfig(TrainMode::kMaskSup), SmallData());
  const auto n_train = static_cast<std::int64_t>(SmallData().train.size());
  const auto n_val = static_cast<std::int64_t>(SmallData().val.size());
  EXPECT_EQ(r.report.masks_generated, 2 * n_train);
  EXPECT_EQ(r.report.forward_passes, 2 * (2 * n_train + n_val));
  EXPECT_EQ(r.report.parameter_count, r.last.parameter_count());
}

TEST(TrainerTest, HistoryLengths) {
  const TrainConfig cfg = SmallConfig(TrainMode::kCb, 3);
  const TrainResult r = Train(cfg, SmallData());
  EXPECT_EQ(r.report.epochs.size(), 3u);
  EXPECT_EQ(r.report.steps.size(),
            3 * StepsPerEpoch(SmallData().train.size(), cfg.batch_size));
  for (std::size_t i = 0; i < r.report.steps.size(); ++i) {
    EXPECT_EQ(r.report.steps[i].step, static_cast<std::int64_t>(i));
  }
  EXPECT_GE(r.report.best_epoch, 0);
  EXPECT_EQ(r.report.best_val_miou, r.report.epochs[r.report.best_epoch].val.miou);
}

TEST(TrainerTest, CbDecompositionAtEveryStep) {
  TrainConfig cfg = SmallConfig(TrainMode::kCb);
  const TrainResult r = Train(cfg, SmallData());
  for (const auto& s : r.report.steps) {
    EXPECT_NEAR(s.loss.total, s.loss.seg + s.loss.context, 1e-12 * s.loss.total);
    EXPECT_GT(s.loss.tasksim, 0.0);
  }
}

TEST(TrainerTest, IdenticalRunsAgree) {
  const TrainConfig cfg = SmallConfig(TrainMode::kMaskSup);
  const TrainResult a = Train(cfg, SmallData());
  const TrainResult b = Train(cfg, SmallData());
  EXPECT_EQ(a.report.epochs.back().val.miou, b.report.epochs.back().val.miou);
  EXPECT_TRUE(a.last.parameters() == b.last.parameters());
}

TEST(TrainerTest, NonFiniteLossAborts) {
  TrainConfig cfg = SmallConfig(TrainMode::kMaskSup, 5);
  cfg.learning_rate = 1e300;
  try {
    Train(cfg, SmallData());
    FAIL() << "expected NonFiniteLoss";
  } catch (const NonFiniteLoss& e) {
    EXPECT_GE(e.step(), 1);
  }
}

TEST(TrainerTest, CheckpointsWritten) {
  const auto dir = testing::TempDir("trainer_ckpt");
  TrainConfig cfg = SmallConfig(TrainMode::kMaskSup);
  cfg.checkpoint_every = 2;
  TrainOptions opt;
  opt.output_dir = dir;
  const TrainResult r = Train(cfg, SmallData(), opt);
  ASSERT_TRUE(std::filesystem::exists(dir / "best.ckpt"));
  ASSERT_TRUE(std::filesystem::exists(dir / "last.ckpt"));
  const Checkpoint best = LoadCheckpoint((dir / "best.ckpt").string());
  EXPECT_TRUE(best.net.parameters() == r.best.parameters());
  EXPECT_EQ(best.config.train.seed, cfg.seed);
  EXPECT_EQ(Evaluate(best.net, SmallData().val).miou, r.report.best_val_miou);
}

TEST(TrainerTest, InferAfterTrainingIsSinglePass) {
  TrainResult r = Train(SmallConfig(TrainMode::kMaskSup, 1), SmallData());
  r.best.ResetForwardCalls();
  const auto masks = MaskGenerationCount();
  Infer(r.best, SmallData().test.front().image);
  EXPECT_EQ(r.best.forward_calls(), 1);
  EXPECT_EQ(MaskGenerationCount(), masks);
}

TEST(TrainerTest, MaskSupLossDecreasesOnBinaryShapes) {
  TrainConfig cfg;  // MaskSup, (1, 1, 1), HIGH, 30 epochs
  const DatasetSplit data = SynthBinaryShapes(200, 64, 0.3, 0);
  const TrainResult r = Train(cfg, data);
  ASSERT_EQ(r.report.epochs.size(), 30u);
  EXPECT_LT(r.report.epochs.back().train_loss, r.report.epochs.front().train_loss);
}

}  // namespace
}  // namespace masksup
