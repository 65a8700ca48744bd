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

#include "masksup/metrics.hpp"

#include <random>
#include <set>

#include "gtest/gtest.h"
#include "masksup/models.hpp"
#include "test_util.hpp"

namespace masksup {
namespace {

using testing::RandomLabels;

LabelMap Map2x2(std::int32_t a, std::int32_t b, std::int32_t c, std::int32_t d) {
  return LabelMap(2, 2, std::vector<std::int32_t>{a, b, c, d});
}

// Set-based IoU per class, averaged over classes present in either map.
double BruteForceMiou(const LabelMap& pred, const LabelMap& gt, int k) {
  double sum = 0;
  int defined = 0;
  for (int c = 0; c < k; ++c) {
    std::set<std::size_t> p, g;
    for (std::size_t i = 0; i < gt.size(); ++i) {
      if (pred[i] == c) p.insert(i);
      if (gt[i] == c) g.insert(i);
    }
    std::set<std::size_t> uni = p;
    uni.insert(g.begin(), g.end());
    if (uni.empty()) continue;
    std::size_t inter = 0;
    for (auto i : p) inter += g.count(i);
    sum += static_cast<double>(inter) / static_cast<double>(uni.size());
    ++defined;
  }
  return sum / defined;
}

TEST(ConfusionTest, PerfectMatchIsDiagonal) {
  const LabelMap gt = RandomLabels(4, 4, 2, 1);
  const auto cm = Accumulate(ConfusionMatrix(2), gt, gt, std::nullopt);
  EXPECT_EQ(cm.At(0, 1), 0);
  EXPECT_EQ(cm.At(1, 0), 0);
  EXPECT_EQ(cm.Total(), 16);
}

TEST(ConfusionTest, AllIgnoredLeavesMatrixUnchanged) {
  const auto start = Accumulate(ConfusionMatrix(2), Map2x2(0, 1, 1, 0),
                                Map2x2(0, 1, 0, 0), std::nullopt);
  const auto after =
      Accumulate(start, Map2x2(1, 1, 1, 1), Map2x2(255, 255, 255, 255), 255);
  EXPECT_TRUE(after == start);
}

TEST(ConfusionTest, FourPixelExample) {
  const auto cm = Accumulate(ConfusionMatrix(2), Map2x2(0, 1, 1, 1),
                             Map2x2(0, 1, 0, 1), std::nullopt);
  EXPECT_EQ(cm.At(0, 0), 1);
  EXPECT_EQ(cm.At(0, 1), 1);
  EXPECT_EQ(cm.At(1, 0), 0);
  EXPECT_EQ(cm.At(1, 1), 2);
  const MetricsReport r = Miou(cm);
  EXPECT_DOUBLE_EQ(*r.per_class_iou[0], 0.5);
  EXPECT_DOUBLE_EQ(*r.per_class_iou[1], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.miou, 7.0 / 12.0);
  EXPECT_DOUBLE_EQ(r.pixel_accuracy, 0.75);
}

TEST(ConfusionTest, AccumulateErrors) {
  EXPECT_THROW(Accumulate(ConfusionMatrix(2), Map2x2(0, 0, 0, 2),
                          Map2x2(0, 0, 0, 0), std::nullopt),
               LabelOutOfRange);
  EXPECT_THROW(Accumulate(ConfusionMatrix(2), Map2x2(0, 0, 0, 0),
                          Map2x2(0, 0, 0, 5), std::nullopt),
               LabelOutOfRange);
  EXPECT_THROW(Accumulate(ConfusionMatrix(2), LabelMap(2, 3), Map2x2(0, 0, 0, 0),
                          std::nullopt),
               ShapeMismatch);
}

TEST(MiouTest, DiagonalIsPerfect) {
  const auto cm = Accumulate(ConfusionMatrix(3), Map2x2(0, 1, 2, 2),
                             Map2x2(0, 1, 2, 2), std::nullopt);
  EXPECT_DOUBLE_EQ(Miou(cm).miou, 1.0);
}

TEST(MiouTest, AbsentClassIsUndefined) {
  const auto cm = Accumulate(ConfusionMatrix(3), Map2x2(0, 1, 1, 1),
                             Map2x2(0, 1, 0, 1), std::nullopt);
  const MetricsReport r = Miou(cm);
  EXPECT_FALSE(r.per_class_iou[2].has_value());
  EXPECT_DOUBLE_EQ(r.miou, 7.0 / 12.0);
}

TEST(MiouTest, EmptyEvaluationThrows) {
  EXPECT_THROW(Miou(ConfusionMatrix(3)), EmptyEvaluation);
}

TEST(MiouTest, MatchesBruteForceOracle) {
  std::mt19937_64 gen(42);
  for (int trial = 0; trial < 300; ++trial) {
    const int h = 1 + static_cast<int>(gen() % 8), w = 1 + static_cast<int>(gen() % 8);
    const int k = 2 + static_cast<int>(gen() % 3);
    const LabelMap gt = RandomLabels(h, w, k, gen());
    const LabelMap pred = RandomLabels(h, w, k, gen());
    const auto r = Miou(Accumulate(ConfusionMatrix(k), pred, gt, std::nullopt));
    ASSERT_EQ(r.miou, BruteForceMiou(pred, gt, k)) << trial;
  }
}

TEST(MiouTest, InvariantUnderRelabeling) {
  const LabelMap gt = RandomLabels(8, 8, 4, 3);
  const LabelMap pred = RandomLabels(8, 8, 4, 4);
  const std::vector<int> perm = {2, 0, 3, 1};
  LabelMap gt2 = gt, pred2 = pred;
  for (auto& v : gt2) v = perm[v];
  for (auto& v : pred2) v = perm[v];
  const double a = Miou(Accumulate(ConfusionMatrix(4), pred, gt, std::nullopt)).miou;
  const double b = Miou(Accumulate(ConfusionMatrix(4), pred2, gt2, std::nullopt)).miou;
  EXPECT_NEAR(a, b, 1e-15);
}

TEST(ConfusionTest, PooledSumEqualsSerial) {
  ConfusionMatrix serial(3), left(3), right(3);
  for (int i = 0; i < 6; ++i) {
    const LabelMap gt = RandomLabels(5, 5, 3, 10 + i);
    const LabelMap pred = RandomLabels(5, 5, 3, 20 + i);
    serial = Accumulate(std::move(serial), pred, gt, std::nullopt);
    auto& part = i % 2 ? left : right;
    part = Accumulate(std::move(part), pred, gt, std::nullopt);
  }
  right += left;
  EXPECT_TRUE(right == serial);
}

TEST(MetricsReportTest, JsonRoundTrip) {
  auto cm = Accumulate(ConfusionMatrix(3), Map2x2(0, 1, 1, 1), Map2x2(0, 1, 0, 1),
                       std::nullopt);
  MetricsReport r = Miou(cm);
  r.params = 1234;
  r.num_images = 1;
  const auto j = ToJson(r);
  EXPECT_EQ(j.at("params").get<std::int64_t>(), 1234);
  EXPECT_TRUE(j.at("per_class_iou")[2].is_null());
  const MetricsReport back = MetricsReportFromJson(j);
  EXPECT_EQ(back.miou, r.miou);
  EXPECT_EQ(back.per_class_iou, r.per_class_iou);
  EXPECT_TRUE(back.confusion == r.confusion);
}

class RobustnessTest : public ::testing::Test {
 protected:
  DatasetSplit data_ = SynthBinaryShapes(20, 32, 0.2, 1);
  UNet<float> net_ = BuildReferenceUNet<float>(2, 4, 3, 0);
};

TEST_F(RobustnessTest, CoverageZeroEqualsPlainEvaluation) {
  const auto curve = RobustnessCurve(net_, data_.test, {0.0, 0.3}, {}, 7);
  EXPECT_EQ(curve[0].miou, Evaluate(net_, data_.test).miou);
}

TEST_F(RobustnessTest, ExactCoveragesInOrderAndDeterministic) {
  const std::vector<double> cov = {0.5, 0.0, 0.25, 0.7};
  const auto a = RobustnessCurve(net_, data_.test, cov, {}, 7);
  ASSERT_EQ(a.size(), 4u);
  for (std::size_t i = 0; i < cov.size(); ++i) EXPECT_EQ(a[i].coverage, cov[i]);
  const UNet<float> twin = BuildReferenceUNet<float>(2, 4, 3, 0);
  const auto b = RobustnessCurve(twin, data_.test, cov, {}, 7);
  for (std::size_t i = 0; i < cov.size(); ++i) EXPECT_EQ(a[i].miou, b[i].miou);
}

TEST_F(RobustnessTest, RejectsCoverageOutsideRange) {
  EXPECT_THROW(RobustnessCurve(net_, data_.test, {1.0}, {}, 0), InvalidArgument);
  EXPECT_THROW(RobustnessCurve(net_, data_.test, {-0.1}, {}, 0), InvalidArgument);
}

TEST_F(RobustnessTest, EvaluateRecordsParamsAndSinglePass) {
  net_.ResetForwardCalls();
  const MetricsReport r = Evaluate(net_, data_.test);
  EXPECT_EQ(r.params, net_.parameter_count());
  EXPECT_EQ(r.num_images, static_cast<std::int64_t>(data_.test.size()));
  EXPECT_EQ(net_.forward_calls(), static_cast<std::int64_t>(data_.test.size()));
}

}  // namespace
}  // namespace masksup
