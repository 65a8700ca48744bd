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

#include "masksup/models.hpp"

#include <cmath>

#include "gtest/gtest.h"
#include "masksup/inference.hpp"
#include "masksup/maskgen.hpp"
#include "test_util.hpp"

namespace masksup {
namespace {

using testing::RandomTensor;

// Independent count from the documented layer layout: each block holds two
// 3x3 convs without bias, each followed by a norm with gamma and beta.
std::int64_t ExpectedUNetParams(int in, int k, int width, int depth) {
  auto block = [](std::int64_t ci, std::int64_t co) {
    return ci * co * 9 + 2 * co + co * co * 9 + 2 * co;
  };
  std::int64_t n = 0;
  std::int64_t prev = in;
  for (int l = 0; l < depth; ++l) {
    n += block(prev, static_cast<std::int64_t>(width) << l);
    prev = static_cast<std::int64_t>(width) << l;
  }
  for (int l = depth - 2; l >= 0; --l) {
    const std::int64_t c = static_cast<std::int64_t>(width) << l;
    n += block(prev + c, c);
    prev = c;
  }
  return n + k * prev + k;
}

TEST(UNetTest, OutputShape) {
  const auto net = BuildReferenceUNet<float>(2, 8, 3, 0);
  const auto out = net.Forward(RandomTensor<float>(3, 64, 64, 1, 0, 1), nullptr);
  EXPECT_EQ(out.channels(), 2);
  EXPECT_EQ(out.height(), 64);
  EXPECT_EQ(out.width(), 64);
  for (std::size_t i = 0; i < out.size(); ++i) ASSERT_TRUE(std::isfinite(out.data()[i]));
}

TEST(UNetTest, NonSquareInput) {
  const auto net = BuildReferenceUNet<float>(3, 4, 3, 0);
  const auto out = net.Forward(RandomTensor<float>(3, 16, 24, 1, 0, 1), nullptr);
  EXPECT_EQ(out.channels(), 3);
  EXPECT_EQ(out.height(), 16);
  EXPECT_EQ(out.width(), 24);
}

TEST(UNetTest, SeededInitIsDeterministic) {
  const auto a = BuildReferenceUNet<float>(2, 8, 3, 0);
  const auto b = BuildReferenceUNet<float>(2, 8, 3, 0);
  const auto c = BuildReferenceUNet<float>(2, 8, 3, 1);
  EXPECT_TRUE(a.parameters() == b.parameters());
  EXPECT_FALSE(a.parameters() == c.parameters());
}

TEST(UNetTest, ParameterCountsMatchLayout) {
  const auto a = BuildReferenceUNet<float>(5, 16, 4, 1);
  const auto b = BuildReferenceUNet<float>(5, 16, 4, 1);
  EXPECT_GT(ParameterCount(a), 0);
  EXPECT_EQ(ParameterCount(a), ParameterCount(b));
  EXPECT_EQ(ParameterCount(a), ExpectedUNetParams(3, 5, 16, 4));
  const auto ref = BuildReferenceUNet<float>(2, 8, 3, 0);
  EXPECT_EQ(ParameterCount(ref), ExpectedUNetParams(3, 2, 8, 3));
  EXPECT_EQ(ParameterCount(ref), 29930);
}

TEST(ParameterSetTest, SingleKernelCount) {
  ParameterSet<float> p;
  p.Add("conv.weight", {1, 1, 3, 3});
  EXPECT_EQ(p.ScalarCount(), 9);
}

TEST(UNetTest, BuildLimits) {
  EXPECT_THROW(BuildReferenceUNet<float>(2, 8, 1, 0), InvalidArgument);
  EXPECT_THROW(BuildReferenceUNet<float>(2, 3, 3, 0), InvalidArgument);
  EXPECT_THROW(BuildReferenceUNet<float>(1, 8, 3, 0), InvalidArgument);
}

TEST(UNetTest, RejectsIncompatibleInput) {
  const auto net = BuildReferenceUNet<float>(2, 4, 3, 0);
  EXPECT_THROW(net.Forward(Tensor<float>(3, 18, 16), nullptr), ShapeMismatch);
  EXPECT_THROW(net.Forward(Tensor<float>(1, 16, 16), nullptr), ShapeMismatch);
}

TEST(SiameseTest, IdenticalInputsGiveIdenticalOutputs) {
  const auto net = BuildReferenceUNet<float>(3, 4, 3, 2);
  const auto img = RandomTensor<float>(3, 32, 32, 3, 0, 1);
  const auto out = SiameseForward(net, img, ApplyMask(img, HoleMask(32, 32, 1)));
  EXPECT_TRUE(out.plain == out.masked);
  EXPECT_EQ(out.plain.channels(), 3);
  EXPECT_TRUE(out.plain.SameShape(out.masked));
}

TEST(SiameseTest, ShapeMismatchThrows) {
  const auto net = BuildReferenceUNet<float>(2, 4, 2, 0);
  EXPECT_THROW(SiameseForward(net, Tensor<float>(3, 8, 8), Tensor<float>(3, 8, 10)),
               ShapeMismatch);
}

TEST(SiameseTest, SharedParameterPerturbationMovesBothBranches) {
  auto net = BuildReferenceUNet<double>(2, 4, 2, 3);
  const auto img = RandomTensor<double>(3, 16, 16, 4, 0, 1);
  const auto masked =
      ApplyMask(img, GenerateMask(16, 16, MaskRegime::High(), {}, 1));
  const auto before = SiameseForward(net, img, masked);
  net.parameters()[0].values[0] += 1e-3;
  const auto after = SiameseForward(net, img, masked);
  EXPECT_FALSE(before.plain == after.plain);
  EXPECT_FALSE(before.masked == after.masked);
}

TEST(SiameseTest, GradientsFromBothBranchesLandInOneSet) {
  const auto net = BuildReferenceUNet<double>(2, 4, 2, 5);
  const auto img = RandomTensor<double>(3, 8, 8, 6, 0, 1);
  const auto masked = ApplyMask(img, GenerateMask(8, 8, MaskRegime::High(), {}, 2));
  ForwardTape<double> t1, t2;
  const auto out = SiameseForward(net, img, masked, &t1, &t2);
  const auto g1 = RandomTensor<double>(2, 8, 8, 7);
  const auto g2 = RandomTensor<double>(2, 8, 8, 8);
  auto both = net.parameters().ZerosLike();
  net.Backward(t1, g1, both);
  net.Backward(t2, g2, both);
  auto a = net.parameters().ZerosLike();
  auto b = net.parameters().ZerosLike();
  net.Backward(t1, g1, a);
  net.Backward(t2, g2, b);
  for (std::size_t i = 0; i < both.size(); ++i)
    for (std::size_t j = 0; j < both[i].values.size(); ++j)
      ASSERT_NEAR(both[i].values[j], a[i].values[j] + b[i].values[j], 1e-12);
}

TEST(MaskSupModelTest, WrapperAddsNoParameters) {
  auto net = BuildReferenceUNet<float>(2, 8, 3, 0);
  MaskSupModel<float> model(net);
  EXPECT_EQ(ParameterCount(model), ParameterCount(net));
  net.ResetForwardCalls();
  const auto img = RandomTensor<float>(3, 16, 16, 1, 0, 1);
  model.Forward(img, img);
  EXPECT_EQ(net.forward_calls(), 2);
}

TEST(InferTest, SinglePassNoMask) {
  auto net = BuildReferenceUNet<float>(2, 4, 3, 0);
  const auto img = RandomTensor<float>(3, 16, 16, 1, 0, 1);
  net.ResetForwardCalls();
  const auto masks = MaskGenerationCount();
  const LabelMap l = Infer(net, img);
  EXPECT_EQ(net.forward_calls(), 1);
  EXPECT_EQ(MaskGenerationCount(), masks);
  EXPECT_EQ(l.height(), 16);
  Infer(net, img);
  EXPECT_EQ(net.forward_calls(), 2);
}

TEST(InferTest, ArgmaxStrictAndTie) {
  LogitsMap<float> z(4, 2, 2, 0.0f);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) z.At(2, y, x) = 1.0f;
  for (auto v : ArgmaxLabels(z)) EXPECT_EQ(v, 2);
  LogitsMap<float> t(4, 1, 1, -1.0f);
  t.At(0, 0, 0) = 3.0f;
  t.At(3, 0, 0) = 3.0f;
  EXPECT_EQ(ArgmaxLabels(t).At(0, 0), 0);
}

TEST(UNetTest, CopyIsIndependent) {
  auto a = BuildReferenceUNet<float>(2, 4, 2, 0);
  UNet<float> b = a;
  b.parameters()[0].values[0] += 1.0f;
  EXPECT_FALSE(a.parameters() == b.parameters());
}

}  // namespace
}  // namespace masksup
