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

#include "masksup/config.hpp"

#include "gtest/gtest.h"

namespace masksup {
namespace {

TEST(ConfigTest, DefaultsAreMaskSupHigh) {
  const ExperimentConfig cfg = ConfigFromKeyValues({});
  EXPECT_EQ(cfg.train.mode, TrainMode::kMaskSup);
  EXPECT_EQ(cfg.train.weights, (LossWeights{1, 1, 1}));
  EXPECT_EQ(cfg.train.regime.level, MaskLevel::kHigh);
  EXPECT_EQ(cfg.train.learning_rate, 1e-3);
}

TEST(ConfigTest, ModeSelectsArmWeights) {
  EXPECT_EQ(ConfigFromKeyValues({{"mode", "baseline"}}).train.weights,
            (LossWeights{1, 0, 0}));
  EXPECT_EQ(ConfigFromKeyValues({{"mode", "cb"}}).train.weights, (LossWeights{1, 1, 0}));
  EXPECT_EQ(ConfigFromKeyValues({{"mode", "MaskSup"}, {"alpha3", "0.5"}}).train.weights,
            (LossWeights{1, 1, 0.5}));
}

TEST(ConfigTest, ModeConsistencyEnforced) {
  EXPECT_THROW(ConfigFromKeyValues({{"mode", "baseline"}, {"alpha2", "1"}}),
               ConfigError);
  EXPECT_THROW(ConfigFromKeyValues({{"mode", "cb"}, {"alpha3", "1"}}), ConfigError);
  EXPECT_THROW(ConfigFromKeyValues({{"mode", "cb"}, {"alpha2", "0"}}), ConfigError);
  EXPECT_THROW(ConfigFromKeyValues({{"mode", "masksup"}, {"alpha3", "0"}}),
               ConfigError);
  EXPECT_THROW(ConfigFromKeyValues({{"alpha1", "-1"}}), std::exception);
}

TEST(ConfigTest, UnknownKeyNamed) {
  try {
    ConfigFromKeyValues({{"learning_rat", "0.1"}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("learning_rat"), std::string::npos);
  }
}

TEST(ConfigTest, BadValues) {
  EXPECT_THROW(ConfigFromKeyValues({{"epochs", "ten"}}), ConfigError);
  EXPECT_THROW(ConfigFromKeyValues({{"mode", "fancy"}}), ConfigError);
  EXPECT_THROW(ConfigFromKeyValues({{"regime", "medium"}}), ConfigError);
  EXPECT_THROW(ConfigFromKeyValues({{"dataset", "dir"}}), ConfigError);
  EXPECT_THROW(ConfigFromKeyValues({{"batch_size", "0"}}), ConfigError);
}

TEST(ConfigTest, ParseKeyValuesSyntax) {
  const KeyValues kv = ParseKeyValues(
      "# comment\n"
      "mode = cb   # trailing\n"
      "\n"
      "data_dir = \"/tmp/with space\"\n"
      "seed=4\n");
  EXPECT_EQ(kv.at("mode"), "cb");
  EXPECT_EQ(kv.at("data_dir"), "/tmp/with space");
  EXPECT_EQ(kv.at("seed"), "4");
  EXPECT_THROW(ParseKeyValues("no equals sign\n"), ConfigError);
}

TEST(ConfigTest, RoundTripCoversEveryKey) {
  KeyValues kv = {{"mode", "cb"},        {"regime", "low"},
                  {"epochs", "3"},       {"seed", "17"},
                  {"dataset", "multiclass"}, {"imbalance", "2.5"},
                  {"ignore_label", "255"}, {"mask.hole_radius_max", "6.5"},
                  {"learning_rate", "0.0003"}};
  const ExperimentConfig cfg = ConfigFromKeyValues(kv);
  const KeyValues canon = ToKeyValues(cfg);
  EXPECT_EQ(canon.size(), ConfigKeys().size());
  for (const auto& k : ConfigKeys()) EXPECT_TRUE(canon.count(k)) << k;
  EXPECT_EQ(std::stod(canon.at("learning_rate")), 0.0003);
  const ExperimentConfig again =
      ConfigFromKeyValues(ParseKeyValues(FormatKeyValues(canon)));
  EXPECT_EQ(ToKeyValues(again), canon);
  EXPECT_EQ(ConfigHash(again), ConfigHash(cfg));
  EXPECT_EQ(again.data.num_classes, 6);
  EXPECT_EQ(*again.data.ignore_label, 255);
}

TEST(ConfigTest, HashDependsOnContent) {
  const auto a = ConfigFromKeyValues({{"seed", "0"}});
  const auto b = ConfigFromKeyValues({{"seed", "1"}});
  EXPECT_NE(ConfigHash(a), ConfigHash(b));
  EXPECT_EQ(ConfigHash(a).size(), 8u);
}

}  // namespace
}  // namespace masksup
