// Copyright 2026 The Krait Lab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <filesystem>
#include <limits>

#include "krait/checkpoint.hpp"

using namespace krait;

TEST(Checkpoint, GnnParamsBitExact) {
  GnnParams p = GnnParams::init(5, 7, 3, 11);
  p.classifier_bias = Vector::Random(3) * 1e-7;
  p.layer1(0, 0) = std::numeric_limits<double>::denorm_min();
  p.layer2(1, 1) = -0.1;
  p.frozen.layer1 = true;
  const auto back = params_from_checkpoint(checkpoint_from_string(checkpoint_to_string(to_checkpoint(p))));
  EXPECT_TRUE(back.layer1 == p.layer1);
  EXPECT_TRUE(back.layer2 == p.layer2);
  EXPECT_TRUE(back.classifier == p.classifier);
  EXPECT_TRUE(back.classifier_bias == p.classifier_bias);
  EXPECT_EQ(back.frozen, p.frozen);
}

TEST(Checkpoint, PromptModelThroughFile) {
  PromptModel m;
  m.params = GnnParams::init(4, 6, 2, 1);
  m.prompt = init_prompt(3, 4, 2);
  m.prompt.cross_threshold = 0.17;
  GraphPrompt t = init_prompt(2, 4, 3);
  t.learnable = false;
  m.trigger = t;
  m.order = TriggerOrder::kAfterPrompt;
  const auto path = std::filesystem::temp_directory_path() / "krait_ckpt_test.json";
  save_checkpoint(to_checkpoint(m), path);
  const auto back = model_from_checkpoint(load_checkpoint(path));
  EXPECT_TRUE(back.prompt.tokens == m.prompt.tokens);
  EXPECT_EQ(back.prompt.cross_threshold, 0.17);
  ASSERT_TRUE(back.trigger.has_value());
  EXPECT_TRUE(back.trigger->tokens == t.tokens);
  EXPECT_FALSE(back.trigger->learnable);
  EXPECT_EQ(back.order, TriggerOrder::kAfterPrompt);
  EXPECT_EQ(checkpoint_to_string(to_checkpoint(back)), checkpoint_to_string(to_checkpoint(m)));
}

TEST(Checkpoint, NoTriggerStaysEmpty) {
  PromptModel m;
  m.params = GnnParams::init(4, 6, 2, 1);
  m.prompt = init_prompt(3, 4, 2);
  EXPECT_FALSE(model_from_checkpoint(to_checkpoint(m)).trigger.has_value());
}

TEST(Checkpoint, MalformedRejected) {
  EXPECT_THROW(checkpoint_from_string("{}"), Error);
  EXPECT_THROW(checkpoint_from_string("not json"), Error);
  EXPECT_THROW(checkpoint_from_string(R"({"format":"krait-checkpoint","version":1,"meta":{},
    "blocks":[{"name":"x","rows":2,"cols":2,"data":[1,2,3]}]})"), Error);
}
