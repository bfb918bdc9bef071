/*
 * Copyright 2026 The ehoi Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include "ehoi/matching.hpp"
#include "ehoi/rng.hpp"
#include "support/fixtures.hpp"

using namespace ehoi;

using fixtures::centered;
using fixtures::hand_at;
using fixtures::object_at;

TEST(Matching, PicksNearestCenter) {
  // hand at (20,20); offset points right by 0.2 * diagonal(100,100) ~ 28.28 px
  const auto h = hand_at(centered(20, 20, 5), true, {1, 0, 0.2});
  const std::vector<Detection> objs{object_at(0, centered(80, 20, 5)), object_at(1, centered(50, 22, 5))};
  const auto q = match({h}, objs, 100, 100);
  ASSERT_EQ(q.size(), 1u);
  ASSERT_TRUE(q[0].active_object);
  EXPECT_EQ(*q[0].active_object, 1u);
  EXPECT_NEAR(q[0].interaction_point.x(), 20 + 0.2 * std::hypot(100, 100), 1e-9);
}

TEST(Matching, EquidistantObjectsGoToLowestIndex) {
  const auto h = hand_at(centered(50, 50, 5), true, {1, 0, 0});  // interaction point = hand center
  const std::vector<Detection> objs{object_at(7, centered(60, 50, 3)), object_at(8, centered(40, 50, 3)),
                                    object_at(9, centered(50, 60, 3))};
  for (int rep = 0; rep < 3; ++rep) {
    const auto q = match({h}, objs, 100, 100);
    ASSERT_TRUE(q[0].active_object);
    EXPECT_EQ(*q[0].active_object, 0u);
    EXPECT_EQ(q, match_oracle({h}, objs, 100, 100));
  }
  const std::vector<Detection> reordered{objs[2], objs[1], objs[0]};
  EXPECT_EQ(*match({h}, reordered, 100, 100)[0].active_object, 0u);
}

TEST(Matching, NoContactMeansNoObject) {
  const auto h = hand_at(centered(20, 20, 5), false, {1, 0, 0.2});
  const auto q = match({h}, {object_at(0, centered(40, 20, 5))}, 100, 100);
  EXPECT_FALSE(q[0].active_object);
  EXPECT_EQ(q[0].contact, ContactState::NoContact);
}

TEST(Matching, ContactWithoutObjectsWarns) {
  const auto q = match({hand_at(centered(20, 20, 5), true, {1, 0, 0.2})}, {}, 100, 100);
  EXPECT_TRUE(q[0].no_object_warning);
  EXPECT_FALSE(q[0].active_object);
}

TEST(Matching, MaxDistanceGate) {
  const auto h = hand_at(centered(20, 20, 5), true, {1, 0, 0});
  const std::vector<Detection> objs{object_at(0, centered(80, 20, 5))};
  MatchOptions opt;
  opt.max_distance = 30;
  EXPECT_FALSE(match({h}, objs, 100, 100, opt)[0].active_object);
  opt.max_distance = 60;
  EXPECT_TRUE(match({h}, objs, 100, 100, opt)[0].active_object);
}

TEST(Matching, EquivalentToOracleOnRandomScenes) {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const auto s = fixtures::random_match_scene(rng);
    ASSERT_EQ(match(s.hands, s.objects, 96, 96), match_oracle(s.hands, s.objects, 96, 96)) << "trial " << trial;
  }
}
