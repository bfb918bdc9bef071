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

#include "ehoi/loss.hpp"
#include "ehoi/rng.hpp"
#include "support/fixtures.hpp"

using namespace ehoi;
using namespace ehoi::net;
using M = nn::Matrix<double>;

using fixtures::random_loss_instance;

TEST(Loss, TotalIsExactSumOfComponents) {
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const auto in = random_loss_instance(rng, rng.uniform_int(1, 6));
    Outputs<double> g;
    const auto b = compute_loss(in.out, in.tgt, g);
    EXPECT_EQ(b.total, b.backbone + b.depth + b.side + b.contact + b.offset + b.keypoints + b.glove);
    for (double v : {b.backbone, b.depth, b.side, b.contact, b.offset, b.keypoints, b.glove}) EXPECT_GE(v, 0.0);
  }
}

TEST(Loss, EmptyBatchIsAllZero) {
  Outputs<double> out, g;
  out.side = out.state = out.fusion_state = out.glove = M(2, 0);
  out.offset = M(3, 0);
  Targets<double> tgt;
  tgt.offset = M(3, 0);
  const auto b = compute_loss(out, tgt, g);
  EXPECT_EQ(b.total, 0.0);
}

TEST(Loss, ShapeMismatchRejected) {
  Rng rng(2);
  auto in = random_loss_instance(rng);
  in.tgt.side.pop_back();
  Outputs<double> g;
  EXPECT_THROW(compute_loss(in.out, in.tgt, g), Error);
}

TEST(Loss, PerfectPredictionsCostNothing) {
  Rng rng(3);
  const auto in = fixtures::perfect_loss_instance(rng);
  Outputs<double> g;
  const auto b = compute_loss(in.out, in.tgt, g);
  for (double v : {b.backbone, b.depth, b.side, b.contact, b.offset, b.keypoints, b.glove}) EXPECT_LE(v, 1e-6);
}

TEST(Loss, EveryComponentMatchesFiniteDifferences) {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    auto in = random_loss_instance(rng, rng.uniform_int(1, 4));
    for (const auto& [name, err] : fixtures::loss_gradient_errors(in))
      EXPECT_LE(err, gradcheck::kTolerance) << name << " trial " << trial;
  }
}

TEST(Loss, OffsetIgnoresNoContactHands) {
  Rng rng(5);
  auto in = random_loss_instance(rng, 4);
  Outputs<double> g;
  const double before = compute_loss(in.out, in.tgt, g).offset;
  in.out.offset.col(0).setConstant(100);  // hand 0 has no contact
  EXPECT_EQ(compute_loss(in.out, in.tgt, g).offset, before);
  EXPECT_EQ(g.offset.col(0).cwiseAbs().sum(), 0.0);
}
