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

#include <algorithm>
#include <random>

#include "ehoi/error.hpp"
#include "ehoi/metrics.hpp"
#include "support/oracles.hpp"

using namespace ehoi;
using namespace ehoi::metrics;

namespace {

ImageRecord one_hand_image(const std::string& id, const BBox& hand, const BBox& object, int category) {
  ImageRecord r;
  r.image_id = id;
  r.width = r.height = 100;
  r.objects.push_back({0, object, category, true});
  HandAnnotation h;
  h.id = 1;
  h.bbox = hand;
  h.side = HandSide::Right;
  h.glove = GloveStatus::Glove;
  h.contact = ContactState::Contact;
  h.active_object_id = 0;
  r.hands.push_back(h);
  return r;
}

PredictedHand perfect(const ImageRecord& r, double conf = 0.9) {
  const auto& h = r.hands[0];
  PredictedHand p;
  p.bbox = h.bbox;
  p.confidence = conf;
  p.side = h.side;
  p.glove = h.glove;
  p.contact = h.contact;
  p.object_bbox = r.objects[0].bbox;
  p.object_category = r.objects[0].category_id;
  return p;
}

}  // namespace

TEST(Metrics, PerfectPredictionsScoreHundred) {
  std::vector<ImageRecord> gt{one_hand_image("a", {10, 10, 30, 30}, {40, 40, 60, 60}, 0),
                              one_hand_image("b", {5, 5, 25, 25}, {50, 50, 70, 70}, 1)};
  std::vector<ImagePrediction> preds{{"a", {perfect(gt[0])}}, {"b", {perfect(gt[1])}}};
  const auto r = evaluate(preds, gt);
  for (double v : {r.ap_hand, r.ap_hand_side, r.ap_hand_glove, r.ap_hand_state, r.map_hand_obj, r.map_hand_all})
    EXPECT_DOUBLE_EQ(v, 100.0);
}

TEST(Metrics, HandCountedSmallCase) {
  // two GT hands; ranked predictions: TP, FP, TP -> precision 1, 1/2, 2/3 at
  // recall 1/2, 1/2, 1 -> all-point AP = 0.5 * 1 + 0.5 * 2/3
  std::vector<ImageRecord> gt{one_hand_image("a", {10, 10, 30, 30}, {40, 40, 60, 60}, 0),
                              one_hand_image("b", {5, 5, 25, 25}, {50, 50, 70, 70}, 0)};
  PredictedHand fp = perfect(gt[0], 0.8);
  fp.bbox = {70, 70, 90, 90};
  std::vector<ImagePrediction> preds{{"a", {perfect(gt[0], 0.9), fp}}, {"b", {perfect(gt[1], 0.7)}}};
  const auto ap = compound_ap(preds, gt, kNone);
  EXPECT_NEAR(ap.ap, 100.0 * (0.5 + 0.5 * 2.0 / 3.0), 1e-12);
  EXPECT_EQ(ap.n_gt, 2u);
  EXPECT_EQ(ap.n_pred, 3u);
}

TEST(Metrics, DuplicateDetectionIsFalsePositive) {
  std::vector<ImageRecord> gt{one_hand_image("a", {10, 10, 30, 30}, {40, 40, 60, 60}, 0)};
  std::vector<ImagePrediction> preds{{"a", {perfect(gt[0], 0.9), perfect(gt[0], 0.8)}}};
  const auto ap = compound_ap(preds, gt, kNone);
  ASSERT_EQ(ap.curve.precision.size(), 2u);
  EXPECT_DOUBLE_EQ(ap.curve.precision[1], 0.5);
  EXPECT_DOUBLE_EQ(ap.ap, 100.0);
}

TEST(Metrics, IouThresholdIsInclusive) {
  // prediction [10,30]x[10,20] vs GT [10,30]x[10,30]: IoU exactly 0.5
  std::vector<ImageRecord> gt{one_hand_image("a", {10, 10, 30, 30}, {40, 40, 60, 60}, 0)};
  PredictedHand p = perfect(gt[0]);
  p.bbox = {10, 10, 30, 20};
  EXPECT_DOUBLE_EQ(compound_ap({{"a", {p}}}, gt, kNone).ap, 100.0);
}

TEST(Metrics, WrongAttributeConsumesGroundTruth) {
  std::vector<ImageRecord> gt{one_hand_image("a", {10, 10, 30, 30}, {40, 40, 60, 60}, 0)};
  PredictedHand wrong = perfect(gt[0], 0.9);
  wrong.side = HandSide::Left;
  const PredictedHand right = perfect(gt[0], 0.5);
  std::vector<ImagePrediction> preds{{"a", {wrong, right}}};
  EXPECT_DOUBLE_EQ(compound_ap(preds, gt, kSide).ap, 0.0);
  EXPECT_DOUBLE_EQ(compound_ap(preds, gt, kNone).ap, 100.0);
}

TEST(Metrics, EmptyGroundTruthConvention) {
  std::vector<ImageRecord> gt{ImageRecord{}};
  gt[0].image_id = "a";
  EXPECT_DOUBLE_EQ(compound_ap({{"a", {}}}, gt, kNone).ap, 100.0);
  PredictedHand p;
  p.bbox = {0, 0, 10, 10};
  EXPECT_DOUBLE_EQ(compound_ap({{"a", {p}}}, gt, kNone).ap, 0.0);
}

TEST(Metrics, SplitMismatchRejected) {
  std::vector<ImageRecord> gt{one_hand_image("a", {10, 10, 30, 30}, {40, 40, 60, 60}, 0)};
  try {
    evaluate({{"b", {}}}, gt);
    FAIL() << "expected a validation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Validation);
    EXPECT_NE(std::string(e.what()).find("split mismatch"), std::string::npos);
  }
}

TEST(Metrics, ElevenPointHandCase) {
  // one GT, single TP: precision 1 at recall 1 -> every sampled recall has precision 1
  std::vector<ImageRecord> gt{one_hand_image("a", {10, 10, 30, 30}, {40, 40, 60, 60}, 0)};
  EvalConfig cfg;
  cfg.integration = ApIntegration::ElevenPoint;
  EXPECT_DOUBLE_EQ(compound_ap({{"a", {perfect(gt[0])}}}, gt, kNone, cfg).ap, 100.0);
}

TEST(Metrics, PairMeanOnlyOverGroundTruthCategories) {
  std::vector<ImageRecord> gt{one_hand_image("a", {10, 10, 30, 30}, {40, 40, 60, 60}, 2)};
  PredictedHand p = perfect(gt[0], 0.9);
  PredictedHand other = perfect(gt[0], 0.5);
  other.object_category = 3;  // category absent from GT
  const auto table = map_hand_obj({{"a", {p, other}}}, gt);
  EXPECT_DOUBLE_EQ(table.map, 100.0);
  EXPECT_TRUE(table.per_category.contains(3));
  EXPECT_DOUBLE_EQ(table.per_category.at(3).ap, 0.0);
}

TEST(Metrics, MatchesBruteForceOracle) {
  Rng rng(42);
  for (int trial = 0; trial < 150; ++trial) {
    const auto inst = oracle::random_metrics_instance(rng);
    for (unsigned req : {unsigned(kNone), unsigned(kSide), unsigned(kState), unsigned(kGlove)})
      ASSERT_NEAR(compound_ap(inst.preds, inst.gt, req).ap, oracle::hand_ap(inst.preds, inst.gt, req), 1e-9)
          << "trial " << trial << " req " << req;
    ASSERT_NEAR(map_hand_obj(inst.preds, inst.gt).map, oracle::pair_map(inst.preds, inst.gt, kNone), 1e-9);
    ASSERT_NEAR(map_hand_all(inst.preds, inst.gt).map,
                oracle::pair_map(inst.preds, inst.gt, kSide | kState | kGlove), 1e-9);
    EvalConfig eleven;
    eleven.integration = ApIntegration::ElevenPoint;
    ASSERT_NEAR(compound_ap(inst.preds, inst.gt, kNone, eleven).ap,
                oracle::hand_ap(inst.preds, inst.gt, kNone, eleven), 1e-9);
  }
}

TEST(Metrics, InvariantUnderPredictionOrder) {
  Rng rng(7);
  std::mt19937 shuffler(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto inst = oracle::random_metrics_instance(rng);
    const auto before = evaluate(inst.preds, inst.gt);
    for (auto& ip : inst.preds) std::shuffle(ip.hands.begin(), ip.hands.end(), shuffler);
    std::shuffle(inst.preds.begin(), inst.preds.end(), shuffler);
    const auto after = evaluate(inst.preds, inst.gt);
    EXPECT_EQ(before.ap_hand, after.ap_hand);
    EXPECT_EQ(before.ap_hand_state, after.ap_hand_state);
    EXPECT_EQ(before.map_hand_all, after.map_hand_all);
  }
}

TEST(Metrics, CompoundScoresNeverExceedHandScore) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const auto inst = oracle::random_metrics_instance(rng);
    const auto r = evaluate(inst.preds, inst.gt);
    EXPECT_GE(r.ap_hand, r.ap_hand_side);
    EXPECT_GE(r.ap_hand, r.ap_hand_state);
    EXPECT_GE(r.ap_hand, r.ap_hand_glove);
    EXPECT_GE(r.map_hand_obj, r.map_hand_all);
  }
}

TEST(Metrics, ReportTableColumnOrder) {
  MetricsReport r;
  const std::string t = r.to_table();
  const auto pos = [&](const char* s) { return t.find(s); };
  EXPECT_LT(pos("AP Hand "), pos("AP Hand+Side"));
  EXPECT_LT(pos("AP Hand+Side"), pos("AP Hand+Glove"));
  EXPECT_LT(pos("AP Hand+Glove"), pos("AP Hand+State"));
  EXPECT_LT(pos("AP Hand+State"), pos("mAP Hand+Obj"));
  EXPECT_LT(pos("mAP Hand+Obj"), pos("mAP Hand+All"));
}
