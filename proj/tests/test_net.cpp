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
#include <filesystem>
#include <fstream>

#include "ehoi/error.hpp"
#include "ehoi/net.hpp"
#include "ehoi/synthgen.hpp"

using namespace ehoi;
using namespace ehoi::net;

namespace fs = std::filesystem;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.pyramid_dim = 16;
  c.head_hidden = 16;
  c.crop_size = 48;
  return c;
}

Sample scene_sample(std::int64_t index, std::uint64_t seed = 1) {
  synth::SceneConfig cfg;
  cfg.seed = seed;
  cfg.min_hands = 1;
  auto s = synth::generate_scene(cfg, index);
  return {s.record, s.rgb, decode_depth(s.depth), s.instance_mask};
}

std::vector<Sample> scene_samples(int n, std::uint64_t seed = 1) {
  std::vector<Sample> out;
  for (int i = 0; i < n; ++i) out.push_back(scene_sample(i, seed));
  return out;
}

}  // namespace

TEST(Net, PyramidShapes) {
  Model m(ModelConfig{}, 1);
  const auto f = m.extract_features(RgbImage(96, 96, {100, 120, 140}));
  EXPECT_EQ(f.p4.channels, 64);
  EXPECT_EQ(f.p4.height, 24);
  EXPECT_EQ(f.p8.height, 12);
  EXPECT_EQ(f.p16.width, 6);
}

TEST(Net, FeaturesAreDeterministicAndFinite) {
  Model m(small_config(), 2);
  const auto s = scene_sample(0);
  const auto a = m.extract_features(s.rgb), b = m.extract_features(s.rgb);
  EXPECT_EQ(a.p4.data, b.p4.data);
  EXPECT_EQ(a.p8.data, b.p8.data);
  const auto z = m.extract_features(RgbImage(64, 64));
  EXPECT_TRUE(z.p4.data.allFinite());
  EXPECT_TRUE(z.p16.data.allFinite());
}

TEST(Net, RejectsNonConformingDimensions) {
  Model m(small_config(), 1);
  EXPECT_THROW(m.extract_features(RgbImage(100, 96)), Error);
}

TEST(Net, HandFeatureVector) {
  Model m(small_config(), 3);
  const auto s = scene_sample(1);
  const auto f = m.extract_features(s.rgb);
  const BBox box = s.record.hands[0].bbox;
  const VectorF a = m.pool_hand_features(f, box), b = m.pool_hand_features(f, box);
  EXPECT_EQ(a.size(), kHfvDim);
  EXPECT_EQ(a, b);
  EXPECT_THROW(m.pool_hand_features(f, BBox{10, 10, 10.5, 11}), Error);
}

TEST(Net, HandFeatureVectorIsTranslationEquivariant) {
  Model m(small_config(), 4);
  Rng rng(4);
  FeaturePyramid a, b;
  a.p8 = b.p8 = Tensor(16, 16, 16);
  for (Eigen::Index i = 0; i < a.p8.data.size(); ++i) a.p8.data.data()[i] = static_cast<float>(rng.normal());
  const int sx = 2, sy = 1;  // cells on the stride-8 map
  for (int c = 0; c < 16; ++c)
    for (int y = sy; y < 16; ++y)
      for (int x = sx; x < 16; ++x) b.p8.at(c, y, x) = a.p8.at(c, y - sy, x - sx);
  const BBox box{20.5, 18.25, 60.0, 71.5};
  const VectorF ha = m.pool_hand_features(a, box);
  const VectorF hb = m.pool_hand_features(b, box.translated(8.0 * sx, 8.0 * sy));
  EXPECT_LE((ha - hb).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Net, FreshHeadsAreUniform) {
  Model m(small_config(), 5);
  const auto s = scene_sample(2);
  const auto a = m.predict_attributes(m.pool_hand_features(m.extract_features(s.rgb), s.record.hands[0].bbox));
  EXPECT_EQ(a.side_logits, Eigen::Vector2d::Zero());
  EXPECT_EQ(a.state_logits, Eigen::Vector2d::Zero());
  EXPECT_EQ(a.glove_logits, Eigen::Vector2d::Zero());
  EXPECT_EQ(a.offset.size(), 3);
  EXPECT_EQ(a.offset_vector(), (OffsetVector{1, 0, 0}));
}

TEST(Net, KeypointHeatmapsAreNormalized) {
  Model m(small_config(), 6);
  const auto s = scene_sample(3);
  const auto k = m.predict_keypoints(m.extract_features(s.rgb), s.record.hands[0].bbox);
  ASSERT_EQ(k.heatmaps.rows(), kNumKeypoints);
  ASSERT_EQ(k.heatmaps.cols(), 32 * 32);
  for (int r = 0; r < kNumKeypoints; ++r) EXPECT_NEAR(k.heatmaps.row(r).sum(), 1.0, 1e-5);
  EXPECT_GE(k.heatmaps.minCoeff(), 0.0f);
}

TEST(Net, HeatmapCellDecodesToCellCenter) {
  // box 32 px wide over a 32-cell grid: cell (row 3, col 5) covers x in [15, 16), y in [23, 24)
  const Point2d p = heatmap_cell_to_image(BBox{10, 20, 42, 52}, 32, 3, 5);
  EXPECT_DOUBLE_EQ(p.x(), 15.5);
  EXPECT_DOUBLE_EQ(p.y(), 23.5);
}

TEST(Net, KeypointTargetsPeakAtKeypoint) {
  std::array<Keypoint, kNumKeypoints> kp{};
  for (auto& k : kp) k = {25.5, 33.5, true};  // cell (13, 15) of a 32-grid over [10,42]x[20,52]
  const MatrixF t = keypoint_targets(kp, BBox{10, 20, 42, 52}, 32, 1.5);
  Eigen::Index j;
  t.row(0).maxCoeff(&j);
  EXPECT_EQ(j, 13 * 32 + 15);
  EXPECT_NEAR(t.row(0).sum(), 1.0, 1e-5);
}

TEST(Net, DepthMatchesInputAndRange) {
  Model m(small_config(), 7);
  const auto d = m.predict_depth(m.extract_features(RgbImage(96, 64, {30, 60, 90})));
  EXPECT_EQ(d.rows(), 64);
  EXPECT_EQ(d.cols(), 96);
  EXPECT_GE(d.minCoeff(), 0.0f);
  EXPECT_LE(d.maxCoeff(), 1.0f);
}

TEST(Net, EarlyFusionInput) {
  Model m(small_config(), 8);
  const auto s = scene_sample(4);
  const auto& h = s.record.hands[0];
  const MatrixF heat = MatrixF::Zero(kNumKeypoints, 32 * 32);
  const Tensor in = m.fusion_input(s.rgb, &*s.mask, h.id + 1, *s.depth, heat, h.bbox);
  EXPECT_EQ(in.channels, kFusionChannels);
  EXPECT_EQ(kFusionChannels, 26);
  EXPECT_EQ(in.height, 48);
  EXPECT_GE(in.data.minCoeff(), 0.0f);
  EXPECT_LE(in.data.maxCoeff(), 1.0f + 1e-6f);
  EXPECT_GT(in.data.row(3).sum(), 0.0f);  // the hand's own mask is visible in its crop
  EXPECT_TRUE(m.early_fusion(in).allFinite());
  Tensor wrong(25, 48, 48);
  EXPECT_THROW(m.early_fusion(wrong), Error);
}

TEST(Net, EarlyFusionIsPerSample) {
  Model m(small_config(), 9);
  const auto samples = scene_samples(3);
  std::vector<Tensor> inputs;
  for (const auto& s : samples)
    inputs.push_back(m.fusion_input(s.rgb, &*s.mask, s.record.hands[0].id + 1, *s.depth,
                                    MatrixF::Constant(kNumKeypoints, 32 * 32, 1.0f / 1024), s.record.hands[0].bbox));
  std::vector<Eigen::Vector2d> fwd, rev;
  for (const auto& t : inputs) fwd.push_back(m.early_fusion(t));
  for (auto it = inputs.rbegin(); it != inputs.rend(); ++it) rev.push_back(m.early_fusion(*it));
  for (std::size_t i = 0; i < fwd.size(); ++i) EXPECT_EQ(fwd[i], rev[fwd.size() - 1 - i]);
}

TEST(Net, LateFusionRule) {
  const auto logits = [](double p) { return Eigen::Vector2d(0, std::log(p / (1 - p))); };
  EXPECT_NEAR(late_fusion(logits(0.9), logits(0.9)), 0.9, 1e-12);
  EXPECT_NEAR(late_fusion(logits(0.2), logits(0.8)), 0.5, 1e-12);
  Rng rng(10);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector2d a(rng.normal() * 3, rng.normal() * 3), b(rng.normal() * 3, rng.normal() * 3);
    const double pa = softmax_positive(a), pb = softmax_positive(b);
    for (auto rule : {LateFusion::Mean, LateFusion::Weighted}) {
      const double f = late_fusion(a, b, rule, rng.uniform());
      EXPECT_GE(f, std::min(pa, pb) - 1e-15);
      EXPECT_LE(f, std::max(pa, pb) + 1e-15);
    }
  }
}

TEST(Net, GtProposalInference) {
  Model m(small_config(), 11);
  const auto s = scene_sample(5);
  const auto dets = m.infer(s.rgb, InferMode::GtProposals, &s.record, &*s.mask);
  std::size_t hands = 0, objects = 0;
  for (const auto& d : dets) {
    (d.kind == DetectionKind::Hand ? hands : objects)++;
    EXPECT_GE(d.confidence, 0.0);
    EXPECT_LE(d.confidence, 1.0);
    if (d.kind == DetectionKind::Hand) {
      ASSERT_TRUE(d.hand.has_value());
    }
  }
  EXPECT_EQ(hands, s.record.hands.size());
  EXPECT_EQ(objects, s.record.objects.size());
  EXPECT_TRUE(m.infer(RgbImage(), InferMode::GtProposals, &s.record).empty());
  EXPECT_THROW(m.infer(s.rgb, InferMode::GtProposals), Error);
}

TEST(Net, GtProposalPredictionsIgnoreOtherBoxes) {
  Model m(small_config(), 12);
  for (int i = 0; i < 20; ++i) {
    const auto s = scene_sample(i);
    if (s.record.hands.size() < 2) continue;
    ImageRecord only = s.record;
    only.hands.erase(only.hands.begin() + 1, only.hands.end());
    const auto all = m.infer(s.rgb, InferMode::GtProposals, &s.record, &*s.mask);
    const auto one = m.infer(s.rgb, InferMode::GtProposals, &only, &*s.mask);
    const auto find = [&](const std::vector<Detection>& v) {
      for (const auto& d : v)
        if (d.kind == DetectionKind::Hand && d.id == only.hands[0].id) return *d.hand;
      throw std::runtime_error("hand missing");
    };
    const auto a = find(all), b = find(one);
    EXPECT_EQ(a.attributes.side_logits, b.attributes.side_logits);
    EXPECT_EQ(a.attributes.offset, b.attributes.offset);
    EXPECT_EQ(a.contact_fused, b.contact_fused);
    return;
  }
  FAIL() << "no two-hand scene found";
}

TEST(Net, DetectorConfidencesAreSorted) {
  ModelConfig c = small_config();
  c.detector_threshold = 0.01;
  Model m(c, 13);
  const auto s = scene_sample(6);
  const auto dets = m.infer(s.rgb, InferMode::Detector);
  double last_hand = 2, last_obj = 2;
  for (const auto& d : dets) {
    double& last = d.kind == DetectionKind::Hand ? last_hand : last_obj;
    EXPECT_LE(d.confidence, last);
    last = d.confidence;
  }
}

TEST(Net, CheckpointRoundTrip) {
  Model m(small_config(), 14);
  const auto path = fs::temp_directory_path() / "ehoi_ckpt_test.bin";
  m.save(path, R"({"note":"x"})");
  std::string extra;
  const Model back = Model::load(path, &extra);
  EXPECT_EQ(extra, R"({"note":"x"})");
  const auto s = scene_sample(7);
  const auto a = m.infer(s.rgb, InferMode::GtProposals, &s.record, &*s.mask);
  const auto b = back.infer(s.rgb, InferMode::GtProposals, &s.record, &*s.mask);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].confidence, b[i].confidence);
  {
    std::ofstream(path, std::ios::binary) << "garbage";
  }
  EXPECT_THROW(Model::load(path), Error);
  fs::remove(path);
  try {
    Model::load(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
}

TEST(Net, StratifiedSubsetsAreNested) {
  std::vector<ImageRecord> records;
  for (const auto& s : scene_samples(60, 3)) records.push_back(s.record);
  std::vector<std::size_t> prev;
  for (double f : {0.10, 0.25, 0.50, 1.00}) {
    const auto cur = stratified_subset(records, f, 21);
    EXPECT_TRUE(std::includes(cur.begin(), cur.end(), prev.begin(), prev.end())) << f;
    EXPECT_EQ(cur, stratified_subset(records, f, 21));
    prev = cur;
  }
  EXPECT_EQ(prev.size(), records.size());
  EXPECT_THROW(stratified_subset(records, 0.0, 1), Error);
}

TEST(Net, TrainingIsDeterministicAndReducesLoss) {
  const auto data = scene_samples(8);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 4;
  tc.lr_steps = {};
  const auto a = train(&data, nullptr, Regime::SynthOnly, small_config(), tc, 5);
  const auto b = train(&data, nullptr, Regime::SynthOnly, small_config(), tc, 5);
  ASSERT_EQ(a.log.size(), 3u);
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    EXPECT_EQ(a.log[i].loss.total, b.log[i].loss.total);
    EXPECT_EQ(a.log[i].loss.total, a.log[i].loss.sum_components());
    EXPECT_EQ(a.log[i].loss.backbone, 0.0);
  }
  EXPECT_LT(a.log.back().loss.total, a.log.front().loss.total);
  auto pa = const_cast<Model&>(a.model).parameters(), pb = const_cast<Model&>(b.model).parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value) << pa[i]->name;
}

TEST(Net, DetectorTrainingAddsBackboneLoss) {
  const auto data = scene_samples(4);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 4;
  tc.train_detector = true;
  const auto r = train(&data, nullptr, Regime::SynthOnly, small_config(), tc, 5);
  EXPECT_GT(r.log[0].loss.backbone, 0.0);
}

TEST(Net, RegimesNeedTheirSplits) {
  const auto data = scene_samples(4);
  TrainConfig tc;
  tc.epochs = 1;
  tc.finetune_epochs = 1;
  EXPECT_THROW(train(&data, nullptr, Regime::RealOnly, small_config(), tc, 1), Error);
  EXPECT_THROW(train(nullptr, &data, Regime::SynthPlusReal, small_config(), tc, 1), Error);
  tc.real_fraction = 0.5;
  const auto r = train(&data, &data, Regime::SynthPlusReal, small_config(), tc, 1);
  ASSERT_EQ(r.log.size(), 2u);
  EXPECT_EQ(r.log[0].stage, "synth");
  EXPECT_EQ(r.log[1].stage, "real");
  EXPECT_LT(r.real_subset.size(), data.size());
}
