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

#pragma once

// Constructed inputs shared by unit and acceptance tests.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ehoi/annotations.hpp"
#include "ehoi/augval.hpp"
#include "ehoi/detection.hpp"
#include "ehoi/loss.hpp"
#include "ehoi/rng.hpp"
#include "ehoi/synthgen.hpp"
#include "support/gradcheck.hpp"

namespace ehoi::fixtures {

namespace fs = std::filesystem;

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline fs::path temp_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / name;
  fs::remove_all(d);
  return d;
}

// ---- annotations

inline std::string keypoints_json(double x, double y) {
  std::string s = "[";
  for (int k = 0; k < kNumKeypoints; ++k) {
    s += "[" + std::to_string(x + k * 0.5) + "," + std::to_string(y) + ",true]";
    if (k + 1 < kNumKeypoints) s += ",";
  }
  return s + "]";
}

/// One image: left gloved hand in contact with object 0, right bare hand free,
/// three objects. Hand-counted: 2 hands, 1 EHOI, 1 left, 1 right, 3 objects, 50% gloved.
inline std::string annotation_fixture(const std::string& left_extra = R"("offset":[1,0,0.25],"active_object_id":0)",
                                      bool object0_active = true) {
  return std::string(R"({"categories":[{"id":0,"name":"pliers"},{"id":1,"name":"socket"}],"images":[{)") +
         R"("image_id":"f0","width":100,"height":80,"rgb_path":"f0.png","depth_path":null,"mask_path":null,"hands":[)" +
         R"({"id":3,"bbox":[10,10,30,40],"side":"left","contact":"contact","glove":"glove","keypoints":)" +
         keypoints_json(12, 20) + "," + left_extra + "}," +
         R"({"id":4,"bbox":[60,10,80,40],"side":"right","contact":"no_contact","glove":"no_glove","keypoints":)" +
         keypoints_json(62, 20) + R"(,"offset":null,"active_object_id":null}],)" +
         R"("objects":[{"id":0,"bbox":[40,20,50,30],"category_id":0,"active":)" + (object0_active ? "true" : "false") +
         R"(},{"id":1,"bbox":[5,60,25,75],"category_id":1,"active":false},)" +
         R"({"id":2,"bbox":[70,60,90,75],"category_id":1,"active":false}]}]})";
}

// ---- matching

inline Detection hand_at(const BBox& box, bool contact, Eigen::Vector3d offset) {
  Detection d;
  d.kind = DetectionKind::Hand;
  d.bbox = box;
  HandPrediction hp;
  hp.attributes.offset = offset;
  hp.contact_fused = contact ? 0.9 : 0.1;
  d.hand = hp;
  return d;
}

inline Detection object_at(int id, const BBox& box) {
  Detection d;
  d.kind = DetectionKind::Object;
  d.id = id;
  d.bbox = box;
  return d;
}

inline BBox centered(double cx, double cy, double half) { return {cx - half, cy - half, cx + half, cy + half}; }

struct MatchScene {
  std::vector<Detection> hands, objects;
};

/// Hands and objects on an integer grid of a 96x96 image, so exact distance ties are common.
inline MatchScene random_match_scene(Rng& rng) {
  MatchScene s;
  const int n_obj = rng.uniform_int(0, 8), n_hand = rng.uniform_int(0, 5);
  for (int i = 0; i < n_obj; ++i)
    s.objects.push_back(object_at(i, centered(rng.uniform_int(0, 10) * 8, rng.uniform_int(0, 10) * 8, 4)));
  for (int i = 0; i < n_hand; ++i) {
    const double a = rng.uniform_int(0, 7) * 0.7853981633974483;
    s.hands.push_back(hand_at(centered(rng.uniform_int(0, 10) * 8, rng.uniform_int(0, 10) * 8, 6), rng.bernoulli(0.6),
                              {std::cos(a), std::sin(a), rng.uniform(0, 0.4)}));
  }
  return s;
}

// ---- augval

inline Plane random_plane(Rng& rng, int h, int w) {
  Plane p(h, w);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = std::floor(rng.uniform(0, 256));
  return p;
}

inline std::vector<BBox> hand_boxes(const ImageRecord& r) {
  std::vector<BBox> out;
  for (const auto& h : r.hands) out.push_back(h.bbox);
  return out;
}

/// First scene at or after `start` that has a hand.
inline synth::RenderedScene scene_with_hands(std::int64_t start, std::uint64_t seed = 3) {
  synth::SceneConfig cfg;
  cfg.seed = seed;
  cfg.min_hands = 1;
  for (std::int64_t i = start;; ++i) {
    auto s = synth::generate_scene(cfg, i);
    if (!s.record.hands.empty()) return s;
  }
}

// ---- loss

using LossMatrix = nn::Matrix<double>;

inline LossMatrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  LossMatrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

inline LossMatrix normalized_rows(Rng& rng, Eigen::Index r, Eigen::Index c) {
  LossMatrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(0.01, 1.0);
  for (Eigen::Index i = 0; i < r; ++i) m.row(i) /= m.row(i).sum();
  return m;
}

struct LossInstance {
  net::Outputs<double> out;
  net::Targets<double> tgt;
};

/// Small random batch: n hands with 3 keypoint rows on a k x k grid, `images`
/// depth maps of 5x4 and 3x3 detector grids over 2 categories.
inline LossInstance random_loss_instance(Rng& rng, int n = 4, int k = 4, int images = 2) {
  LossInstance in;
  const int cats = 2, g = 3, hw = 5 * 4;
  in.out.side = random_matrix(rng, 2, n);
  in.out.state = random_matrix(rng, 2, n);
  in.out.fusion_state = random_matrix(rng, 2, n);
  in.out.glove = random_matrix(rng, 2, n);
  in.out.offset = random_matrix(rng, 3, n, 0.3);
  in.tgt.offset = random_matrix(rng, 3, n, 0.3);
  for (int i = 0; i < n; ++i) {
    in.tgt.side.push_back(rng.uniform_int(0, 1));
    in.tgt.contact.push_back(i % 2);
    in.tgt.glove.push_back(rng.uniform_int(0, 1));
    in.out.keypoints.push_back(random_matrix(rng, 3, k * k));
    in.tgt.keypoints.push_back(normalized_rows(rng, 3, k * k));
  }
  for (int i = 0; i < images; ++i) {
    in.out.depth.push_back(random_matrix(rng, 1, hw));
    LossMatrix d(1, hw);
    for (Eigen::Index j = 0; j < hw; ++j) d(0, j) = rng.uniform(0.05, 0.95);
    in.tgt.depth.push_back(d);
    in.out.detector.push_back(random_matrix(rng, 1 + cats + 4, g * g));
    LossMatrix heat(1 + cats, g * g), box = random_matrix(rng, 4, g * g), mask = LossMatrix::Zero(1, g * g);
    for (Eigen::Index j = 0; j < heat.size(); ++j) heat.data()[j] = rng.uniform(0.0, 0.95);
    heat(0, 4) = 1.0;
    heat(2, 0) = 1.0;
    mask(0, 4) = mask(0, 0) = 1.0;
    in.tgt.heat.push_back(heat);
    in.tgt.box.push_back(box);
    in.tgt.box_mask.push_back(mask);
  }
  // keep L1 terms away from their kinks relative to the difference step
  for (std::size_t i = 0; i < in.out.depth.size(); ++i)
    for (Eigen::Index j = 0; j < in.out.depth[i].size(); ++j) {
      const double s = nn::sigmoid(in.out.depth[i](0, j));
      if (std::abs(s - in.tgt.depth[i](0, j)) < 0.01) in.tgt.depth[i](0, j) += s > 0.5 ? -0.05 : 0.05;
    }
  for (std::size_t i = 0; i < in.out.detector.size(); ++i)
    for (int r = 0; r < 4; ++r)
      for (Eigen::Index j = 0; j < g * g; ++j)
        if (std::abs(in.out.detector[i](1 + cats + r, j) - in.tgt.box[i](r, j)) < 0.01) in.tgt.box[i](r, j) += 0.1;
  for (Eigen::Index j = 0; j < in.out.offset.size(); ++j) {
    const double d = std::abs(in.out.offset.data()[j] - in.tgt.offset.data()[j]);
    if (std::abs(d - 0.1) < 0.01 || d < 0.01) in.tgt.offset.data()[j] += 0.05;
  }
  return in;
}

/// The same instance with every head set to its target.
inline LossInstance perfect_loss_instance(Rng& rng) {
  auto in = random_loss_instance(rng, 3, 5, 1);
  const double big = 40;
  for (int i = 0; i < 3; ++i) {
    const auto onehot = [&](LossMatrix& m, int y) {
      m.col(i).setConstant(-big);
      m(y, i) = big;
    };
    onehot(in.out.side, in.tgt.side[i]);
    onehot(in.out.state, in.tgt.contact[i]);
    onehot(in.out.fusion_state, in.tgt.contact[i]);
    onehot(in.out.glove, in.tgt.glove[i]);
    in.out.keypoints[i] = in.tgt.keypoints[i].array().log();
  }
  in.out.offset = in.tgt.offset;
  for (Eigen::Index j = 0; j < in.tgt.depth[0].size(); ++j) {
    const double d = in.tgt.depth[0](0, j);
    in.out.depth[0](0, j) = std::log(d / (1 - d));
  }
  auto& det = in.out.detector[0];
  auto& heat = in.tgt.heat[0];
  heat = (heat.array() == 1.0).select(heat, LossMatrix::Zero(heat.rows(), heat.cols()));
  for (Eigen::Index c = 0; c < heat.rows(); ++c)
    for (Eigen::Index j = 0; j < heat.cols(); ++j) det(c, j) = heat(c, j) == 1.0 ? big : -big;
  det.bottomRows(4) = in.tgt.box[0];
  return in;
}

inline double loss_component(const LossInstance& in, double net::LossBreakdown::*field) {
  net::Outputs<double> g;
  return net::compute_loss(in.out, in.tgt, g).*field;
}

/// Finite-difference relative error of every component's gradient, one entry per checked block.
inline std::vector<std::pair<std::string, double>> loss_gradient_errors(LossInstance& in) {
  net::Outputs<double> g;
  net::compute_loss(in.out, in.tgt, g);
  std::vector<std::pair<std::string, double>> errs;
  const auto check = [&](LossMatrix& x, const LossMatrix& analytic, double net::LossBreakdown::*field,
                         const char* name) {
    errs.emplace_back(name, gradcheck::relative_error(x, analytic, [&] { return loss_component(in, field); }));
  };
  using B = net::LossBreakdown;
  check(in.out.side, g.side, &B::side, "side");
  check(in.out.glove, g.glove, &B::glove, "glove");
  check(in.out.state, g.state, &B::contact, "contact/appearance");
  check(in.out.fusion_state, g.fusion_state, &B::contact, "contact/multimodal");
  check(in.out.offset, g.offset, &B::offset, "offset");
  for (std::size_t i = 0; i < in.out.keypoints.size(); ++i) check(in.out.keypoints[i], g.keypoints[i], &B::keypoints, "keypoints");
  for (std::size_t i = 0; i < in.out.depth.size(); ++i) check(in.out.depth[i], g.depth[i], &B::depth, "depth");
  for (std::size_t i = 0; i < in.out.detector.size(); ++i) check(in.out.detector[i], g.detector[i], &B::backbone, "backbone");
  return errs;
}

}  // namespace ehoi::fixtures
