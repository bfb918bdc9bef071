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

#include <Eigen/Core>
#include <array>
#include <optional>
#include <vector>

#include "ehoi/annotations.hpp"

namespace ehoi {

/// Raw outputs of the four attribute heads for one hand.
struct AttributePrediction {
  Eigen::Vector2d side_logits = Eigen::Vector2d::Zero();   // (left, right)
  Eigen::Vector2d state_logits = Eigen::Vector2d::Zero();  // (no_contact, contact), appearance only
  Eigen::Vector2d glove_logits = Eigen::Vector2d::Zero();  // (no_glove, glove)
  Eigen::Vector3d offset = Eigen::Vector3d(1, 0, 0);       // (v_x, v_y, m)

  HandSide side() const { return side_logits[1] > side_logits[0] ? HandSide::Right : HandSide::Left; }
  GloveStatus glove() const { return glove_logits[1] > glove_logits[0] ? GloveStatus::Glove : GloveStatus::NoGlove; }
  /// Direction renormalized to unit length, magnitude clamped at zero.
  OffsetVector offset_vector() const;
};

/// P(class 1) of a two-class logit pair.
double softmax_positive(const Eigen::Vector2d& logits);

struct HandPrediction {
  AttributePrediction attributes;
  double contact_appearance = 0.5;  // P(contact) from the appearance head
  double contact_multimodal = 0.5;  // P(contact) from the early-fusion classifier
  double contact_fused = 0.5;       // after late fusion
  std::array<Point2d, kNumKeypoints> keypoints{};

  ContactState contact() const { return contact_fused >= 0.5 ? ContactState::Contact : ContactState::NoContact; }
};

enum class DetectionKind { Hand, Object };

struct Detection {
  DetectionKind kind = DetectionKind::Hand;
  int id = 0;  // ground-truth id in gt-proposal mode, running index otherwise
  BBox bbox;
  double confidence = 1.0;
  int category_id = -1;              // objects only
  std::optional<HandPrediction> hand;  // hands only
};

}  // namespace ehoi
