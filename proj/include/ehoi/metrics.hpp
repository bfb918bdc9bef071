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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ehoi/annotations.hpp"

namespace ehoi::metrics {

enum class ApIntegration { AllPoint, ElevenPoint };

struct EvalConfig {
  double iou_threshold = 0.5;
  ApIntegration integration = ApIntegration::AllPoint;

  void validate() const;
};

/// Attribute requirements for compound AP; combine with |.
enum Attr : unsigned { kNone = 0, kSide = 1, kState = 2, kGlove = 4 };

/// One predicted hand plus, when it was matched to an object, that object.
struct PredictedHand {
  BBox bbox;
  double confidence = 1;
  HandSide side = HandSide::Left;
  ContactState contact = ContactState::NoContact;
  GloveStatus glove = GloveStatus::NoGlove;
  std::optional<BBox> object_bbox;
  std::optional<int> object_category;
};

struct ImagePrediction {
  std::string image_id;
  std::vector<PredictedHand> hands;
};

struct PrCurve {
  std::vector<double> precision, recall;  // one point per ranked prediction
};

struct ApResult {
  double ap = 0;  // percent
  PrCurve curve;
  std::size_t n_gt = 0, n_pred = 0;
};

/// Area under the precision envelope, in percent.
double average_precision(const std::vector<double>& precision, const std::vector<double>& recall, ApIntegration mode);

/// Hand AP where a match also needs the attributes in `required` to agree.
/// Predictions are ranked by descending confidence (ties broken by a
/// canonical key so input order never matters) and greedily assigned to the
/// unmatched ground-truth hand of highest IoU >= threshold.
ApResult compound_ap(const std::vector<ImagePrediction>& predictions, const std::vector<ImageRecord>& ground_truth,
                     unsigned required, const EvalConfig& config = {});

struct PairApTable {
  double map = 0;                          // percent, mean over categories with GT pairs
  std::map<int, ApResult> per_category;   // every category with GT pairs or predictions
};

/// <hand, active object> pair mAP. A pair is correct when the hand matches a
/// ground-truth contact hand and the predicted object box matches that hand's
/// active object; attributes in `required` must agree as well.
PairApTable pair_map(const std::vector<ImagePrediction>& predictions, const std::vector<ImageRecord>& ground_truth,
                     unsigned required, const EvalConfig& config = {});

inline PairApTable map_hand_obj(const std::vector<ImagePrediction>& p, const std::vector<ImageRecord>& gt,
                                const EvalConfig& c = {}) {
  return pair_map(p, gt, kNone, c);
}
inline PairApTable map_hand_all(const std::vector<ImagePrediction>& p, const std::vector<ImageRecord>& gt,
                                const EvalConfig& c = {}) {
  return pair_map(p, gt, kSide | kState | kGlove, c);
}

struct MetricsReport {
  double ap_hand = 0, ap_hand_side = 0, ap_hand_glove = 0, ap_hand_state = 0, map_hand_obj = 0, map_hand_all = 0;
  std::map<int, std::pair<double, double>> per_category;  // category -> (AP hand+obj, AP hand+all)
  std::size_t n_gt_hands = 0, n_pred_hands = 0, n_gt_pairs = 0, n_pred_pairs = 0;
  PrCurve hand_curve;

  std::string to_json() const;
  /// Fixed-width table, columns in the order Hand, +Side, +Glove, +State, +Obj, +All.
  std::string to_table() const;
};

/// Full protocol. Throws a validation error when prediction and ground-truth image ids differ.
MetricsReport evaluate(const std::vector<ImagePrediction>& predictions, const std::vector<ImageRecord>& ground_truth,
                       const EvalConfig& config = {});

}  // namespace ehoi::metrics
