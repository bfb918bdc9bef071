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

#include "ehoi/matching.hpp"

#include <limits>

#include "ehoi/error.hpp"
#include "json.hpp"

namespace ehoi {

namespace {

const HandPrediction& hand_prediction(const Detection& d) {
  if (d.kind != DetectionKind::Hand || !d.hand) throw validation_error("match: hand detection without attributes");
  return *d.hand;
}

EhoiQuadruple base_quadruple(std::size_t index, const Detection& hand, double width, double height) {
  const HandPrediction& hp = hand_prediction(hand);
  EhoiQuadruple q;
  q.hand_index = index;
  q.contact = hp.contact();
  q.glove = hp.attributes.glove();
  q.interaction_point = project_interaction_point(hand.bbox, hp.attributes.offset_vector(), width, height);
  return q;
}

}  // namespace

std::vector<EhoiQuadruple> match(const std::vector<Detection>& hands, const std::vector<Detection>& objects,
                                 double width, double height, const MatchOptions& options) {
  Eigen::Matrix<double, Eigen::Dynamic, 2> centers(objects.size(), 2);
  for (std::size_t i = 0; i < objects.size(); ++i) centers.row(i) = objects[i].bbox.center().transpose();

  std::vector<EhoiQuadruple> out;
  out.reserve(hands.size());
  for (std::size_t h = 0; h < hands.size(); ++h) {
    EhoiQuadruple q = base_quadruple(h, hands[h], width, height);
    if (q.contact == ContactState::Contact) {
      if (objects.empty()) {
        q.no_object_warning = true;
      } else {
        const Eigen::VectorXd d2 = (centers.rowwise() - q.interaction_point.transpose()).rowwise().squaredNorm();
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < d2.size(); ++i)
          if (d2[i] < d2[best]) best = i;
        if (!options.max_distance || d2[best] <= *options.max_distance * *options.max_distance)
          q.active_object = static_cast<std::size_t>(best);
      }
    }
    out.push_back(q);
  }
  return out;
}

std::vector<EhoiQuadruple> match_oracle(const std::vector<Detection>& hands, const std::vector<Detection>& objects,
                                        double width, double height, const MatchOptions& options) {
  std::vector<EhoiQuadruple> out;
  for (std::size_t h = 0; h < hands.size(); ++h) {
    EhoiQuadruple q = base_quadruple(h, hands[h], width, height);
    if (q.contact == ContactState::Contact) {
      q.no_object_warning = objects.empty();
      // An object wins iff no other object is strictly closer and no
      // lower-index object is equally close.
      for (std::size_t i = 0; i < objects.size() && !q.active_object; ++i) {
        auto dist2 = [&](std::size_t k) {
          const Point2d c = objects[k].bbox.center();
          const double dx = c.x() - q.interaction_point.x(), dy = c.y() - q.interaction_point.y();
          return dx * dx + dy * dy;
        };
        bool wins = true;
        for (std::size_t j = 0; j < objects.size() && wins; ++j)
          wins = j < i ? dist2(j) > dist2(i) : dist2(j) >= dist2(i);
        if (wins && (!options.max_distance || dist2(i) <= *options.max_distance * *options.max_distance))
          q.active_object = i;
        if (wins) break;
      }
    }
    out.push_back(q);
  }
  return out;
}

std::string quadruples_to_json(const std::vector<EhoiQuadruple>& quads, const std::vector<Detection>& hands,
                               const std::vector<Detection>& objects) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& q : quads) {
    nlohmann::ordered_json j;
    j["hand_id"] = hands.at(q.hand_index).id;
    j["contact"] = to_string(q.contact);
    j["object_id"] = q.active_object ? nlohmann::ordered_json(objects.at(*q.active_object).id) : nlohmann::ordered_json(nullptr);
    j["glove"] = to_string(q.glove);
    j["interaction_point"] = {q.interaction_point.x(), q.interaction_point.y()};
    arr.push_back(std::move(j));
  }
  return arr.dump();
}

}  // namespace ehoi
