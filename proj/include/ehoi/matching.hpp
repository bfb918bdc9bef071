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

#include <optional>
#include <string>
#include <vector>

#include "ehoi/detection.hpp"

namespace ehoi {

struct EhoiQuadruple {
  std::size_t hand_index = 0;                  // into the hands list passed to match()
  ContactState contact = ContactState::NoContact;
  std::optional<std::size_t> active_object;   // into the objects list
  GloveStatus glove = GloveStatus::NoGlove;
  Point2d interaction_point = Point2d::Zero();
  bool no_object_warning = false;             // contact hand but no candidate objects

  bool operator==(const EhoiQuadruple&) const = default;
};

struct MatchOptions {
  /// Reject the nearest object when farther than this many pixels. Off by default.
  std::optional<double> max_distance;
};

/// Associates each hand predicted in contact with the object whose box center
/// is nearest its projected interaction point; ties go to the lowest index.
std::vector<EhoiQuadruple> match(const std::vector<Detection>& hands, const std::vector<Detection>& objects,
                                 double width, double height, const MatchOptions& options = {});

/// Exhaustive reference for match(): scans every (hand, object) pair independently.
std::vector<EhoiQuadruple> match_oracle(const std::vector<Detection>& hands, const std::vector<Detection>& objects,
                                        double width, double height, const MatchOptions& options = {});

/// `{hand_id, contact, object_id|null, glove, interaction_point:[x,y]}` per quadruple.
std::string quadruples_to_json(const std::vector<EhoiQuadruple>& quads, const std::vector<Detection>& hands,
                               const std::vector<Detection>& objects);

}  // namespace ehoi
