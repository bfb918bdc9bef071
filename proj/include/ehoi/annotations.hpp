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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ehoi/geometry.hpp"

namespace ehoi {

enum class HandSide { Left, Right };
enum class ContactState { NoContact, Contact };
enum class GloveStatus { NoGlove, Glove };

inline constexpr int kNumKeypoints = 21;

/// Keypoint slot order: wrist, then thumb/index/middle/ring/pinky, four
/// joints each from base to tip.
enum KeypointSlot : int {
  kWrist = 0,
  kThumbCmc = 1, kThumbMcp = 2, kThumbIp = 3, kThumbTip = 4,
  kIndexMcp = 5, kIndexPip = 6, kIndexDip = 7, kIndexTip = 8,
  kMiddleMcp = 9, kMiddlePip = 10, kMiddleDip = 11, kMiddleTip = 12,
  kRingMcp = 13, kRingPip = 14, kRingDip = 15, kRingTip = 16,
  kPinkyMcp = 17, kPinkyPip = 18, kPinkyDip = 19, kPinkyTip = 20,
};

struct Keypoint {
  double x = 0, y = 0;
  bool visible = true;

  bool operator==(const Keypoint&) const = default;
};

/// Link from a hand to its active object: unit direction from the hand box
/// center plus the center distance divided by the image diagonal.
struct OffsetVector {
  double v_x = 1, v_y = 0, m = 0;

  bool operator==(const OffsetVector&) const = default;
};

struct HandAnnotation {
  int id = 0;
  BBox bbox;
  HandSide side = HandSide::Left;
  ContactState contact = ContactState::NoContact;
  GloveStatus glove = GloveStatus::NoGlove;
  std::array<Keypoint, kNumKeypoints> keypoints{};
  std::optional<OffsetVector> offset;
  std::optional<int> active_object_id;

  bool operator==(const HandAnnotation&) const = default;
};

struct ObjectAnnotation {
  int id = 0;
  BBox bbox;
  int category_id = 0;
  bool active = false;

  bool operator==(const ObjectAnnotation&) const = default;
};

struct ImageRecord {
  std::string image_id;
  int width = 0, height = 0;
  std::string rgb_path;
  std::optional<std::string> depth_path;
  std::optional<std::string> mask_path;
  std::vector<HandAnnotation> hands;
  std::vector<ObjectAnnotation> objects;

  const ObjectAnnotation* find_object(int id) const;
  bool operator==(const ImageRecord&) const = default;
};

struct Category {
  int id = 0;
  std::string name;

  bool operator==(const Category&) const = default;
};

/// One split's worth of records. Asset paths inside records are relative to
/// `root`, the directory that held the annotation file.
struct Split {
  std::string name;
  std::vector<ImageRecord> images;

  bool operator==(const Split&) const = default;
};

struct Dataset {
  std::vector<Category> categories;
  std::vector<Split> splits;
  std::filesystem::path root;

  const Split* find_split(const std::string& name) const;
  std::size_t num_images() const;
  /// Equality ignores `root`.
  bool operator==(const Dataset& o) const { return categories == o.categories && splits == o.splits; }
};

struct ParseWarning {
  std::string image_id;
  std::string message;
};

struct ParseResult {
  Dataset dataset;
  std::vector<ParseWarning> warnings;
};

/// Reads either one split file (split named after the file stem) or a
/// directory holding any of train.json / val.json / test.json.
/// Throws ehoi::Error on malformed documents or invariant violations.
ParseResult parse_dataset(const std::filesystem::path& path);

/// Parses a single split document from text.
ParseResult parse_split_text(const std::string& text, const std::string& split_name);

/// Canonical serialization of one split: categories then images, fixed key order.
std::string write_split_text(const std::vector<Category>& categories, const Split& split);
void write_split_file(const std::vector<Category>& categories, const Split& split,
                      const std::filesystem::path& path);

/// Checks every record invariant; throws validation errors naming the image and field.
void validate_record(const ImageRecord& record, const std::vector<Category>& categories);

struct DatasetStats {
  std::string split;
  std::int64_t n_images = 0, n_hands = 0, n_ehois = 0, n_left = 0, n_right = 0, n_objects = 0;
  double glove_fraction = 0;  // percent, rounded to 2 decimals
};

/// One entry per split (when per_split) followed by the total.
std::vector<DatasetStats> compute_stats(const Dataset& dataset, bool per_split = true);
DatasetStats compute_stats(const std::vector<ImageRecord>& images, const std::string& label);

/// Fixed-width table with the same columns as the usual dataset-statistics table.
std::string format_stats_table(const std::vector<DatasetStats>& stats);

OffsetVector derive_offset(const BBox& hand, const BBox& object, double width, double height);
Point2d project_interaction_point(const BBox& hand, const OffsetVector& offset, double width, double height);

const char* to_string(HandSide s);
const char* to_string(ContactState s);
const char* to_string(GloveStatus s);

}  // namespace ehoi
