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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ehoi/annotations.hpp"
#include "ehoi/image.hpp"

namespace ehoi::synth {

struct SceneConfig {
  int width = 96, height = 96;
  int min_objects = 2, max_objects = 4;
  int min_hands = 0, max_hands = 2;
  double glove_probability = 0.5;
  double contact_probability = 0.5;
  int num_categories = 10;
  /// Wrist-to-middle-fingertip length as a fraction of min(width, height).
  double hand_length = 0.30;
  double min_object_size = 0.15, max_object_size = 0.25;
  /// Bare skin hue range and glove hue range (degrees). The gap between the
  /// two ranges is the hue margin the glove head can rely on.
  double skin_hue_min = 12, skin_hue_max = 30;
  double glove_hue_min = 48, glove_hue_max = 58;
  /// Appearance shift of a "real-like" domain: per-scene channel gains in
  /// [1 - color_jitter, 1 + color_jitter] plus Gaussian sensor noise.
  double color_jitter = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  /// Throws ehoi::Error when a field is out of range.
  void validate() const;
};

/// Rendered buffers share the image's geometry; mask value = instance id + 1.
struct RenderedScene {
  ImageRecord record;
  RgbImage rgb;
  Gray16Image depth;
  Gray16Image instance_mask;
};

std::vector<Category> default_categories(int n = 10);

/// Deterministic in (config.seed, scene_index).
RenderedScene generate_scene(const SceneConfig& config, std::int64_t scene_index);

struct GenerateSummary {
  std::vector<std::filesystem::path> files;  // every file written, in write order
};

/// Writes train.json / val.json / test.json plus png assets under out_dir/images.
/// Scene indices run consecutively across splits.
GenerateSummary generate_dataset(const SceneConfig& config, int n_train, int n_val, int n_test,
                                 const std::filesystem::path& out_dir);

/// Mean hue (degrees) over the instance-mask pixels of the given hands.
double mean_hand_hue(const RenderedScene& scene, GloveStatus which);

}  // namespace ehoi::synth
