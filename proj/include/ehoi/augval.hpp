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

#include "ehoi/geometry.hpp"
#include "ehoi/image.hpp"

namespace ehoi::augval {

struct SsimParams {
  double dynamic_range = 255.0;
  double k1 = 0.01, k2 = 0.03;
  int window = 11;
  double sigma = 1.5;

  void validate() const;
  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

/// Row-major boolean mask; true = pixel is excluded.
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MaskedImage {
  RgbImage image;
  Mask mask;
  double masked_fraction = 0;
};

inline constexpr double kDefaultMargin = 0.15;
inline constexpr double kDefaultThreshold = 0.95;

/// Pixel mask covering every box dilated by `margin` of its own size per side.
Mask hand_region_mask(int width, int height, const std::vector<BBox>& hands, double margin);

/// Replaces masked pixels with mid-gray. Throws "degenerate mask" if every
/// pixel ends up masked.
MaskedImage mask_hand_regions(const RgbImage& image, const std::vector<BBox>& hands, double margin = kDefaultMargin);

/// Mean local SSIM over "valid" Gaussian windows (no padding). Windows that
/// touch a masked pixel are excluded. Separable-filter implementation.
double ssim(const Plane& a, const Plane& b, const SsimParams& params = {}, const Mask* ignore = nullptr);

/// Direct per-window evaluation with two-pass moments; slow, used as a reference.
double ssim_reference(const Plane& a, const Plane& b, const SsimParams& params = {}, const Mask* ignore = nullptr);

/// Normalized 2D Gaussian window weights (window x window).
Plane gaussian_window(const SsimParams& params);

struct PairVerdict {
  std::string image_id;
  double ssim_score = 0;
  bool kept = false;
  double masked_fraction = 0;
};

/// Discard iff score < threshold.
PairVerdict validate_pair(const RgbImage& original, const RgbImage& augmented, const std::vector<BBox>& hands,
                          double threshold = kDefaultThreshold, const SsimParams& params = {},
                          double margin = kDefaultMargin);

struct PairInput {
  std::string image_id;
  RgbImage original, augmented;
  std::vector<BBox> hands;
};

struct ValidationReport {
  std::vector<PairVerdict> pairs;  // sorted by image_id
  std::optional<double> keep_rate; // empty when there are no pairs

  std::vector<std::string> kept_ids() const;
  std::string to_json() const;
};

ValidationReport filter_dataset(const std::vector<PairInput>& pairs, double threshold = kDefaultThreshold,
                                const SsimParams& params = {}, double margin = kDefaultMargin);

/// Test stand-in for the diffusion augmenter: paints a yellow glove overlay
/// inside each hand box and optionally perturbs the background.
RgbImage mock_augment(const RgbImage& original, const std::vector<BBox>& hands, bool corrupt_background,
                      double margin = kDefaultMargin);

}  // namespace ehoi::augval
