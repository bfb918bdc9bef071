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

#include <filesystem>
#include <vector>

#include "config.hpp"
#include "ehoi/metrics.hpp"

namespace ehoi::cli {

/// `{"images":[{"image_id", "hands":[{bbox, confidence, side, contact, glove, object_bbox|null, object_category|null}]}]}`
json predictions_to_json(const std::vector<metrics::ImagePrediction>& predictions);
std::vector<metrics::ImagePrediction> predictions_from_json(const json& doc);
std::vector<metrics::ImagePrediction> read_predictions(const std::filesystem::path& path);

}  // namespace ehoi::cli
