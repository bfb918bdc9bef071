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

#include "ehoi/detection.hpp"

#include <algorithm>
#include <cmath>

namespace ehoi {

OffsetVector AttributePrediction::offset_vector() const {
  const double norm = std::hypot(offset[0], offset[1]);
  const double m = std::max(0.0, offset[2]);
  if (norm == 0.0 || !std::isfinite(norm) || m == 0.0) return {1.0, 0.0, m};
  return {offset[0] / norm, offset[1] / norm, m};
}

double softmax_positive(const Eigen::Vector2d& logits) { return 1.0 / (1.0 + std::exp(logits[0] - logits[1])); }

}  // namespace ehoi
