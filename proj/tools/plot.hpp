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

#include <vector>

#include "ehoi/image.hpp"
#include "ehoi/metrics.hpp"

// Static charts rendered straight to RGB buffers. No text; the numbers live
// in the JSON written next to each chart.
namespace ehoi::cli {

/// Precision (y) against recall (x) on the unit square, gridlines every 0.25.
RgbImage pr_curve_chart(const metrics::PrCurve& curve, int size = 400);

/// One group per metric (values in [0, 100]), one colored bar per run.
RgbImage grouped_bar_chart(const std::vector<std::vector<double>>& runs, int width = 640, int height = 360);

}  // namespace ehoi::cli
