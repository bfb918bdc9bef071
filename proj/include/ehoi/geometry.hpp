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
#include <algorithm>
#include <cmath>

namespace ehoi {

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

using Point2d = Point2<double>;

/// Axis-aligned box in pixel coordinates, origin top-left.
template <typename Scalar>
struct BBoxT {
  Scalar x_min{0}, y_min{0}, x_max{0}, y_max{0};

  Scalar width() const { return x_max - x_min; }
  Scalar height() const { return y_max - y_min; }
  Scalar area() const { return width() * height(); }
  Point2<Scalar> center() const { return {(x_min + x_max) / 2, (y_min + y_max) / 2}; }

  bool valid() const {
    return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
           std::isfinite(y_max) && x_min < x_max && y_min < y_max;
  }

  /// Grows each side by `fraction` of the box's own extent along that axis.
  BBoxT dilated(Scalar fraction) const {
    const Scalar dx = fraction * width(), dy = fraction * height();
    return {x_min - dx, y_min - dy, x_max + dx, y_max + dy};
  }

  BBoxT translated(Scalar tx, Scalar ty) const { return {x_min + tx, y_min + ty, x_max + tx, y_max + ty}; }

  BBoxT clamped(Scalar w, Scalar h) const {
    return {std::clamp(x_min, Scalar(0), w), std::clamp(y_min, Scalar(0), h), std::clamp(x_max, Scalar(0), w),
            std::clamp(y_max, Scalar(0), h)};
  }

  bool contains(const Point2<Scalar>& p) const {
    return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max;
  }

  bool operator==(const BBoxT&) const = default;
};

using BBox = BBoxT<double>;

/// Intersection over union; 0 for disjoint boxes.
template <typename Scalar>
Scalar iou(const BBoxT<Scalar>& a, const BBoxT<Scalar>& b) {
  const Scalar iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const Scalar ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0 || ih <= 0) return Scalar(0);
  const Scalar inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

}  // namespace ehoi
