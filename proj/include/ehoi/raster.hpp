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

#include <algorithm>
#include <cmath>
#include <span>

#include "ehoi/geometry.hpp"

// Coverage rasterization by pixel centers: pixel (x, y) is inside a shape iff
// (x + 0.5, y + 0.5) is. Each routine calls plot(x, y) once per covered pixel.
namespace ehoi::raster {

namespace detail {

template <typename Inside, typename Plot>
void scan(double x0, double y0, double x1, double y1, int width, int height, Inside&& inside, Plot&& plot) {
  const int xa = std::max(0, static_cast<int>(std::floor(x0 - 0.5)));
  const int ya = std::max(0, static_cast<int>(std::floor(y0 - 0.5)));
  const int xb = std::min(width - 1, static_cast<int>(std::ceil(x1 + 0.5)));
  const int yb = std::min(height - 1, static_cast<int>(std::ceil(y1 + 0.5)));
  for (int y = ya; y <= yb; ++y)
    for (int x = xa; x <= xb; ++x)
      if (inside(Point2d(x + 0.5, y + 0.5))) plot(x, y);
}

inline double segment_distance(const Point2d& p, const Point2d& a, const Point2d& b) {
  const Point2d ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

}  // namespace detail

template <typename Plot>
void fill_rect(const BBox& box, int width, int height, Plot&& plot) {
  detail::scan(box.x_min, box.y_min, box.x_max, box.y_max, width, height,
               [&](const Point2d& p) { return box.contains(p); }, plot);
}

template <typename Plot>
void fill_ellipse(const Point2d& c, double rx, double ry, int width, int height, Plot&& plot) {
  detail::scan(c.x() - rx, c.y() - ry, c.x() + rx, c.y() + ry, width, height,
               [&](const Point2d& p) {
                 const double dx = (p.x() - c.x()) / rx, dy = (p.y() - c.y()) / ry;
                 return dx * dx + dy * dy <= 1.0;
               },
               plot);
}

/// Thick segment with round caps.
template <typename Plot>
void fill_capsule(const Point2d& a, const Point2d& b, double radius, int width, int height, Plot&& plot) {
  detail::scan(std::min(a.x(), b.x()) - radius, std::min(a.y(), b.y()) - radius, std::max(a.x(), b.x()) + radius,
               std::max(a.y(), b.y()) + radius, width, height,
               [&](const Point2d& p) { return detail::segment_distance(p, a, b) <= radius; }, plot);
}

/// Even-odd fill of a simple polygon.
template <typename Plot>
void fill_polygon(std::span<const Point2d> poly, int width, int height, Plot&& plot) {
  if (poly.size() < 3) return;
  double x0 = poly[0].x(), y0 = poly[0].y(), x1 = x0, y1 = y0;
  for (const auto& v : poly) {
    x0 = std::min(x0, v.x()), x1 = std::max(x1, v.x());
    y0 = std::min(y0, v.y()), y1 = std::max(y1, v.y());
  }
  detail::scan(x0, y0, x1, y1, width, height,
               [&](const Point2d& p) {
                 bool in = false;
                 for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
                   const auto &a = poly[i], &b = poly[j];
                   if ((a.y() > p.y()) != (b.y() > p.y()) &&
                       p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x())
                     in = !in;
                 }
                 return in;
               },
               plot);
}

}  // namespace ehoi::raster
