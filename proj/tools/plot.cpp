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

#include "plot.hpp"

#include <algorithm>
#include <array>

#include "ehoi/raster.hpp"

namespace ehoi::cli {

namespace {

using Color = std::array<std::uint8_t, 3>;

constexpr Color kInk{30, 30, 30}, kGrid{215, 215, 215}, kBackground{255, 255, 255};
constexpr std::array<Color, 6> kPalette{{{31, 119, 180}, {255, 127, 14}, {44, 160, 44},
                                         {214, 39, 40}, {148, 103, 189}, {140, 86, 75}}};

struct Canvas {
  RgbImage img;
  int left, top, right, bottom;  // plot area in pixels

  Canvas(int w, int h, int margin) : img(w, h, kBackground), left(margin), top(margin / 2), right(w - margin / 2), bottom(h - margin) {}

  // (u, v) in [0, 1]^2, v up
  Point2d at(double u, double v) const { return {left + u * (right - left), bottom - v * (bottom - top)}; }

  void rect(const BBox& b, Color c) {
    raster::fill_rect(b, img.width, img.height, [&](int x, int y) { std::copy(c.begin(), c.end(), img.at(x, y)); });
  }
  void line(const Point2d& a, const Point2d& b, double r, Color c) {
    raster::fill_capsule(a, b, r, img.width, img.height, [&](int x, int y) { std::copy(c.begin(), c.end(), img.at(x, y)); });
  }
  void frame(int x_divisions) {
    for (int k = 1; k <= 4; ++k) line(at(0, k * 0.25), at(1, k * 0.25), 0.5, kGrid);
    line(at(0, 0), at(1, 0), 1.0, kInk);
    line(at(0, 0), at(0, 1), 1.0, kInk);
    for (int k = 0; k <= x_divisions; ++k) {
      const double u = static_cast<double>(k) / x_divisions;
      line(at(u, 0), at(u, 0) + Point2d(0, 6), 1.0, kInk);
    }
    for (int k = 0; k <= 4; ++k) line(at(0, k * 0.25), at(0, k * 0.25) - Point2d(6, 0), 1.0, kInk);
  }
};

}  // namespace

RgbImage pr_curve_chart(const metrics::PrCurve& curve, int size) {
  Canvas c(size, size, size / 8);
  c.frame(4);
  for (int k = 1; k <= 4; ++k) c.line(c.at(k * 0.25, 0), c.at(k * 0.25, 1), 0.5, kGrid);
  const auto& p = curve.precision;
  const auto& r = curve.recall;
  for (std::size_t i = 1; i < p.size(); ++i) c.line(c.at(r[i - 1], p[i - 1]), c.at(r[i], p[i]), 1.2, kPalette[0]);
  if (p.size() == 1) c.line(c.at(r[0], p[0]), c.at(r[0], p[0]), 2.0, kPalette[0]);
  return c.img;
}

RgbImage grouped_bar_chart(const std::vector<std::vector<double>>& runs, int width, int height) {
  Canvas c(width, height, height / 8);
  std::size_t groups = 0;
  for (const auto& r : runs) groups = std::max(groups, r.size());
  c.frame(static_cast<int>(std::max<std::size_t>(groups, 1)));
  if (groups == 0 || runs.empty()) return c.img;
  const double slot = 1.0 / static_cast<double>(groups);
  const double bar = slot * 0.8 / static_cast<double>(runs.size());
  for (std::size_t g = 0; g < groups; ++g)
    for (std::size_t k = 0; k < runs.size(); ++k) {
      if (g >= runs[k].size()) continue;
      const double u0 = g * slot + slot * 0.1 + k * bar, v = std::clamp(runs[k][g] / 100.0, 0.0, 1.0);
      const Point2d a = c.at(u0, v), b = c.at(u0 + bar * 0.9, 0);
      c.rect({a.x(), a.y(), b.x(), b.y()}, kPalette[k % kPalette.size()]);
    }
  return c.img;
}

}  // namespace ehoi::cli
