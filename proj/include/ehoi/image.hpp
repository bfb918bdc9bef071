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
#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace ehoi {

/// Row-major single-channel plane; rows index y, columns index x.
template <typename Scalar>
using PlaneT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Plane = PlaneT<double>;
using Planef = PlaneT<float>;

/// 8-bit interleaved RGB image.
struct RgbImage {
  int width = 0, height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h, std::array<std::uint8_t, 3> fill = {0, 0, 0});

  std::uint8_t* at(int x, int y) { return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const std::uint8_t* at(int x, int y) const { return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  bool operator==(const RgbImage&) const = default;
};

/// 16-bit single-channel image (depth or instance mask).
struct Gray16Image {
  int width = 0, height = 0;
  std::vector<std::uint16_t> pixels;

  Gray16Image() = default;
  Gray16Image(int w, int h, std::uint16_t fill = 0) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint16_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint16_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool operator==(const Gray16Image&) const = default;
};

void write_png(const RgbImage& image, const std::filesystem::path& path);
void write_png(const Gray16Image& image, const std::filesystem::path& path);
RgbImage read_rgb_png(const std::filesystem::path& path);
Gray16Image read_gray16_png(const std::filesystem::path& path);

/// Rec. 601 luma in [0, 255].
Plane luminance(const RgbImage& image);

/// Channel c of the image as a plane in [0, 1].
Planef channel_plane(const RgbImage& image, int c);

/// Inverse depth in [0, 1] from its 16-bit encoding.
Planef decode_depth(const Gray16Image& depth);
std::uint16_t encode_depth(double normalized_inverse_depth);

}  // namespace ehoi
