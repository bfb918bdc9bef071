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

#include "ehoi/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

#include "ehoi/error.hpp"

namespace ehoi {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_png_rows(const std::filesystem::path& path, int width, int height, int color_type, int bit_depth,
                    const std::vector<png_bytep>& rows) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw io_error("cannot write '" + path.string() + "'");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw io_error("libpng init failed for '" + path.string() + "'");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw io_error("png encode failed for '" + path.string() + "'");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);  // buffers are host little-endian
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

struct Decoded {
  int width = 0, height = 0, channels = 0, bit_depth = 0;
  std::vector<std::uint8_t> bytes;
};

Decoded read_png_raw(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw io_error("cannot open '" + path.string() + "'");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("libpng init failed for '" + path.string() + "'");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw io_error("png decode failed for '" + path.string() + "'");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  Decoded d;
  d.width = static_cast<int>(png_get_image_width(png, info));
  d.height = static_cast<int>(png_get_image_height(png, info));
  const int color = png_get_color_type(png, info);
  d.bit_depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && d.bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (d.bit_depth == 16) png_set_swap(png);
  png_read_update_info(png, info);
  d.channels = png_get_channels(png, info);
  d.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  d.bytes.resize(stride * d.height);
  std::vector<png_bytep> rows(d.height);
  for (int y = 0; y < d.height; ++y) rows[y] = d.bytes.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return d;
}

}  // namespace

RgbImage::RgbImage(int w, int h, std::array<std::uint8_t, 3> fill) : width(w), height(h) {
  pixels.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < pixels.size(); i += 3) std::copy(fill.begin(), fill.end(), pixels.begin() + i);
}

void write_png(const RgbImage& image, const std::filesystem::path& path) {
  std::vector<png_bytep> rows(image.height);
  for (int y = 0; y < image.height; ++y) rows[y] = const_cast<png_bytep>(image.at(0, y));
  write_png_rows(path, image.width, image.height, PNG_COLOR_TYPE_RGB, 8, rows);
}

void write_png(const Gray16Image& image, const std::filesystem::path& path) {
  std::vector<png_bytep> rows(image.height);
  for (int y = 0; y < image.height; ++y)
    rows[y] = reinterpret_cast<png_bytep>(const_cast<std::uint16_t*>(image.pixels.data() + static_cast<std::size_t>(y) * image.width));
  write_png_rows(path, image.width, image.height, PNG_COLOR_TYPE_GRAY, 16, rows);
}

RgbImage read_rgb_png(const std::filesystem::path& path) {
  const Decoded d = read_png_raw(path);
  if (d.bit_depth != 8 || (d.channels != 3 && d.channels != 4))
    throw io_error("'" + path.string() + "' is not an 8-bit RGB png");
  RgbImage img(d.width, d.height);
  for (std::size_t i = 0, n = static_cast<std::size_t>(d.width) * d.height; i < n; ++i)
    for (int c = 0; c < 3; ++c) img.pixels[3 * i + c] = d.bytes[d.channels * i + c];
  return img;
}

Gray16Image read_gray16_png(const std::filesystem::path& path) {
  const Decoded d = read_png_raw(path);
  if (d.bit_depth != 16 || d.channels != 1) throw io_error("'" + path.string() + "' is not a 16-bit grayscale png");
  Gray16Image img(d.width, d.height);
  std::memcpy(img.pixels.data(), d.bytes.data(), img.pixels.size() * sizeof(std::uint16_t));
  return img;
}

Plane luminance(const RgbImage& image) {
  Plane y(image.height, image.width);
  for (int r = 0; r < image.height; ++r)
    for (int c = 0; c < image.width; ++c) {
      const auto* p = image.at(c, r);
      y(r, c) = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    }
  return y;
}

Planef channel_plane(const RgbImage& image, int ch) {
  Planef out(image.height, image.width);
  for (int r = 0; r < image.height; ++r)
    for (int c = 0; c < image.width; ++c) out(r, c) = image.at(c, r)[ch] / 255.0f;
  return out;
}

Planef decode_depth(const Gray16Image& depth) {
  Planef out(depth.height, depth.width);
  for (int r = 0; r < depth.height; ++r)
    for (int c = 0; c < depth.width; ++c) out(r, c) = depth.at(c, r) / 65535.0f;
  return out;
}

std::uint16_t encode_depth(double v) {
  return static_cast<std::uint16_t>(std::lround(65535.0 * std::clamp(v, 0.0, 1.0)));
}

}  // namespace ehoi
