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

#include "ehoi/augval.hpp"

#include <algorithm>
#include <cmath>

#include "ehoi/error.hpp"
#include "ehoi/rng.hpp"
#include "json.hpp"

namespace ehoi::augval {

namespace {

Eigen::VectorXd gaussian_1d(const SsimParams& p) {
  Eigen::VectorXd g(p.window);
  const int half = p.window / 2;
  for (int i = 0; i < p.window; ++i) g[i] = std::exp(-0.5 * (i - half) * (i - half) / (p.sigma * p.sigma));
  return g / g.sum();
}

/// "Valid" separable filtering: out(r, c) = sum_ij g[i] g[j] x(r + i, c + j).
Plane filter_valid(const Plane& x, const Eigen::VectorXd& g) {
  const Eigen::Index n = g.size();
  const Eigen::Index rows = x.rows() - n + 1, cols = x.cols() - n + 1;
  Plane horiz = Plane::Zero(x.rows(), cols);
  for (Eigen::Index k = 0; k < n; ++k) horiz += g[k] * x.middleCols(k, cols);
  Plane out = Plane::Zero(rows, cols);
  for (Eigen::Index k = 0; k < n; ++k) out += g[k] * horiz.middleRows(k, rows);
  return out;
}

/// Window (r, c) is usable when none of its pixels is masked.
Mask usable_windows(const Mask* ignore, Eigen::Index rows, Eigen::Index cols, int n) {
  Mask usable = Mask::Constant(rows, cols, true);
  if (!ignore) return usable;
  // Summed-area table of masked pixels.
  Eigen::MatrixXi sat = Eigen::MatrixXi::Zero(ignore->rows() + 1, ignore->cols() + 1);
  for (Eigen::Index r = 0; r < ignore->rows(); ++r)
    for (Eigen::Index c = 0; c < ignore->cols(); ++c)
      sat(r + 1, c + 1) = sat(r, c + 1) + sat(r + 1, c) - sat(r, c) + ((*ignore)(r, c) ? 1 : 0);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      usable(r, c) = sat(r + n, c + n) - sat(r, c + n) - sat(r + n, c) + sat(r, c) == 0;
  return usable;
}

void check_inputs(const Plane& a, const Plane& b, const SsimParams& params, const Mask* ignore) {
  params.validate();
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw validation_error("ssim: dimension mismatch");
  if (ignore && (ignore->rows() != a.rows() || ignore->cols() != a.cols()))
    throw validation_error("ssim: mask dimension mismatch");
  if (a.rows() < params.window || a.cols() < params.window)
    throw validation_error("ssim: image smaller than the window");
}

double local_ssim(double mu_a, double mu_b, double var_a, double var_b, double cov, double c1, double c2) {
  return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
}

}  // namespace

void SsimParams::validate() const {
  if (!(k1 > 0 && k2 > 0)) throw validation_error("ssim params: K1 and K2 must be positive");
  if (window < 3 || window % 2 == 0) throw validation_error("ssim params: window must be odd and >= 3");
  if (!(sigma > 0) || !(dynamic_range > 0)) throw validation_error("ssim params: sigma and L must be positive");
}

Plane gaussian_window(const SsimParams& params) {
  const Eigen::VectorXd g = gaussian_1d(params);
  Plane w = g * g.transpose();
  return w / w.sum();
}

double ssim(const Plane& a, const Plane& b, const SsimParams& params, const Mask* ignore) {
  check_inputs(a, b, params, ignore);
  const Eigen::VectorXd g = gaussian_1d(params);
  const Plane mu_a = filter_valid(a, g), mu_b = filter_valid(b, g);
  const Plane aa = filter_valid(a.cwiseProduct(a), g);
  const Plane bb = filter_valid(b.cwiseProduct(b), g);
  const Plane ab = filter_valid(a.cwiseProduct(b), g);
  const Mask usable = usable_windows(ignore, mu_a.rows(), mu_a.cols(), params.window);
  const double c1 = params.c1(), c2 = params.c2();
  double sum = 0;
  std::size_t n = 0;
  for (Eigen::Index r = 0; r < mu_a.rows(); ++r)
    for (Eigen::Index c = 0; c < mu_a.cols(); ++c) {
      if (!usable(r, c)) continue;
      const double ma = mu_a(r, c), mb = mu_b(r, c);
      sum += local_ssim(ma, mb, aa(r, c) - ma * ma, bb(r, c) - mb * mb, ab(r, c) - ma * mb, c1, c2);
      ++n;
    }
  if (n == 0) throw validation_error("ssim: all windows masked");
  return std::clamp(sum / static_cast<double>(n), -1.0, 1.0);
}

double ssim_reference(const Plane& a, const Plane& b, const SsimParams& params, const Mask* ignore) {
  check_inputs(a, b, params, ignore);
  const Plane w = gaussian_window(params);
  const int n = params.window;
  const double c1 = params.c1(), c2 = params.c2();
  double sum = 0;
  std::size_t count = 0;
  for (Eigen::Index r = 0; r + n <= a.rows(); ++r)
    for (Eigen::Index c = 0; c + n <= a.cols(); ++c) {
      bool skip = false;
      for (int i = 0; i < n && !skip; ++i)
        for (int j = 0; j < n && !skip; ++j) skip = ignore && (*ignore)(r + i, c + j);
      if (skip) continue;
      double ma = 0, mb = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          ma += w(i, j) * a(r + i, c + j);
          mb += w(i, j) * b(r + i, c + j);
        }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double da = a(r + i, c + j) - ma, db = b(r + i, c + j) - mb;
          va += w(i, j) * da * da;
          vb += w(i, j) * db * db;
          cov += w(i, j) * da * db;
        }
      sum += local_ssim(ma, mb, va, vb, cov, c1, c2);
      ++count;
    }
  if (count == 0) throw validation_error("ssim: all windows masked");
  return std::clamp(sum / static_cast<double>(count), -1.0, 1.0);
}

Mask hand_region_mask(int width, int height, const std::vector<BBox>& hands, double margin) {
  Mask mask = Mask::Constant(height, width, false);
  for (const auto& h : hands) {
    const BBox d = h.dilated(margin);
    const int x0 = std::max(0, static_cast<int>(std::floor(d.x_min - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(d.y_min - 0.5)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(d.x_max)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(d.y_max)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (d.contains(Point2d(x + 0.5, y + 0.5))) mask(y, x) = true;
  }
  return mask;
}

MaskedImage mask_hand_regions(const RgbImage& image, const std::vector<BBox>& hands, double margin) {
  MaskedImage out{image, hand_region_mask(image.width, image.height, hands, margin), 0};
  const auto masked = out.mask.count();
  out.masked_fraction = static_cast<double>(masked) / static_cast<double>(out.mask.size());
  if (out.mask.size() > 0 && masked == out.mask.size()) throw validation_error("degenerate mask: every pixel is masked");
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      if (out.mask(y, x)) std::fill_n(out.image.at(x, y), 3, std::uint8_t{128});
  return out;
}

PairVerdict validate_pair(const RgbImage& original, const RgbImage& augmented, const std::vector<BBox>& hands,
                          double threshold, const SsimParams& params, double margin) {
  if (original.width != augmented.width || original.height != augmented.height)
    throw validation_error("validate_pair: dimension mismatch");
  const MaskedImage a = mask_hand_regions(original, hands, margin);
  const MaskedImage b = mask_hand_regions(augmented, hands, margin);
  PairVerdict v;
  v.masked_fraction = a.masked_fraction;
  v.ssim_score = ssim(luminance(a.image), luminance(b.image), params, &a.mask);
  v.kept = !(v.ssim_score < threshold);
  return v;
}

std::vector<std::string> ValidationReport::kept_ids() const {
  std::vector<std::string> ids;
  for (const auto& p : pairs)
    if (p.kept) ids.push_back(p.image_id);
  return ids;
}

std::string ValidationReport::to_json() const {
  nlohmann::ordered_json j;
  j["pairs"] = nlohmann::ordered_json::array();
  for (const auto& p : pairs)
    j["pairs"].push_back({{"image_id", p.image_id}, {"ssim", p.ssim_score}, {"kept", p.kept}, {"masked_fraction", p.masked_fraction}});
  j["keep_rate"] = keep_rate ? nlohmann::ordered_json(*keep_rate) : nlohmann::ordered_json(nullptr);
  return j.dump(2) + "\n";
}

ValidationReport filter_dataset(const std::vector<PairInput>& pairs, double threshold, const SsimParams& params,
                                double margin) {
  ValidationReport report;
  for (const auto& p : pairs) {
    PairVerdict v = validate_pair(p.original, p.augmented, p.hands, threshold, params, margin);
    v.image_id = p.image_id;
    report.pairs.push_back(std::move(v));
  }
  std::stable_sort(report.pairs.begin(), report.pairs.end(),
                   [](const PairVerdict& a, const PairVerdict& b) { return a.image_id < b.image_id; });
  if (!report.pairs.empty()) {
    const auto kept = std::count_if(report.pairs.begin(), report.pairs.end(), [](const PairVerdict& v) { return v.kept; });
    report.keep_rate = static_cast<double>(kept) / static_cast<double>(report.pairs.size());
  }
  return report;
}

RgbImage mock_augment(const RgbImage& original, const std::vector<BBox>& hands, bool corrupt_background, double margin) {
  RgbImage out = original;
  constexpr std::array<double, 3> kGlove{235, 200, 35};
  for (const auto& h : hands)
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        if (!h.contains(Point2d(x + 0.5, y + 0.5))) continue;
        auto* p = out.at(x, y);
        for (int c = 0; c < 3; ++c) p[c] = static_cast<std::uint8_t>(std::lround(0.25 * p[c] + 0.75 * kGlove[c]));
      }
  if (corrupt_background) {
    const Mask keep_out = hand_region_mask(out.width, out.height, hands, margin);
    Rng rng(mix_seed(static_cast<std::uint64_t>(out.width), static_cast<std::uint64_t>(out.height)));
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x) {
        const double delta = rng.uniform(-90, 90);
        if (keep_out(y, x)) continue;
        auto* p = out.at(x, y);
        for (int c = 0; c < 3; ++c) p[c] = static_cast<std::uint8_t>(std::clamp(std::lround(p[c] + delta), 0L, 255L));
      }
  }
  return out;
}

}  // namespace ehoi::augval
