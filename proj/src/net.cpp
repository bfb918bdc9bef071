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

#include "ehoi/net.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "ehoi/error.hpp"
#include "ehoi/matching.hpp"
#include "ehoi/rng.hpp"
#include "json.hpp"

namespace ehoi::net {

using json = nlohmann::ordered_json;
using Conv = nn::Conv2d<float>;
using Linear = nn::Linear<float>;
using Resample = nn::Resample<float>;

// ------------------------------------------------------------------ enums

const char* to_string(LateFusion f) {
  switch (f) {
    case LateFusion::Mean: return "mean";
    case LateFusion::Weighted: return "weighted";
    case LateFusion::AppearanceOnly: return "appearance";
    case LateFusion::MultimodalOnly: return "multimodal";
  }
  return "?";
}
const char* to_string(InferMode m) { return m == InferMode::Detector ? "detector" : "gt_proposals"; }
const char* to_string(Regime r) {
  switch (r) {
    case Regime::SynthOnly: return "synth_only";
    case Regime::RealOnly: return "real_only";
    case Regime::SynthPlusReal: return "synth_plus_real";
  }
  return "?";
}

LateFusion parse_late_fusion(const std::string& s) {
  for (auto f : {LateFusion::Mean, LateFusion::Weighted, LateFusion::AppearanceOnly, LateFusion::MultimodalOnly})
    if (s == to_string(f)) return f;
  throw validation_error("late_fusion: unknown rule '" + s + "'");
}
InferMode parse_infer_mode(const std::string& s) {
  if (s == "gt_proposals") return InferMode::GtProposals;
  if (s == "detector") return InferMode::Detector;
  throw validation_error("mode: unknown inference mode '" + s + "'");
}
Regime parse_regime(const std::string& s) {
  for (auto r : {Regime::SynthOnly, Regime::RealOnly, Regime::SynthPlusReal})
    if (s == to_string(r)) return r;
  throw validation_error("regime: unknown training regime '" + s + "'");
}

void ModelConfig::validate() const {
  const auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw validation_error("model." + msg);
  };
  need(pyramid_dim > 0 && head_hidden > 0, "pyramid_dim/head_hidden: must be positive");
  need(roi_size > 0 && keypoint_roi > 0 && keypoint_grid > 0, "roi sizes: must be positive");
  need(keypoint_grid % keypoint_roi == 0, "keypoint_grid: must be a multiple of keypoint_roi");
  need(keypoint_sigma > 0, "keypoint_sigma: must be positive");
  need(crop_size >= 16 && crop_size % 16 == 0, "crop_size: must be a positive multiple of 16");
  need(keypoint_margin >= 0 && crop_margin >= 0, "margins: must be nonnegative");
  need(num_categories > 0, "num_categories: must be positive");
  need(fusion_weight >= 0 && fusion_weight <= 1, "fusion_weight: must lie in [0, 1]");
  need(detector_threshold > 0 && detector_threshold < 1, "detector_threshold: must lie in (0, 1)");
  need(detector_max_per_class > 0, "detector_max_per_class: must be positive");
}

void TrainConfig::validate() const {
  const auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw validation_error("train." + msg);
  };
  need(epochs >= 0 && finetune_epochs >= 0, "epochs: must be nonnegative");
  need(batch_size > 0, "batch_size: must be positive");
  need(learning_rate > 0 && finetune_learning_rate > 0, "learning_rate: must be positive");
  need(momentum >= 0 && momentum < 1, "momentum: must lie in [0, 1)");
  need(weight_decay >= 0, "weight_decay: must be nonnegative");
  need(lr_gamma > 0, "lr_gamma: must be positive");
  need(grad_clip >= 0, "grad_clip: must be nonnegative");
  need(real_fraction > 0 && real_fraction <= 1, "real_fraction: must lie in (0, 1]");
  need(loss.smooth_l1_beta > 0, "loss.smooth_l1_beta: must be positive");
}

// ------------------------------------------------------------------ geometry helpers

BBox fusion_crop_box(const BBox& hand, double margin) { return hand.dilated(margin); }
BBox keypoint_box(const BBox& hand, double margin) { return hand.dilated(margin); }

Point2d heatmap_cell_to_image(const BBox& box, int grid, int row, int col) {
  return {box.x_min + (col + 0.5) * box.width() / grid, box.y_min + (row + 0.5) * box.height() / grid};
}

MatrixF keypoint_targets(const std::array<Keypoint, kNumKeypoints>& keypoints, const BBox& box, int grid,
                         double sigma) {
  MatrixF t(kNumKeypoints, grid * grid);
  for (int k = 0; k < kNumKeypoints; ++k) {
    const double u = (keypoints[k].x - box.x_min) / box.width() * grid - 0.5;
    const double v = (keypoints[k].y - box.y_min) / box.height() * grid - 0.5;
    double sum = 0;
    std::vector<double> g(static_cast<std::size_t>(grid) * grid);
    for (int r = 0; r < grid; ++r)
      for (int c = 0; c < grid; ++c) {
        const double d2 = (c - u) * (c - u) + (r - v) * (r - v);
        sum += g[r * grid + c] = std::exp(-d2 / (2 * sigma * sigma));
      }
    if (sum <= 1e-300) {  // far outside the grid: uniform
      t.row(k).setConstant(1.0f / (grid * grid));
      continue;
    }
    for (int j = 0; j < grid * grid; ++j) t(k, j) = static_cast<float>(g[j] / sum);
  }
  return t;
}

double late_fusion(const Eigen::Vector2d& appearance_logits, const Eigen::Vector2d& multimodal_logits, LateFusion rule,
                   double weight) {
  const double pa = softmax_positive(appearance_logits), pm = softmax_positive(multimodal_logits);
  switch (rule) {
    case LateFusion::Mean: return 0.5 * (pa + pm);
    case LateFusion::Weighted: return std::clamp(weight * pa + (1 - weight) * pm, std::min(pa, pm), std::max(pa, pm));
    case LateFusion::AppearanceOnly: return pa;
    case LateFusion::MultimodalOnly: return pm;
  }
  return 0.5 * (pa + pm);
}

std::vector<std::size_t> stratified_subset(const std::vector<ImageRecord>& images, double fraction,
                                           std::uint64_t seed) {
  if (!(fraction > 0 && fraction <= 1)) throw validation_error("real_fraction: must lie in (0, 1]");
  std::array<std::vector<std::size_t>, 4> strata;
  for (std::size_t i = 0; i < images.size(); ++i) {
    bool glove = false, contact = false;
    for (const auto& h : images[i].hands) {
      glove |= h.glove == GloveStatus::Glove;
      contact |= h.contact == ContactState::Contact;
    }
    strata[glove * 2 + contact].push_back(i);
  }
  std::vector<std::size_t> kept;
  for (std::size_t s = 0; s < strata.size(); ++s) {
    auto& members = strata[s];
    Rng rng(mix_seed(seed, 0x5ab5e7 + s));
    for (std::size_t i = members.size(); i > 1; --i)
      std::swap(members[i - 1], members[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
    const auto n = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(members.size()) - 1e-9));
    kept.insert(kept.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n));
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

// ------------------------------------------------------------------ samples

std::vector<Sample> load_samples(const std::vector<ImageRecord>& records, const std::filesystem::path& root) {
  std::vector<Sample> out;
  out.reserve(records.size());
  for (const auto& rec : records) {
    Sample s;
    s.record = rec;
    s.rgb = read_rgb_png(root / rec.rgb_path);
    if (s.rgb.width != rec.width || s.rgb.height != rec.height)
      throw validation_error("image " + rec.image_id + ": rgb size differs from the annotation");
    if (rec.depth_path) s.depth = decode_depth(read_gray16_png(root / *rec.depth_path));
    if (rec.mask_path) s.mask = read_gray16_png(root / *rec.mask_path);
    out.push_back(std::move(s));
  }
  return out;
}

// ------------------------------------------------------------------ model internals

struct Head {
  Linear hidden, out;
};

struct Model::Impl {
  Conv stem, c1, c2, c3, lat4, lat8, lat16;
  Linear hfv;
  Head side, state, glove, offset;
  Conv kconv, kout;
  Conv dconv1, dconv2;
  Conv fconv1, fconv2, fconv3;
  Linear fout;
  Conv detconv1, detconv2;

  Impl(const ModelConfig& c, std::uint64_t seed) {
    const int d = c.pyramid_dim;
    stem = Conv("encoder.stem", 3, 16, 3, 2, 1);
    c1 = Conv("encoder.stage1", 16, 32, 3, 2, 1);
    c2 = Conv("encoder.stage2", 32, 64, 3, 2, 1);
    c3 = Conv("encoder.stage3", 64, 128, 3, 2, 1);
    lat4 = Conv("pyramid.lateral4", 32, d, 1, 1, 0);
    lat8 = Conv("pyramid.lateral8", 64, d, 1, 1, 0);
    lat16 = Conv("pyramid.lateral16", 128, d, 1, 1, 0);
    hfv = Linear("hfv", d * c.roi_size * c.roi_size, kHfvDim);
    const auto head = [&](const std::string& name, int out) {
      return Head{Linear(name + ".hidden", kHfvDim, c.head_hidden), Linear(name + ".out", c.head_hidden, out)};
    };
    side = head("side", 2);
    state = head("state", 2);
    glove = head("glove", 2);
    offset = head("offset", 3);
    kconv = Conv("keypoints.conv", d, 32, 3, 1, 1);
    kout = Conv("keypoints.out", 32, kNumKeypoints, 1, 1, 0);
    dconv1 = Conv("depth.conv", d, 16, 1, 1, 0);
    dconv2 = Conv("depth.out", 16, 1, 1, 1, 0);
    fconv1 = Conv("fusion.conv1", kFusionChannels, 16, 4, 4, 0);
    fconv2 = Conv("fusion.conv2", 16, 32, 3, 2, 1);
    fconv3 = Conv("fusion.conv3", 32, 64, 3, 2, 1);
    fout = Linear("fusion.out", 64, 2);
    detconv1 = Conv("detector.conv", d, 32, 3, 1, 1);
    detconv2 = Conv("detector.out", 32, 1 + c.num_categories + 4, 1, 1, 0);

    Rng rng(mix_seed(seed, 0x1d17));
    for (Conv* conv : {&stem, &c1, &c2, &c3, &lat4, &lat8, &lat16, &kconv, &kout, &dconv1, &dconv2, &fconv1, &fconv2,
                       &fconv3, &detconv1, &detconv2})
      conv->init(rng);
    hfv.init(rng);
    for (Head* h : {&side, &state, &glove, &offset}) h->hidden.init(rng);
    // final classifier layers start at zero so every head begins uniform
    kout.weight.value *= 0.1f;
    dconv2.weight.value *= 0.1f;
    detconv2.weight.value *= 0.1f;
    detconv2.bias.value.topRows(1 + c.num_categories).setConstant(-2.19f);
  }

  void collect(nn::ParameterList<float>& list) {
    for (Conv* conv : {&stem, &c1, &c2, &c3, &lat4, &lat8, &lat16}) conv->collect(list);
    hfv.collect(list);
    for (Head* h : {&side, &state, &glove, &offset}) h->hidden.collect(list), h->out.collect(list);
    for (Conv* conv : {&kconv, &kout, &dconv1, &dconv2, &fconv1, &fconv2, &fconv3}) conv->collect(list);
    fout.collect(list);
    for (Conv* conv : {&detconv1, &detconv2}) conv->collect(list);
  }
};

namespace {

Tensor image_tensor(const RgbImage& img, float offset) {
  Tensor t(3, img.height, img.width);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) t.data(c, static_cast<Eigen::Index>(i)) = img.pixels[3 * i + c] / 255.0f - offset;
  return t;
}

void check_box(const BBox& b) {
  if (!(b.width() * b.height() >= 1.0)) throw validation_error("hand box is degenerate (area < 1 px)");
}

struct PyramidCache {
  Tensor s, a1, a2, a3;
  Conv::Cache cs, cc1, cc2, cc3, cl4, cl8, cl16;
  Resample up16, up8;
  FeaturePyramid pyr;
};

void pyramid_forward(const Model::Impl& m, const Tensor& x, PyramidCache& pc) {
  if (x.height % kEncoderStride || x.width % kEncoderStride)
    throw validation_error("image dimensions must be divisible by " + std::to_string(kEncoderStride));
  pc.s = nn::relu(m.stem.forward(x, pc.cs));
  pc.a1 = nn::relu(m.c1.forward(pc.s, pc.cc1));
  pc.a2 = nn::relu(m.c2.forward(pc.a1, pc.cc2));
  pc.a3 = nn::relu(m.c3.forward(pc.a2, pc.cc3));
  pc.pyr.p16 = m.lat16.forward(pc.a3, pc.cl16);
  pc.up16 = {nn::nearest_axis_weights<float>(pc.a2.height, pc.a3.height),
             nn::nearest_axis_weights<float>(pc.a2.width, pc.a3.width)};
  pc.pyr.p8 = m.lat8.forward(pc.a2, pc.cl8);
  pc.pyr.p8.data += pc.up16.forward(pc.pyr.p16).data;
  pc.up8 = {nn::nearest_axis_weights<float>(pc.a1.height, pc.a2.height),
            nn::nearest_axis_weights<float>(pc.a1.width, pc.a2.width)};
  pc.pyr.p4 = m.lat4.forward(pc.a1, pc.cl4);
  pc.pyr.p4.data += pc.up8.forward(pc.pyr.p8).data;
}

void pyramid_backward(Model::Impl& m, PyramidCache& pc, Tensor& d4, Tensor& d8, Tensor& d16) {
  pc.up8.backward_accumulate(d4, d8);
  Tensor da1 = m.lat4.backward(d4, pc.cl4, true);
  pc.up16.backward_accumulate(d8, d16);
  Tensor da2 = m.lat8.backward(d8, pc.cl8, true);
  Tensor da3 = m.lat16.backward(d16, pc.cl16, true);
  da2.data += m.c3.backward(nn::relu_backward(da3, pc.a3), pc.cc3, true).data;
  da1.data += m.c2.backward(nn::relu_backward(da2, pc.a2), pc.cc2, true).data;
  Tensor ds = m.c1.backward(nn::relu_backward(da1, pc.a1), pc.cc1, true);
  m.stem.backward(nn::relu_backward(ds, pc.s), pc.cs, false);
}

/// Resample weights placing `box` (image pixels) onto an n x n grid of a map
/// with the given stride.
Resample box_resample(const BBox& box, double stride, int map_h, int map_w, int n, int samples) {
  return nn::roi_align<float>(box.x_min / stride, box.y_min / stride, box.x_max / stride, box.y_max / stride, map_h,
                              map_w, n, samples);
}

struct HandWork {
  std::size_t image = 0;
  BBox box;
  int mask_value = 0;
  Resample roi8, roi4, kup;
  Tensor k0, k1, ku;
  Conv::Cache ck1, ck2;
  Tensor f0, f1, f2, f3;
  Conv::Cache cf1, cf2, cf3;
};

struct ImageWork {
  const RgbImage* rgb = nullptr;
  const Gray16Image* mask = nullptr;
  Tensor rgb01;  // [0, 1] planes for fusion crops
  PyramidCache pc;
  Tensor d1;
  Conv::Cache cd1, cd2;
  Resample dup;
  Planef depth;  // sigmoid of the depth logits
  Tensor det_hidden;
  Conv::Cache cdet1, cdet2;
};

struct HeadWork {
  MatrixF hidden;
};

struct BatchWork {
  std::vector<ImageWork> images;
  std::vector<HandWork> hands;
  MatrixF x, h;  // pooled RoI features (D*49 x N), HFV (1024 x N)
  std::array<HeadWork, 4> heads;
  MatrixF g;  // fusion GAP features (64 x N)
  Outputs<float> out;
  bool detector = false;
};

Tensor fusion_tensor(const ModelConfig& cfg, const Tensor& rgb01, const Gray16Image* mask, int mask_value,
                     const Planef& depth, const MatrixF& heatmaps, const BBox& hand) {
  const int n = cfg.crop_size, h = rgb01.height, w = rgb01.width;
  const BBox crop = fusion_crop_box(hand, cfg.crop_margin);
  const Resample rs = box_resample(crop, 1.0, h, w, n, 1);
  Tensor src(5, h, w);
  src.data.topRows(3) = rgb01.data;
  if (mask) {
    for (int i = 0; i < h * w; ++i) src.data(3, i) = mask->pixels[i] == mask_value ? 1.0f : 0.0f;
  } else {
    src.data.row(3).setOnes();
  }
  src.data.row(4) = Eigen::Map<const Eigen::RowVectorXf>(depth.data(), h * w);
  Tensor out(kFusionChannels, n, n);
  out.data.topRows(5) = rs.forward(src).data;

  const int k = cfg.keypoint_grid;
  const BBox kb = keypoint_box(hand, cfg.keypoint_margin);
  const Resample hs{
      nn::roi_axis_weights<float>((crop.y_min - kb.y_min) / kb.height() * k, (crop.y_max - kb.y_min) / kb.height() * k,
                                  n, k, 1),
      nn::roi_axis_weights<float>((crop.x_min - kb.x_min) / kb.width() * k, (crop.x_max - kb.x_min) / kb.width() * k,
                                  n, k, 1)};
  Tensor heat(kNumKeypoints, k, k);
  heat.data = heatmaps;
  out.data.bottomRows(kNumKeypoints) = hs.forward(heat).data;
  for (int c = 5; c < kFusionChannels; ++c) {
    const float mx = out.data.row(c).maxCoeff();
    if (mx > 0) out.data.row(c) /= mx;
  }
  return out;
}

/// Full forward pass for a batch. `hand boxes` are supplied per image.
void forward(const Model::Impl& m, const ModelConfig& cfg, BatchWork& bw) {
  const std::size_t n_img = bw.images.size();
  std::size_t n = bw.hands.size();
  const int d = cfg.pyramid_dim, r = cfg.roi_size, kg = cfg.keypoint_grid;
  auto& out = bw.out;
  out = {};

  for (auto& iw : bw.images) {
    const Tensor x = image_tensor(*iw.rgb, 0.5f);
    iw.rgb01 = x;
    iw.rgb01.data.array() += 0.5f;
    pyramid_forward(m, x, iw.pc);
    const auto& p4 = iw.pc.pyr.p4;
    iw.d1 = nn::relu(m.dconv1.forward(p4, iw.cd1));
    const Tensor d2 = m.dconv2.forward(iw.d1, iw.cd2);
    iw.dup = {nn::resize_axis_weights<float>(x.height, p4.height), nn::resize_axis_weights<float>(x.width, p4.width)};
    const Tensor logits = iw.dup.forward(d2);
    out.depth.push_back(logits.data);
    iw.depth = Planef(x.height, x.width);
    for (Eigen::Index i = 0; i < logits.data.size(); ++i) iw.depth.data()[i] = nn::sigmoid(logits.data.data()[i]);
    if (bw.detector) {
      iw.det_hidden = nn::relu(m.detconv1.forward(iw.pc.pyr.p8, iw.cdet1));
      out.detector.push_back(m.detconv2.forward(iw.det_hidden, iw.cdet2).data);
    }
  }
  (void)n_img;

  bw.x.resize(d * r * r, static_cast<Eigen::Index>(n));
  out.keypoints.resize(n);
  bw.g.resize(64, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    HandWork& hw = bw.hands[i];
    ImageWork& iw = bw.images[hw.image];
    const auto& pyr = iw.pc.pyr;
    hw.roi8 = box_resample(hw.box, 8.0, pyr.p8.height, pyr.p8.width, r, 2);
    const Tensor pooled = hw.roi8.forward(pyr.p8);
    bw.x.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const VectorF>(pooled.data.data(), pooled.data.size());

    const BBox kb = keypoint_box(hw.box, cfg.keypoint_margin);
    hw.roi4 = box_resample(kb, 4.0, pyr.p4.height, pyr.p4.width, cfg.keypoint_roi, 2);
    hw.k0 = hw.roi4.forward(pyr.p4);
    hw.k1 = nn::relu(m.kconv.forward(hw.k0, hw.ck1));
    hw.kup = {nn::resize_axis_weights<float>(kg, cfg.keypoint_roi), nn::resize_axis_weights<float>(kg, cfg.keypoint_roi)};
    hw.ku = hw.kup.forward(hw.k1);
    out.keypoints[i] = m.kout.forward(hw.ku, hw.ck2).data;

    const MatrixF heat = nn::softmax_rows<float>(out.keypoints[i]);
    hw.f0 = fusion_tensor(cfg, iw.rgb01, iw.mask, hw.mask_value, iw.depth, heat, hw.box);
    hw.f1 = nn::relu(m.fconv1.forward(hw.f0, hw.cf1));
    hw.f2 = nn::relu(m.fconv2.forward(hw.f1, hw.cf2));
    hw.f3 = nn::relu(m.fconv3.forward(hw.f2, hw.cf3));
    bw.g.col(static_cast<Eigen::Index>(i)) = nn::global_average_pool(hw.f3);
  }

  bw.h = nn::relu(m.hfv.forward(bw.x));
  const std::array<const Head*, 4> heads{&m.side, &m.state, &m.glove, &m.offset};
  std::array<MatrixF*, 4> dst{&out.side, &out.state, &out.glove, &out.offset};
  for (int k = 0; k < 4; ++k) {
    bw.heads[k].hidden = nn::relu(heads[k]->hidden.forward(bw.h));
    *dst[k] = heads[k]->out.forward(bw.heads[k].hidden);
  }
  out.fusion_state = m.fout.forward(bw.g);
}

void backward(Model::Impl& m, const ModelConfig& cfg, BatchWork& bw, const Outputs<float>& grad) {
  const std::size_t n = bw.hands.size();
  std::vector<Tensor> d4, d8, d16;
  for (auto& iw : bw.images) {
    const auto& pyr = iw.pc.pyr;
    d4.emplace_back(pyr.p4.channels, pyr.p4.height, pyr.p4.width);
    d8.emplace_back(pyr.p8.channels, pyr.p8.height, pyr.p8.width);
    d16.emplace_back(pyr.p16.channels, pyr.p16.height, pyr.p16.width);
  }

  if (n > 0) {
    // attribute heads -> HFV -> pooled RoI features
    const std::array<Head*, 4> heads{&m.side, &m.state, &m.glove, &m.offset};
    const std::array<const MatrixF*, 4> dout{&grad.side, &grad.state, &grad.glove, &grad.offset};
    MatrixF dh = MatrixF::Zero(bw.h.rows(), bw.h.cols());
    for (int k = 0; k < 4; ++k) {
      const MatrixF& hid = bw.heads[k].hidden;
      const MatrixF dhid = nn::relu_backward<float>(heads[k]->out.backward(*dout[k], hid, true), hid);
      dh += heads[k]->hidden.backward(dhid, bw.h, true);
    }
    const MatrixF dx = m.hfv.backward(nn::relu_backward<float>(dh, bw.h), bw.x, true);
    const MatrixF dg = m.fout.backward(grad.fusion_state, bw.g, true);

    for (std::size_t i = 0; i < n; ++i) {
      HandWork& hw = bw.hands[i];
      const auto col = static_cast<Eigen::Index>(i);
      Tensor dpooled(cfg.pyramid_dim, cfg.roi_size, cfg.roi_size);
      const VectorF dcol = dx.col(col);
      dpooled.data = Eigen::Map<const MatrixF>(dcol.data(), cfg.pyramid_dim, cfg.roi_size * cfg.roi_size);
      hw.roi8.backward_accumulate(dpooled, d8[hw.image]);

      Tensor dlog(kNumKeypoints, cfg.keypoint_grid, cfg.keypoint_grid);
      dlog.data = grad.keypoints[i];
      const Tensor dku = m.kout.backward(dlog, hw.ck2, true);
      Tensor dk1(hw.k1.channels, hw.k1.height, hw.k1.width);
      hw.kup.backward_accumulate(dku, dk1);
      const Tensor dk0 = m.kconv.backward(nn::relu_backward(dk1, hw.k1), hw.ck1, true);
      hw.roi4.backward_accumulate(dk0, d4[hw.image]);

      const Tensor df3 = nn::global_average_pool_backward<float>(dg.col(col), hw.f3.height, hw.f3.width);
      const Tensor df2 = m.fconv3.backward(nn::relu_backward(df3, hw.f3), hw.cf3, true);
      const Tensor df1 = m.fconv2.backward(nn::relu_backward(df2, hw.f2), hw.cf2, true);
      m.fconv1.backward(nn::relu_backward(df1, hw.f1), hw.cf1, false);
    }
  }

  for (std::size_t k = 0; k < bw.images.size(); ++k) {
    ImageWork& iw = bw.images[k];
    if (k < grad.depth.size()) {
      Tensor dl(1, iw.rgb->height, iw.rgb->width);
      dl.data = grad.depth[k];
      Tensor dd2(1, iw.d1.height, iw.d1.width);
      iw.dup.backward_accumulate(dl, dd2);
      const Tensor dd1 = m.dconv2.backward(dd2, iw.cd2, true);
      d4[k].data += m.dconv1.backward(nn::relu_backward(dd1, iw.d1), iw.cd1, true).data;
    }
    if (bw.detector) {
      Tensor ddet(static_cast<int>(grad.detector[k].rows()), iw.det_hidden.height, iw.det_hidden.width);
      ddet.data = grad.detector[k];
      const Tensor dh = m.detconv2.backward(ddet, iw.cdet2, true);
      d8[k].data += m.detconv1.backward(nn::relu_backward(dh, iw.det_hidden), iw.cdet1, true).data;
    }
    pyramid_backward(m, iw.pc, d4[k], d8[k], d16[k]);
  }
}

/// Detector heat/box targets on the stride-8 grid.
void detector_targets(const ImageRecord& rec, int n_cat, int gh, int gw, MatrixF& heat, MatrixF& box,
                      MatrixF& box_mask) {
  constexpr double stride = 8.0;
  heat = MatrixF::Zero(1 + n_cat, gh * gw);
  box = MatrixF::Zero(4, gh * gw);
  box_mask = MatrixF::Zero(1, gh * gw);
  const auto add = [&](int channel, const BBox& b) {
    const Point2d c = b.center();
    const double cx = c.x() / stride, cy = c.y() / stride;
    const int ix = std::clamp(static_cast<int>(cx), 0, gw - 1), iy = std::clamp(static_cast<int>(cy), 0, gh - 1);
    const double sigma = std::max(0.5, std::sqrt(b.width() * b.height()) / stride / 4.0);
    for (int y = 0; y < gh; ++y)
      for (int x = 0; x < gw; ++x) {
        const double g = std::exp(-((x - ix) * (x - ix) + (y - iy) * (y - iy)) / (2 * sigma * sigma));
        heat(channel, y * gw + x) = std::max(heat(channel, y * gw + x), static_cast<float>(g));
      }
    heat(channel, iy * gw + ix) = 1.0f;
    const int j = iy * gw + ix;
    box(0, j) = static_cast<float>(cx - ix);
    box(1, j) = static_cast<float>(cy - iy);
    box(2, j) = static_cast<float>(std::log(std::max(b.width(), 1.0) / stride));
    box(3, j) = static_cast<float>(std::log(std::max(b.height(), 1.0) / stride));
    box_mask(0, j) = 1.0f;
  };
  for (const auto& h : rec.hands) add(0, h.bbox);
  for (const auto& o : rec.objects) add(1 + o.category_id, o.bbox);
}

struct Peak {
  int channel;
  double score;
  BBox box;
};

std::vector<Peak> decode_detector(const MatrixF& det, int n_cat, int gh, int gw, double threshold, int max_per_class,
                                  int width, int height) {
  constexpr double stride = 8.0;
  std::vector<Peak> peaks;
  for (int c = 0; c < 1 + n_cat; ++c) {
    std::vector<Peak> cls;
    for (int y = 0; y < gh; ++y)
      for (int x = 0; x < gw; ++x) {
        const float z = det(c, y * gw + x);
        bool is_max = true;
        for (int dy = -1; dy <= 1 && is_max; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int yy = y + dy, xx = x + dx;
            if ((dy || dx) && yy >= 0 && yy < gh && xx >= 0 && xx < gw && det(c, yy * gw + xx) > z) {
              is_max = false;
              break;
            }
          }
        const double p = nn::sigmoid(static_cast<double>(z));
        if (!is_max || p < threshold) continue;
        const int j = y * gw + x;
        const double cx = (x + det(1 + n_cat, j)) * stride, cy = (y + det(2 + n_cat, j)) * stride;
        const double w = std::exp(std::clamp<double>(det(3 + n_cat, j), -4, 4)) * stride;
        const double h = std::exp(std::clamp<double>(det(4 + n_cat, j), -4, 4)) * stride;
        BBox b{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
        b = b.clamped(width, height);
        if (b.width() * b.height() < 1.0) continue;
        cls.push_back({c, p, b});
      }
    std::stable_sort(cls.begin(), cls.end(), [](const Peak& a, const Peak& b) { return a.score > b.score; });
    if (static_cast<int>(cls.size()) > max_per_class) cls.resize(max_per_class);
    peaks.insert(peaks.end(), cls.begin(), cls.end());
  }
  return peaks;
}

Eigen::Vector2d to_d2(const MatrixF& m, Eigen::Index col) { return m.col(col).cast<double>(); }

}  // namespace

// ------------------------------------------------------------------ Model

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  impl_ = std::make_shared<Impl>(config_, seed);
}

std::vector<nn::Parameter<float>*> Model::parameters() {
  nn::ParameterList<float> list;
  impl_->collect(list);
  return list;
}

std::size_t Model::num_parameters() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += static_cast<std::size_t>(p->value.size());
  return n;
}

FeaturePyramid Model::extract_features(const RgbImage& image) const {
  PyramidCache pc;
  pyramid_forward(*impl_, image_tensor(image, 0.5f), pc);
  return pc.pyr;
}

VectorF Model::pool_hand_features(const FeaturePyramid& f, const BBox& hand) const {
  check_box(hand);
  const Resample rs = box_resample(hand, 8.0, f.p8.height, f.p8.width, config_.roi_size, 2);
  const Tensor pooled = rs.forward(f.p8);
  const MatrixF x = Eigen::Map<const MatrixF>(pooled.data.data(), pooled.data.size(), 1);
  return nn::relu(impl_->hfv.forward(x)).col(0);
}

AttributePrediction Model::predict_attributes(const VectorF& hfv) const {
  if (hfv.size() != kHfvDim) throw validation_error("hand feature vector must have 1024 entries");
  const MatrixF h = hfv;
  const auto run = [&](const Head& head) { return head.out.forward(nn::relu(head.hidden.forward(h))); };
  AttributePrediction a;
  a.side_logits = to_d2(run(impl_->side), 0);
  a.state_logits = to_d2(run(impl_->state), 0);
  a.glove_logits = to_d2(run(impl_->glove), 0);
  a.offset = run(impl_->offset).col(0).cast<double>();
  return a;
}

KeypointResult Model::predict_keypoints(const FeaturePyramid& f, const BBox& hand) const {
  check_box(hand);
  const int kg = config_.keypoint_grid;
  const BBox kb = keypoint_box(hand, config_.keypoint_margin);
  const Resample roi = box_resample(kb, 4.0, f.p4.height, f.p4.width, config_.keypoint_roi, 2);
  Conv::Cache c1, c2;
  const Tensor k1 = nn::relu(impl_->kconv.forward(roi.forward(f.p4), c1));
  const Resample up{nn::resize_axis_weights<float>(kg, config_.keypoint_roi),
                    nn::resize_axis_weights<float>(kg, config_.keypoint_roi)};
  KeypointResult r;
  r.heatmaps = nn::softmax_rows<float>(impl_->kout.forward(up.forward(k1), c2).data);
  for (int k = 0; k < kNumKeypoints; ++k) {
    Eigen::Index j;
    r.heatmaps.row(k).maxCoeff(&j);
    r.coordinates[k] = heatmap_cell_to_image(kb, kg, static_cast<int>(j / kg), static_cast<int>(j % kg));
  }
  return r;
}

Planef Model::predict_depth(const FeaturePyramid& f) const {
  Conv::Cache c1, c2;
  const Tensor d1 = nn::relu(impl_->dconv1.forward(f.p4, c1));
  const Tensor d2 = impl_->dconv2.forward(d1, c2);
  const int h = f.p4.height * 4, w = f.p4.width * 4;
  const Resample up{nn::resize_axis_weights<float>(h, f.p4.height), nn::resize_axis_weights<float>(w, f.p4.width)};
  const Tensor logits = up.forward(d2);
  Planef out(h, w);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = nn::sigmoid(logits.data.data()[i]);
  return out;
}

Tensor Model::fusion_input(const RgbImage& image, const Gray16Image* mask, int mask_value, const Planef& depth,
                           const MatrixF& heatmaps, const BBox& hand) const {
  check_box(hand);
  if (depth.rows() != image.height || depth.cols() != image.width)
    throw validation_error("fusion input: depth size differs from the image");
  if (heatmaps.rows() != kNumKeypoints || heatmaps.cols() != config_.keypoint_grid * config_.keypoint_grid)
    throw validation_error("fusion input: heatmaps must be 21 x K*K");
  Tensor rgb01 = image_tensor(image, 0.0f);
  return fusion_tensor(config_, rgb01, mask, mask_value, depth, heatmaps, hand);
}

Eigen::Vector2d Model::early_fusion(const Tensor& input) const {
  if (input.channels != kFusionChannels)
    throw validation_error("early fusion expects " + std::to_string(kFusionChannels) + " channels, got " +
                           std::to_string(input.channels));
  Conv::Cache c1, c2, c3;
  const Tensor f1 = nn::relu(impl_->fconv1.forward(input, c1));
  const Tensor f2 = nn::relu(impl_->fconv2.forward(f1, c2));
  const Tensor f3 = nn::relu(impl_->fconv3.forward(f2, c3));
  const MatrixF g = nn::global_average_pool(f3);
  return to_d2(impl_->fout.forward(g), 0);
}

double attribute_confidence(const HandPrediction& hand) {
  const double ps = softmax_positive(hand.attributes.side_logits);
  const double pg = softmax_positive(hand.attributes.glove_logits);
  const double pc = hand.contact_fused;
  return std::max(ps, 1 - ps) * std::max(pg, 1 - pg) * std::max(pc, 1 - pc);
}

std::vector<Detection> Model::infer(const RgbImage& image, InferMode mode, const ImageRecord* gt,
                                    const Gray16Image* mask) const {
  if (image.width == 0 || image.height == 0) return {};
  if (mode == InferMode::GtProposals && !gt) throw validation_error("gt_proposals mode needs ground-truth boxes");
  BatchWork bw;
  bw.detector = mode == InferMode::Detector;
  bw.images.resize(1);
  bw.images[0].rgb = &image;
  bw.images[0].mask = mode == InferMode::GtProposals ? mask : nullptr;

  std::vector<Detection> objects;
  std::vector<double> hand_scores;
  if (mode == InferMode::GtProposals) {
    for (const auto& h : gt->hands) {
      check_box(h.bbox);
      HandWork hw;
      hw.box = h.bbox;
      hw.mask_value = h.id + 1;
      bw.hands.push_back(std::move(hw));
    }
    for (const auto& o : gt->objects) objects.push_back({DetectionKind::Object, o.id, o.bbox, 1.0, o.category_id, {}});
  }

  forward(*impl_, config_, bw);

  if (mode == InferMode::Detector) {
    const auto& p8 = bw.images[0].pc.pyr.p8;
    const auto peaks = decode_detector(bw.out.detector[0], config_.num_categories, p8.height, p8.width,
                                       config_.detector_threshold, config_.detector_max_per_class, image.width,
                                       image.height);
    BatchWork hands_bw;
    hands_bw.images.resize(1);
    hands_bw.images[0].rgb = &image;
    int next_object = 0;
    for (const auto& p : peaks) {
      if (p.channel == 0) {
        HandWork hw;
        hw.box = p.box;
        hands_bw.hands.push_back(std::move(hw));
        hand_scores.push_back(p.score);
      } else {
        objects.push_back({DetectionKind::Object, next_object++, p.box, p.score, p.channel - 1, {}});
      }
    }
    forward(*impl_, config_, hands_bw);
    bw = std::move(hands_bw);
  }

  std::vector<Detection> hands;
  const auto& out = bw.out;
  for (std::size_t i = 0; i < bw.hands.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    HandPrediction hp;
    hp.attributes.side_logits = to_d2(out.side, c);
    hp.attributes.state_logits = to_d2(out.state, c);
    hp.attributes.glove_logits = to_d2(out.glove, c);
    hp.attributes.offset = out.offset.col(c).cast<double>();
    hp.contact_appearance = softmax_positive(hp.attributes.state_logits);
    const Eigen::Vector2d mm = to_d2(out.fusion_state, c);
    hp.contact_multimodal = softmax_positive(mm);
    hp.contact_fused = late_fusion(hp.attributes.state_logits, mm, config_.late_fusion, config_.fusion_weight);
    const MatrixF heat = nn::softmax_rows<float>(out.keypoints[i]);
    const BBox kb = keypoint_box(bw.hands[i].box, config_.keypoint_margin);
    for (int k = 0; k < kNumKeypoints; ++k) {
      Eigen::Index j;
      heat.row(k).maxCoeff(&j);
      hp.keypoints[k] = heatmap_cell_to_image(kb, config_.keypoint_grid, static_cast<int>(j / config_.keypoint_grid),
                                              static_cast<int>(j % config_.keypoint_grid));
    }
    Detection d;
    d.kind = DetectionKind::Hand;
    d.id = mode == InferMode::GtProposals ? gt->hands[i].id : static_cast<int>(i);
    d.bbox = bw.hands[i].box;
    d.confidence = mode == InferMode::GtProposals ? attribute_confidence(hp) : hand_scores[i];
    d.hand = hp;
    hands.push_back(std::move(d));
  }
  const auto by_conf = [](const Detection& a, const Detection& b) { return a.confidence > b.confidence; };
  std::stable_sort(hands.begin(), hands.end(), by_conf);
  std::stable_sort(objects.begin(), objects.end(), by_conf);
  hands.insert(hands.end(), objects.begin(), objects.end());
  return hands;
}

// ------------------------------------------------------------------ checkpoints

namespace {
constexpr char kMagic[8] = {'E', 'H', 'O', 'I', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

json model_config_json(const ModelConfig& c) {
  return {{"pyramid_dim", c.pyramid_dim},
          {"head_hidden", c.head_hidden},
          {"roi_size", c.roi_size},
          {"keypoint_roi", c.keypoint_roi},
          {"keypoint_grid", c.keypoint_grid},
          {"keypoint_sigma", c.keypoint_sigma},
          {"keypoint_margin", c.keypoint_margin},
          {"crop_size", c.crop_size},
          {"crop_margin", c.crop_margin},
          {"num_categories", c.num_categories},
          {"late_fusion", to_string(c.late_fusion)},
          {"fusion_weight", c.fusion_weight},
          {"detector_threshold", c.detector_threshold},
          {"detector_max_per_class", c.detector_max_per_class}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  c.pyramid_dim = j.at("pyramid_dim");
  c.head_hidden = j.at("head_hidden");
  c.roi_size = j.at("roi_size");
  c.keypoint_roi = j.at("keypoint_roi");
  c.keypoint_grid = j.at("keypoint_grid");
  c.keypoint_sigma = j.at("keypoint_sigma");
  c.keypoint_margin = j.at("keypoint_margin");
  c.crop_size = j.at("crop_size");
  c.crop_margin = j.at("crop_margin");
  c.num_categories = j.at("num_categories");
  c.late_fusion = parse_late_fusion(j.at("late_fusion"));
  c.fusion_weight = j.at("fusion_weight");
  c.detector_threshold = j.at("detector_threshold");
  c.detector_max_per_class = j.at("detector_max_per_class");
  return c;
}
}  // namespace

void Model::save(const std::filesystem::path& path, const std::string& extra_json) {
  json header;
  header["format_version"] = kFormatVersion;
  header["model"] = model_config_json(config_);
  header["extra"] = json::parse(extra_json);
  header["tensors"] = json::array();
  const auto params = parameters();
  for (auto* p : params) header["tensors"].push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  const std::uint32_t version = kFormatVersion;
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (auto* p : params)
    out.write(reinterpret_cast<const char*>(p->value.data()), static_cast<std::streamsize>(p->value.size() * sizeof(float)));
  if (!out) throw io_error("failed writing checkpoint " + path.string());
}

Model Model::load(const std::filesystem::path& path, std::string* extra_json) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw validation_error("not a checkpoint: " + path.string());
  if (version != kFormatVersion) throw validation_error("unsupported checkpoint version " + std::to_string(version));
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw validation_error("corrupt checkpoint header: " + std::string(e.what()));
  }
  Model m(model_config_from_json(header.at("model")), 0);
  const auto params = m.parameters();
  const auto& tensors = header.at("tensors");
  if (tensors.size() != params.size()) throw validation_error("checkpoint tensor count does not match the model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto* p = params[i];
    if (tensors[i].at("name") != p->name || tensors[i].at("rows") != p->value.rows() ||
        tensors[i].at("cols") != p->value.cols())
      throw validation_error("checkpoint tensor " + std::to_string(i) + " does not match parameter " + p->name);
    in.read(reinterpret_cast<char*>(p->value.data()), static_cast<std::streamsize>(p->value.size() * sizeof(float)));
  }
  if (!in) throw io_error("truncated checkpoint " + path.string());
  if (extra_json) *extra_json = header.at("extra").dump();
  return m;
}

// ------------------------------------------------------------------ training

std::string EpochLog::to_json() const {
  json j;
  j["stage"] = stage;
  j["epoch"] = epoch;
  j["learning_rate"] = learning_rate;
  j["loss"] = {{"L_backbone", loss.backbone}, {"L_depth", loss.depth},     {"L_side", loss.side},
               {"L_contact", loss.contact},   {"L_offset", loss.offset},   {"L_kpt", loss.keypoints},
               {"L_glove", loss.glove},       {"L_total", loss.total}};
  const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  j["val"] = {{"glove_accuracy", opt(val_glove_accuracy)},
              {"side_accuracy", opt(val_side_accuracy)},
              {"contact_accuracy", opt(val_contact_accuracy)},
              {"depth_mae", opt(val_depth_mae)}};
  j["seconds"] = seconds;
  return j.dump();
}

Trainer::Trainer(Model& model, const TrainConfig& config, std::uint64_t seed)
    : model_(model), config_(config), seed_(seed) {
  config_.validate();
}

LossBreakdown Trainer::batch_loss(const std::vector<const Sample*>& batch, bool do_backward) {
  const ModelConfig& cfg = model_.config_;
  BatchWork bw;
  bw.detector = config_.train_detector;
  Targets<float> tgt;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const Sample& s = *batch[k];
    ImageWork iw;
    iw.rgb = &s.rgb;
    iw.mask = s.mask ? &*s.mask : nullptr;
    bw.images.push_back(std::move(iw));
    for (const auto& h : s.record.hands) {
      HandWork hw;
      hw.image = k;
      hw.box = h.bbox;
      hw.mask_value = h.id + 1;
      bw.hands.push_back(std::move(hw));
      tgt.side.push_back(h.side == HandSide::Right);
      tgt.contact.push_back(h.contact == ContactState::Contact);
      tgt.glove.push_back(h.glove == GloveStatus::Glove);
      tgt.keypoints.push_back(keypoint_targets(h.keypoints, keypoint_box(h.bbox, cfg.keypoint_margin),
                                               cfg.keypoint_grid, cfg.keypoint_sigma));
    }
  }
  const auto n = static_cast<Eigen::Index>(bw.hands.size());
  tgt.offset = MatrixF::Zero(3, n);
  {
    Eigen::Index i = 0;
    for (const Sample* s : batch)
      for (const auto& h : s->record.hands) {
        if (h.offset) tgt.offset.col(i) << static_cast<float>(h.offset->v_x), static_cast<float>(h.offset->v_y),
            static_cast<float>(h.offset->m);
        ++i;
      }
  }

  forward(*model_.impl_, cfg, bw);

  // depth is supervised only where a depth map exists
  Outputs<float> out = bw.out;
  out.depth.clear();
  std::vector<std::size_t> depth_images;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    if (!batch[k]->depth) continue;
    depth_images.push_back(k);
    out.depth.push_back(bw.out.depth[k]);
    const Planef& d = *batch[k]->depth;
    tgt.depth.push_back(Eigen::Map<const MatrixF>(d.data(), 1, d.size()));
  }
  if (bw.detector) {
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const auto& p8 = bw.images[k].pc.pyr.p8;
      MatrixF heat, box, mask;
      detector_targets(batch[k]->record, cfg.num_categories, p8.height, p8.width, heat, box, mask);
      tgt.heat.push_back(std::move(heat));
      tgt.box.push_back(std::move(box));
      tgt.box_mask.push_back(std::move(mask));
    }
  }

  Outputs<float> grad;
  const LossBreakdown loss = compute_loss(out, tgt, grad, config_.loss);
  if (do_backward) {
    std::vector<MatrixF> full_depth(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k)
      full_depth[k] = MatrixF::Zero(bw.out.depth[k].rows(), bw.out.depth[k].cols());
    for (std::size_t i = 0; i < depth_images.size(); ++i) full_depth[depth_images[i]] = grad.depth[i];
    grad.depth = std::move(full_depth);
    backward(*model_.impl_, cfg, bw, grad);
  }
  return loss;
}

std::vector<EpochLog> Trainer::fit(const std::vector<const Sample*>& train, const std::vector<const Sample*>& val,
                                   const std::string& stage, int epochs, double learning_rate,
                                   const std::vector<int>& lr_steps, const EpochCallback& callback) {
  if (train.empty() && epochs > 0) throw validation_error("training set for stage '" + stage + "' is empty");
  auto params = model_.parameters();
  for (auto* p : params) p->velocity.setZero();
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochLog> logs;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double lr = learning_rate;
    for (int s : lr_steps)
      if (epoch >= s) lr *= config_.lr_gamma;
    Rng rng(mix_seed(seed_, mix_seed(std::hash<std::string>{}(stage), static_cast<std::uint64_t>(epoch))));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);

    LossBreakdown sum;
    int n_batches = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(config_.batch_size)) {
      std::vector<const Sample*> batch;
      for (std::size_t i = b; i < std::min(order.size(), b + config_.batch_size); ++i) batch.push_back(train[order[i]]);
      for (auto* p : params) p->grad.setZero();
      sum += batch_loss(batch, true);
      ++n_batches;

      double norm2 = 0;
      for (auto* p : params) norm2 += p->grad.cast<double>().squaredNorm();
      const double norm = std::sqrt(norm2);
      const float clip = config_.grad_clip > 0 && norm > config_.grad_clip
                             ? static_cast<float>(config_.grad_clip / norm)
                             : 1.0f;
      for (auto* p : params) {
        const bool is_bias = p->value.cols() == 1 && p->name.ends_with(".bias");
        MatrixF g = p->grad * clip;
        if (!is_bias) g += static_cast<float>(config_.weight_decay) * p->value;
        p->velocity = static_cast<float>(config_.momentum) * p->velocity + g;
        p->value -= static_cast<float>(lr) * p->velocity;
      }
    }
    EpochLog log;
    log.stage = stage;
    log.epoch = epoch;
    log.learning_rate = lr;
    log.loss = n_batches ? sum.scaled(1.0 / n_batches) : sum;
    if (!val.empty()) {
      const Accuracy acc = evaluate_accuracy(model_, val);
      log.val_glove_accuracy = acc.glove;
      log.val_side_accuracy = acc.side;
      log.val_contact_accuracy = acc.contact_fused;
      log.val_depth_mae = acc.depth_mae;
    }
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (callback) callback(log);
    logs.push_back(log);
  }
  return logs;
}

namespace {
std::vector<const Sample*> pointers(const std::vector<Sample>* v, const std::vector<std::size_t>* subset = nullptr) {
  std::vector<const Sample*> out;
  if (!v) return out;
  if (subset) {
    for (std::size_t i : *subset) out.push_back(&(*v)[i]);
  } else {
    for (const auto& s : *v) out.push_back(&s);
  }
  return out;
}
}  // namespace

TrainResult train(const std::vector<Sample>* synth, const std::vector<Sample>* real, Regime regime,
                  const ModelConfig& model_config, const TrainConfig& train_config, std::uint64_t seed,
                  const std::vector<Sample>* synth_val, const std::vector<Sample>* real_val,
                  const EpochCallback& callback) {
  train_config.validate();
  const bool need_synth = regime != Regime::RealOnly, need_real = regime != Regime::SynthOnly;
  if (need_synth && (!synth || synth->empty()))
    throw validation_error(std::string("regime ") + to_string(regime) + " needs a synthetic train split");
  if (need_real && (!real || real->empty()))
    throw validation_error(std::string("regime ") + to_string(regime) + " needs a real train split");

  TrainResult result{Model(model_config, seed), {}, {}};
  Trainer trainer(result.model, train_config, seed);
  if (need_synth) {
    auto logs = trainer.fit(pointers(synth), pointers(synth_val), "synth", train_config.epochs,
                            train_config.learning_rate, train_config.lr_steps, callback);
    result.log.insert(result.log.end(), logs.begin(), logs.end());
  }
  if (need_real) {
    std::vector<ImageRecord> records;
    for (const auto& s : *real) records.push_back(s.record);
    result.real_subset = stratified_subset(records, train_config.real_fraction, seed);
    const bool finetune = regime == Regime::SynthPlusReal;
    auto logs = trainer.fit(pointers(real, &result.real_subset), pointers(real_val), "real",
                            finetune ? train_config.finetune_epochs : train_config.epochs,
                            finetune ? train_config.finetune_learning_rate : train_config.learning_rate,
                            finetune ? train_config.finetune_lr_steps : train_config.lr_steps, callback);
    result.log.insert(result.log.end(), logs.begin(), logs.end());
  }
  if (result.model.config().late_fusion == LateFusion::Weighted) {
    const auto* fit_set = need_real ? real : synth;
    std::vector<Sample> subset;
    if (need_real) {
      for (std::size_t i : result.real_subset) subset.push_back((*real)[i]);
      fit_set = &subset;
    }
    result.model.mutable_config().fusion_weight = fit_fusion_weight(result.model, *fit_set);
  }
  return result;
}

double fit_fusion_weight(const Model& model, const std::vector<Sample>& samples) {
  std::vector<std::pair<double, double>> probs;  // (appearance, multimodal)
  std::vector<int> labels;
  for (const auto& s : samples) {
    const auto dets = model.infer(s.rgb, InferMode::GtProposals, &s.record, s.mask ? &*s.mask : nullptr);
    for (const auto& d : dets) {
      if (d.kind != DetectionKind::Hand) continue;
      probs.emplace_back(d.hand->contact_appearance, d.hand->contact_multimodal);
      for (const auto& h : s.record.hands)
        if (h.id == d.id) labels.push_back(h.contact == ContactState::Contact);
    }
  }
  double best_w = 0.5;
  std::size_t best = 0;
  for (int step = 0; step <= 20; ++step) {
    const double w = step * 0.05;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < probs.size(); ++i)
      correct += ((w * probs[i].first + (1 - w) * probs[i].second) >= 0.5) == (labels[i] == 1);
    if (correct > best || (correct == best && std::abs(w - 0.5) < std::abs(best_w - 0.5))) {
      best = correct;
      best_w = w;
    }
  }
  return best_w;
}

Accuracy evaluate_accuracy(const Model& model, const std::vector<const Sample*>& samples) {
  Accuracy acc;
  std::size_t side = 0, glove = 0, fused = 0, app = 0, mm = 0, n_depth = 0;
  double depth_err = 0;
  for (const Sample* s : samples) {
    const auto dets = model.infer(s->rgb, InferMode::GtProposals, &s->record, s->mask ? &*s->mask : nullptr);
    for (const auto& d : dets) {
      if (d.kind != DetectionKind::Hand) continue;
      const HandAnnotation* gt = nullptr;
      for (const auto& h : s->record.hands)
        if (h.id == d.id) gt = &h;
      const HandPrediction& hp = *d.hand;
      const bool contact = gt->contact == ContactState::Contact;
      side += hp.attributes.side() == gt->side;
      glove += hp.attributes.glove() == gt->glove;
      fused += (hp.contact_fused >= 0.5) == contact;
      app += (hp.contact_appearance >= 0.5) == contact;
      mm += (hp.contact_multimodal >= 0.5) == contact;
      ++acc.n_hands;
    }
    if (s->depth) {
      const Planef pred = model.predict_depth(model.extract_features(s->rgb));
      depth_err += (pred - *s->depth).cwiseAbs().mean();
      ++n_depth;
    }
  }
  const double n = std::max<std::size_t>(1, acc.n_hands);
  acc.side = side / n, acc.glove = glove / n, acc.contact_fused = fused / n;
  acc.contact_appearance = app / n, acc.contact_multimodal = mm / n;
  acc.depth_mae = n_depth ? depth_err / n_depth : 0;
  return acc;
}

metrics::ImagePrediction predict_image(const Model& model, const Sample& sample, InferMode mode) {
  const auto dets = model.infer(sample.rgb, mode, &sample.record, sample.mask ? &*sample.mask : nullptr);
  std::vector<Detection> hands, objects;
  for (const auto& d : dets) (d.kind == DetectionKind::Hand ? hands : objects).push_back(d);
  const auto quads = match(hands, objects, sample.rgb.width, sample.rgb.height);
  metrics::ImagePrediction ip;
  ip.image_id = sample.record.image_id;
  for (const auto& q : quads) {
    const Detection& h = hands[q.hand_index];
    metrics::PredictedHand ph;
    ph.bbox = h.bbox;
    ph.confidence = h.confidence;
    ph.side = h.hand->attributes.side();
    ph.contact = q.contact;
    ph.glove = q.glove;
    if (q.active_object) {
      ph.object_bbox = objects[*q.active_object].bbox;
      ph.object_category = objects[*q.active_object].category_id;
    }
    ip.hands.push_back(ph);
  }
  return ip;
}

}  // namespace ehoi::net
