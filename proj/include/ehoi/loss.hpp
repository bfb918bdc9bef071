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

// Training objective: the sum of seven component losses, each returning its
// gradient with respect to the raw network outputs.

#include <algorithm>
#include <cmath>
#include <vector>

#include "ehoi/error.hpp"
#include "ehoi/nn.hpp"

namespace ehoi::net {

using nn::Matrix;

/// Raw network outputs for one batch. Hand-level matrices hold one column per
/// hand; dense maps hold one entry per image.
template <typename S>
struct Outputs {
  Matrix<S> side, state, fusion_state, glove;  // 2 x N logits
  Matrix<S> offset;                            // 3 x N
  std::vector<Matrix<S>> keypoints;            // per hand: 21 x K*K logits
  std::vector<Matrix<S>> depth;                // per image: 1 x H*W logits
  std::vector<Matrix<S>> detector;             // per image: (1 + n_cat + 4) x h*w

  /// Zero tensor with the same shapes, used for gradients.
  Outputs zeros_like() const {
    Outputs g;
    g.side = Matrix<S>::Zero(side.rows(), side.cols());
    g.state = Matrix<S>::Zero(state.rows(), state.cols());
    g.fusion_state = Matrix<S>::Zero(fusion_state.rows(), fusion_state.cols());
    g.glove = Matrix<S>::Zero(glove.rows(), glove.cols());
    g.offset = Matrix<S>::Zero(offset.rows(), offset.cols());
    for (const auto& m : keypoints) g.keypoints.push_back(Matrix<S>::Zero(m.rows(), m.cols()));
    for (const auto& m : depth) g.depth.push_back(Matrix<S>::Zero(m.rows(), m.cols()));
    for (const auto& m : detector) g.detector.push_back(Matrix<S>::Zero(m.rows(), m.cols()));
    return g;
  }
};

template <typename S>
struct Targets {
  std::vector<int> side, contact, glove;  // class indices per hand
  Matrix<S> offset;                       // 3 x N; read only for contact hands
  std::vector<Matrix<S>> keypoints;       // per hand: 21 x K*K, rows sum to 1
  std::vector<Matrix<S>> depth;           // per image: 1 x H*W in [0, 1]
  std::vector<Matrix<S>> heat;            // per image: (1 + n_cat) x h*w, peak 1 at centers
  std::vector<Matrix<S>> box;             // per image: 4 x h*w regression targets
  std::vector<Matrix<S>> box_mask;        // per image: 1 x h*w, 1 at centers
};

struct LossOptions {
  double smooth_l1_beta = 0.1;
  double focal_alpha = 2.0;
  double focal_beta = 4.0;
};

struct LossBreakdown {
  double backbone = 0, depth = 0, side = 0, contact = 0, offset = 0, keypoints = 0, glove = 0, total = 0;

  void finalize() { total = backbone + depth + side + contact + offset + keypoints + glove; }
  double sum_components() const { return backbone + depth + side + contact + offset + keypoints + glove; }
  LossBreakdown& operator+=(const LossBreakdown& o) {
    backbone += o.backbone, depth += o.depth, side += o.side, contact += o.contact;
    offset += o.offset, keypoints += o.keypoints, glove += o.glove;
    finalize();
    return *this;
  }
  LossBreakdown scaled(double f) const {
    LossBreakdown r = *this;
    r.backbone *= f, r.depth *= f, r.side *= f, r.contact *= f, r.offset *= f, r.keypoints *= f, r.glove *= f;
    r.finalize();
    return r;
  }
};

namespace detail {

/// Mean cross-entropy over columns of a 2 x N logit matrix; adds the gradient.
template <typename S>
double cross_entropy(const Matrix<S>& logits, const std::vector<int>& labels, Matrix<S>& grad) {
  const Eigen::Index n = logits.cols();
  if (n == 0) return 0;
  const Matrix<S> p = nn::softmax_cols<S>(logits);
  double loss = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[i];
    const S m = logits.col(i).maxCoeff();
    const S lse = m + std::log((logits.col(i).array() - m).exp().sum());
    loss += static_cast<double>(lse - logits(y, i));
    grad.col(i) += p.col(i) / static_cast<S>(n);
    grad(y, i) -= S(1) / static_cast<S>(n);
  }
  return loss / n;
}

template <typename S>
S xlogx(S x) {
  return x > S(0) ? x * std::log(x) : S(0);
}

}  // namespace detail

/// Evaluates every component and writes dL_total/d(outputs) into `grad`
/// (which is resized to match `out`).
template <typename S>
LossBreakdown compute_loss(const Outputs<S>& out, const Targets<S>& tgt, Outputs<S>& grad,
                           const LossOptions& opt = {}) {
  const Eigen::Index n = out.side.cols();
  const auto check = [](bool ok, const char* what) {
    if (!ok) throw validation_error(std::string("loss shape mismatch: ") + what);
  };
  check(out.state.cols() == n && out.fusion_state.cols() == n && out.glove.cols() == n && out.offset.cols() == n,
        "hand columns");
  check(static_cast<Eigen::Index>(tgt.side.size()) == n && static_cast<Eigen::Index>(tgt.contact.size()) == n &&
            static_cast<Eigen::Index>(tgt.glove.size()) == n,
        "hand labels");
  check(out.keypoints.size() == tgt.keypoints.size() && static_cast<Eigen::Index>(out.keypoints.size()) == n,
        "keypoint maps");
  check(out.depth.size() == tgt.depth.size(), "depth maps");
  check(out.detector.size() == tgt.heat.size() && tgt.heat.size() == tgt.box.size() &&
            tgt.box.size() == tgt.box_mask.size(),
        "detector maps");
  if (n > 0) check(tgt.offset.cols() == n && out.offset.rows() == 3, "offset");

  grad = out.zeros_like();
  LossBreakdown b;

  // attribute heads
  b.side = detail::cross_entropy(out.side, tgt.side, grad.side);
  b.glove = detail::cross_entropy(out.glove, tgt.glove, grad.glove);
  b.contact = detail::cross_entropy(out.state, tgt.contact, grad.state) +
              detail::cross_entropy(out.fusion_state, tgt.contact, grad.fusion_state);

  // offset: smooth-L1 on contact hands only
  const S beta = static_cast<S>(opt.smooth_l1_beta);
  int n_contact = 0;
  for (Eigen::Index i = 0; i < n; ++i) n_contact += tgt.contact[i] == 1;
  for (Eigen::Index i = 0; i < n && n_contact > 0; ++i) {
    if (tgt.contact[i] != 1) continue;
    for (int k = 0; k < 3; ++k) {
      const S d = out.offset(k, i) - tgt.offset(k, i);
      const S a = std::abs(d);
      const bool quad = a < beta;
      b.offset += static_cast<double>(quad ? S(0.5) * d * d / beta : a - S(0.5) * beta) / n_contact;
      grad.offset(k, i) = (quad ? d / beta : (d > 0 ? S(1) : S(-1))) / static_cast<S>(n_contact);
    }
  }

  // keypoints: per-cell binary cross-entropy between the spatial-softmax map
  // and the target map, minus the target's own entropy so a perfect map costs 0
  for (Eigen::Index i = 0; i < n; ++i) {
    const Matrix<S>& z = out.keypoints[i];
    const Matrix<S>& t = tgt.keypoints[i];
    check(z.rows() == t.rows() && z.cols() == t.cols(), "keypoint map size");
    const Matrix<S> p = nn::softmax_rows<S>(z);
    const S scale = S(1) / static_cast<S>(n * z.rows());
    for (Eigen::Index c = 0; c < z.rows(); ++c) {
      double lc = 0;
      S gp_dot_p = 0;
      Eigen::Matrix<S, 1, Eigen::Dynamic> gp(z.cols());
      for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const S pj = std::clamp(p(c, j), S(1e-30), S(1) - S(1e-7));
        const S tj = t(c, j);
        lc += static_cast<double>(detail::xlogx(tj) + detail::xlogx(S(1) - tj) - tj * std::log(pj) -
                                  (S(1) - tj) * std::log1p(-pj));
        gp[j] = -tj / pj + (S(1) - tj) / (S(1) - pj);
        gp_dot_p += gp[j] * p(c, j);
      }
      b.keypoints += lc * static_cast<double>(scale);
      for (Eigen::Index j = 0; j < z.cols(); ++j) grad.keypoints[i](c, j) = scale * p(c, j) * (gp[j] - gp_dot_p);
    }
  }

  // depth: mean absolute error of sigmoid(logits)
  const auto n_img = static_cast<S>(out.depth.size());
  for (std::size_t k = 0; k < out.depth.size(); ++k) {
    const Matrix<S>& z = out.depth[k];
    check(z.size() == tgt.depth[k].size(), "depth size");
    const S scale = S(1) / (n_img * static_cast<S>(z.size()));
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      const S s = nn::sigmoid(z.data()[j]);
      const S d = s - tgt.depth[k].data()[j];
      b.depth += static_cast<double>(std::abs(d) * scale);
      grad.depth[k].data()[j] = scale * (d > 0 ? S(1) : (d < 0 ? S(-1) : S(0))) * s * (S(1) - s);
    }
  }

  // detector: penalty-reduced focal loss on center heatmaps + L1 box terms
  const auto n_det = static_cast<S>(out.detector.size());
  const S fa = static_cast<S>(opt.focal_alpha), fb = static_cast<S>(opt.focal_beta);
  for (std::size_t k = 0; k < out.detector.size(); ++k) {
    const Matrix<S>& z = out.detector[k];
    const Matrix<S>& y = tgt.heat[k];
    const Eigen::Index nh = y.rows();
    check(z.rows() == nh + 4 && z.cols() == y.cols(), "detector size");
    S n_pos = 0;
    for (Eigen::Index j = 0; j < y.size(); ++j) n_pos += y.data()[j] == S(1);
    const S scale = S(1) / (n_det * std::max(S(1), n_pos));
    for (Eigen::Index c = 0; c < nh; ++c)
      for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const S zz = z(c, j), p = nn::sigmoid(zz), yy = y(c, j);
        const S lp = nn::log_sigmoid(zz), lq = nn::log_sigmoid(-zz);
        S l, g;
        if (yy == S(1)) {
          const S q = S(1) - p;
          l = -std::pow(q, fa) * lp;
          // d/dz of -(1-p)^a log p, with dp/dz = p(1-p)
          g = fa * std::pow(q, fa - 1) * p * q * lp - std::pow(q, fa) * q;
        } else {
          const S w = std::pow(S(1) - yy, fb);
          l = -w * std::pow(p, fa) * lq;
          g = -w * (fa * std::pow(p, fa - 1) * p * (S(1) - p) * lq - std::pow(p, fa) * p);
        }
        b.backbone += static_cast<double>(l * scale);
        grad.detector[k](c, j) = g * scale;
      }
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      if (tgt.box_mask[k](0, j) == S(0)) continue;
      for (int r = 0; r < 4; ++r) {
        const S d = z(nh + r, j) - tgt.box[k](r, j);
        b.backbone += static_cast<double>(std::abs(d) * scale);
        grad.detector[k](nh + r, j) = scale * (d > 0 ? S(1) : (d < 0 ? S(-1) : S(0)));
      }
    }
  }

  b.finalize();
  return b;
}

}  // namespace ehoi::net
