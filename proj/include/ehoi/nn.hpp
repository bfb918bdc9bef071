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

// Minimal layer library for the interaction network. Feature maps are stored
// channel-major as a (channels x height*width) row-major matrix so that
// convolutions reduce to one GEMM over an im2col buffer.

#include <Eigen/Core>
#include <algorithm>
#include <cassert>
#include <cmath>
#include <string>
#include <vector>

#include "ehoi/rng.hpp"

namespace ehoi::nn {

template <typename S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vector = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
struct Tensor3 {
  int channels = 0, height = 0, width = 0;
  Matrix<S> data;  // channels x (height * width)

  Tensor3() = default;
  Tensor3(int c, int h, int w) : channels(c), height(h), width(w), data(Matrix<S>::Zero(c, h * w)) {}

  S& at(int c, int y, int x) { return data(c, y * width + x); }
  S at(int c, int y, int x) const { return data(c, y * width + x); }
  /// View of channel c as a height x width matrix.
  Eigen::Map<Matrix<S>> channel(int c) { return {data.row(c).data(), height, width}; }
  Eigen::Map<const Matrix<S>> channel(int c) const { return {data.row(c).data(), height, width}; }
};

template <typename S>
struct Parameter {
  std::string name;
  Matrix<S> value, grad, velocity;

  void init(std::string n, Eigen::Index rows, Eigen::Index cols) {
    name = std::move(n);
    value = Matrix<S>::Zero(rows, cols);
    grad = Matrix<S>::Zero(rows, cols);
    velocity = Matrix<S>::Zero(rows, cols);
  }
  /// He-normal initialization for ReLU fan-in.
  void he_init(Rng& rng, int fan_in) {
    const double std = std::sqrt(2.0 / fan_in);
    for (Eigen::Index i = 0; i < value.size(); ++i) value.data()[i] = static_cast<S>(std * rng.normal());
  }
};

template <typename S>
using ParameterList = std::vector<Parameter<S>*>;

// ---------------------------------------------------------------- convolution

template <typename S>
class Conv2d {
 public:
  struct Cache {
    Matrix<S> cols;
    int in_h = 0, in_w = 0;
  };

  Conv2d() = default;
  Conv2d(const std::string& name, int in, int out, int kernel, int stride, int pad)
      : in_(in), out_(out), k_(kernel), stride_(stride), pad_(pad) {
    weight.init(name + ".weight", out, in * kernel * kernel);
    bias.init(name + ".bias", out, 1);
  }

  void init(Rng& rng) { weight.he_init(rng, in_ * k_ * k_); }
  void collect(ParameterList<S>& list) { list.push_back(&weight), list.push_back(&bias); }

  int out_size(int n) const { return (n + 2 * pad_ - k_) / stride_ + 1; }
  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

  Tensor3<S> forward(const Tensor3<S>& x, Cache& cache) const {
    assert(x.channels == in_);
    const int ho = out_size(x.height), wo = out_size(x.width);
    cache.in_h = x.height, cache.in_w = x.width;
    Tensor3<S> y(out_, ho, wo);
    if (pointwise()) {
      cache.cols = x.data;
    } else {
      im2col(x, ho, wo, cache.cols);
    }
    y.data.noalias() = weight.value * cache.cols;
    y.data.colwise() += bias.value.col(0);
    return y;
  }

  /// Accumulates parameter gradients; returns dL/dx when need_input_grad.
  Tensor3<S> backward(const Tensor3<S>& dy, const Cache& cache, bool need_input_grad) {
    weight.grad.noalias() += dy.data * cache.cols.transpose();
    bias.grad.col(0) += dy.data.rowwise().sum();
    Tensor3<S> dx;
    if (!need_input_grad) return dx;
    dx = Tensor3<S>(in_, cache.in_h, cache.in_w);
    if (pointwise()) {
      dx.data.noalias() = weight.value.transpose() * dy.data;
    } else {
      const Matrix<S> dcols = weight.value.transpose() * dy.data;
      col2im(dcols, dy.height, dy.width, dx);
    }
    return dx;
  }

  Parameter<S> weight, bias;

 private:
  bool pointwise() const { return k_ == 1 && stride_ == 1 && pad_ == 0; }

  void im2col(const Tensor3<S>& x, int ho, int wo, Matrix<S>& cols) const {
    cols.setZero(static_cast<Eigen::Index>(in_) * k_ * k_, static_cast<Eigen::Index>(ho) * wo);
    for (int c = 0; c < in_; ++c)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          S* row = cols.row((c * k_ + ky) * k_ + kx).data();
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= x.height) continue;
            const S* src = x.data.row(c).data() + iy * x.width;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < x.width) row[oy * wo + ox] = src[ix];
            }
          }
        }
  }

  void col2im(const Matrix<S>& cols, int ho, int wo, Tensor3<S>& dx) const {
    for (int c = 0; c < in_; ++c)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          const S* row = cols.row((c * k_ + ky) * k_ + kx).data();
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= dx.height) continue;
            S* dst = dx.data.row(c).data() + iy * dx.width;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < dx.width) dst[ix] += row[oy * wo + ox];
            }
          }
        }
  }

  int in_ = 0, out_ = 0, k_ = 1, stride_ = 1, pad_ = 0;
};

// ---------------------------------------------------------------- dense

/// Fully connected layer over column batches: Y = W X + b.
template <typename S>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out) : in_(in), out_(out) {
    weight.init(name + ".weight", out, in);
    bias.init(name + ".bias", out, 1);
  }

  void init(Rng& rng) { weight.he_init(rng, in_); }
  void collect(ParameterList<S>& list) { list.push_back(&weight), list.push_back(&bias); }
  int in_features() const { return in_; }
  int out_features() const { return out_; }

  Matrix<S> forward(const Matrix<S>& x) const {
    Matrix<S> y = weight.value * x;
    y.colwise() += bias.value.col(0);
    return y;
  }

  Matrix<S> backward(const Matrix<S>& dy, const Matrix<S>& x, bool need_input_grad) {
    weight.grad.noalias() += dy * x.transpose();
    bias.grad.col(0) += dy.rowwise().sum();
    if (!need_input_grad) return {};
    return weight.value.transpose() * dy;
  }

  Parameter<S> weight, bias;

 private:
  int in_ = 0, out_ = 0;
};

// ---------------------------------------------------------------- activations

template <typename Derived>
auto relu(const Eigen::MatrixBase<Derived>& x) {
  return x.cwiseMax(typename Derived::Scalar(0));
}

/// dL/dx of y = relu(x) given y.
template <typename S>
Matrix<S> relu_backward(const Matrix<S>& dy, const Matrix<S>& y) {
  return (y.array() > S(0)).select(dy, Matrix<S>::Zero(dy.rows(), dy.cols()));
}

template <typename S>
Tensor3<S> relu(const Tensor3<S>& x) {
  Tensor3<S> y = x;
  y.data = relu(x.data);
  return y;
}

template <typename S>
Tensor3<S> relu_backward(const Tensor3<S>& dy, const Tensor3<S>& y) {
  Tensor3<S> dx = dy;
  dx.data = relu_backward<S>(dy.data, y.data);
  return dx;
}

template <typename S>
S sigmoid(S z) {
  return z >= 0 ? S(1) / (S(1) + std::exp(-z)) : std::exp(z) / (S(1) + std::exp(z));
}

/// log(sigmoid(z)) without overflow.
template <typename S>
S log_sigmoid(S z) {
  return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

// ---------------------------------------------------------------- resampling

/// Per-axis interpolation weights: out(i) = sum_j weights(i, j) * in(j).
template <typename S>
using AxisWeights = Matrix<S>;

/// Bilinear weights for sampling `n_out` points spread over [start, end) of an
/// input axis of length n_in (coordinates in input cells, pixel-center
/// convention), averaging `samples` sub-samples per output cell. Samples
/// farther than one cell outside the axis contribute zero; others clamp.
template <typename S>
AxisWeights<S> roi_axis_weights(double start, double end, int n_out, int n_in, int samples) {
  AxisWeights<S> w = AxisWeights<S>::Zero(n_out, n_in);
  const double bin = (end - start) / n_out;
  for (int i = 0; i < n_out; ++i)
    for (int s = 0; s < samples; ++s) {
      double pos = start + bin * (i + (s + 0.5) / samples) - 0.5;
      if (pos < -1.0 || pos > n_in) continue;
      pos = std::clamp(pos, 0.0, static_cast<double>(n_in - 1));
      const int lo = static_cast<int>(std::floor(pos));
      const int hi = std::min(lo + 1, n_in - 1);
      const double frac = pos - lo;
      w(i, lo) += static_cast<S>((1.0 - frac) / samples);
      w(i, hi) += static_cast<S>(frac / samples);
    }
  return w;
}

/// Weights of a plain resize of a whole axis (align_corners = false).
template <typename S>
AxisWeights<S> resize_axis_weights(int n_out, int n_in) {
  return roi_axis_weights<S>(0.0, static_cast<double>(n_in), n_out, n_in, 1);
}

/// Nearest-neighbour integer upsampling weights.
template <typename S>
AxisWeights<S> nearest_axis_weights(int n_out, int n_in) {
  AxisWeights<S> w = AxisWeights<S>::Zero(n_out, n_in);
  for (int i = 0; i < n_out; ++i) w(i, std::min(n_in - 1, i * n_in / n_out)) = S(1);
  return w;
}

/// Separable linear resampling Y_c = Wy X_c Wx^T for every channel.
template <typename S>
struct Resample {
  AxisWeights<S> wy, wx;

  Tensor3<S> forward(const Tensor3<S>& x) const {
    Tensor3<S> y(x.channels, static_cast<int>(wy.rows()), static_cast<int>(wx.rows()));
    for (int c = 0; c < x.channels; ++c) y.channel(c).noalias() = wy * x.channel(c) * wx.transpose();
    return y;
  }

  /// Adds dL/dx into dx (which must already have the input's shape).
  void backward_accumulate(const Tensor3<S>& dy, Tensor3<S>& dx) const {
    for (int c = 0; c < dy.channels; ++c) dx.channel(c).noalias() += wy.transpose() * dy.channel(c) * wx;
  }
};

/// RoIAlign of a box given in input-map cells onto an out x out grid.
template <typename S>
Resample<S> roi_align(double x0, double y0, double x1, double y1, int map_h, int map_w, int out, int samples = 2) {
  return {roi_axis_weights<S>(y0, y1, out, map_h, samples), roi_axis_weights<S>(x0, x1, out, map_w, samples)};
}

// ---------------------------------------------------------------- pooling

template <typename S>
Vector<S> global_average_pool(const Tensor3<S>& x) {
  return x.data.rowwise().mean();
}

template <typename S>
Tensor3<S> global_average_pool_backward(const Vector<S>& dy, int h, int w) {
  Tensor3<S> dx(static_cast<int>(dy.size()), h, w);
  dx.data.colwise() = dy / static_cast<S>(h * w);
  return dx;
}

// ---------------------------------------------------------------- softmax

/// Row-wise softmax (each row of logits is one distribution).
template <typename S>
Matrix<S> softmax_rows(const Matrix<S>& logits) {
  Matrix<S> p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    p.row(r).array() -= p.row(r).maxCoeff();
    p.row(r) = p.row(r).array().exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

/// Column-wise softmax (each column is one distribution).
template <typename S>
Matrix<S> softmax_cols(const Matrix<S>& logits) {
  Matrix<S> p = logits;
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    p.col(c).array() -= p.col(c).maxCoeff();
    p.col(c) = p.col(c).array().exp();
    p.col(c) /= p.col(c).sum();
  }
  return p;
}

}  // namespace ehoi::nn
