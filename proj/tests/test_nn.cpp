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

#include <gtest/gtest.h>

#include "ehoi/nn.hpp"
#include "ehoi/rng.hpp"
#include "support/gradcheck.hpp"

using namespace ehoi;
using namespace ehoi::nn;
using ehoi::gradcheck::relative_error;
using M = Matrix<double>;

namespace {

M random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c) {
  M m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

Tensor3<double> random_tensor(Rng& rng, int c, int h, int w) {
  Tensor3<double> t(c, h, w);
  t.data = random_matrix(rng, c, h * w);
  return t;
}

}  // namespace

TEST(Conv2d, OutputSizeArithmetic) {
  Conv2d<double> conv("c", 3, 8, 3, 2, 1);
  EXPECT_EQ(conv.out_size(96), 48);
  EXPECT_EQ(conv.out_size(12), 6);
  Conv2d<double> patch("p", 26, 16, 4, 4, 0);
  EXPECT_EQ(patch.out_size(96), 24);
}

TEST(Conv2d, MatchesDirectConvolution) {
  Rng rng(1);
  Conv2d<double> conv("c", 2, 3, 3, 2, 1);
  conv.init(rng);
  conv.bias.value = random_matrix(rng, 3, 1);
  const auto x = random_tensor(rng, 2, 7, 6);
  Conv2d<double>::Cache cache;
  const auto y = conv.forward(x, cache);
  ASSERT_EQ(y.height, 4);
  ASSERT_EQ(y.width, 3);
  for (int o = 0; o < 3; ++o)
    for (int oy = 0; oy < y.height; ++oy)
      for (int ox = 0; ox < y.width; ++ox) {
        double s = conv.bias.value(o, 0);
        for (int c = 0; c < 2; ++c)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = oy * 2 - 1 + ky, ix = ox * 2 - 1 + kx;
              if (iy < 0 || iy >= 7 || ix < 0 || ix >= 6) continue;
              s += conv.weight.value(o, (c * 3 + ky) * 3 + kx) * x.at(c, iy, ix);
            }
        EXPECT_NEAR(y.at(o, oy, ox), s, 1e-12);
      }
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  Rng rng(2);
  for (auto [k, s, p] : {std::array{3, 1, 1}, std::array{3, 2, 1}, std::array{1, 1, 0}, std::array{2, 2, 0}}) {
    Conv2d<double> conv("c", 2, 3, k, s, p);
    conv.init(rng);
    auto x = random_tensor(rng, 2, 6, 5);
    Conv2d<double>::Cache cache;
    const auto y0 = conv.forward(x, cache);
    const M r = random_matrix(rng, y0.data.rows(), y0.data.cols());
    const auto loss = [&] {
      Conv2d<double>::Cache c;
      return conv.forward(x, c).data.cwiseProduct(r).sum();
    };
    Tensor3<double> dy = y0;
    dy.data = r;
    conv.weight.grad.setZero();
    conv.bias.grad.setZero();
    const auto dx = conv.backward(dy, cache, true);
    EXPECT_LT(relative_error(x.data, dx.data, loss), 1e-6);
    const M gw = conv.weight.grad, gb = conv.bias.grad;
    EXPECT_LT(relative_error(conv.weight.value, gw, loss), 1e-6);
    EXPECT_LT(relative_error(conv.bias.value, gb, loss), 1e-6);
  }
}

TEST(Linear, GradientsMatchFiniteDifferences) {
  Rng rng(3);
  Linear<double> lin("l", 5, 4);
  lin.init(rng);
  M x = random_matrix(rng, 5, 3);
  const M r = random_matrix(rng, 4, 3);
  const auto loss = [&] { return lin.forward(x).cwiseProduct(r).sum(); };
  lin.weight.grad.setZero();
  lin.bias.grad.setZero();
  const M dx = lin.backward(r, x, true);
  EXPECT_LT(relative_error(x, dx, loss), 1e-6);
  const M gw = lin.weight.grad;
  EXPECT_LT(relative_error(lin.weight.value, gw, loss), 1e-6);
}

TEST(Resample, RoiAlignGradientMatchesFiniteDifferences) {
  Rng rng(4);
  auto x = random_tensor(rng, 3, 12, 12);
  const auto rs = roi_align<double>(2.3, 1.7, 9.1, 10.4, 12, 12, 7, 2);
  const M r = random_matrix(rng, 3, 49);
  const auto loss = [&] { return rs.forward(x).data.cwiseProduct(r).sum(); };
  Tensor3<double> dy(3, 7, 7), dx(3, 12, 12);
  dy.data = r;
  rs.backward_accumulate(dy, dx);
  EXPECT_LT(relative_error(x.data, dx.data, loss), 1e-6);
}

TEST(Resample, RoiAlignOfConstantMapIsConstant) {
  Tensor3<double> x(1, 10, 10);
  x.data.setConstant(3.5);
  const auto y = roi_align<double>(1.2, 2.2, 7.9, 8.3, 10, 10, 7, 2).forward(x);
  for (Eigen::Index i = 0; i < y.data.size(); ++i) EXPECT_NEAR(y.data.data()[i], 3.5, 1e-12);
}

TEST(Resample, IntegerTranslationIsEquivariant) {
  Rng rng(5);
  auto x = random_tensor(rng, 2, 16, 16);
  Tensor3<double> shifted(2, 16, 16);
  for (int c = 0; c < 2; ++c)
    for (int y = 1; y < 16; ++y)
      for (int xx = 3; xx < 16; ++xx) shifted.at(c, y, xx) = x.at(c, y - 1, xx - 3);
  const auto a = roi_align<double>(2.4, 3.1, 8.6, 9.9, 16, 16, 7).forward(x);
  const auto b = roi_align<double>(5.4, 4.1, 11.6, 10.9, 16, 16, 7).forward(shifted);
  EXPECT_LT((a.data - b.data).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Resample, BilinearResizeAndNearest) {
  const auto w = resize_axis_weights<double>(8, 2);
  for (Eigen::Index i = 0; i < w.rows(); ++i) EXPECT_NEAR(w.row(i).sum(), 1.0, 1e-12);
  // output cell 3 of 8 sits at input coordinate (3.5 / 4) - 0.5 = 0.375
  EXPECT_NEAR(w(3, 0), 0.625, 1e-12);
  EXPECT_NEAR(w(3, 1), 0.375, 1e-12);
  const auto n = nearest_axis_weights<double>(6, 3);
  EXPECT_EQ(n(0, 0), 1.0);
  EXPECT_EQ(n(1, 0), 1.0);
  EXPECT_EQ(n(5, 2), 1.0);
}

TEST(Activations, ReluAndPoolingGradients) {
  Rng rng(6);
  auto x = random_tensor(rng, 3, 4, 4);
  const Vector<double> r = random_matrix(rng, 3, 1);
  const auto loss = [&] { return global_average_pool(relu(x)).dot(r); };
  const auto y = relu(x);
  const auto dy = global_average_pool_backward<double>(r, 4, 4);
  const auto dx = relu_backward(dy, y);
  EXPECT_LT(relative_error(x.data, dx.data, loss), 1e-6);
}

TEST(Activations, SoftmaxRowsAreDistributions) {
  Rng rng(7);
  const M p = softmax_rows<double>(random_matrix(rng, 21, 64) * 30.0);
  for (Eigen::Index r = 0; r < p.rows(); ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-12);
  EXPECT_GE(p.minCoeff(), 0.0);
  EXPECT_NEAR(log_sigmoid(-800.0), -800.0, 1e-9);
  EXPECT_EQ(sigmoid(800.0), 1.0);
}
