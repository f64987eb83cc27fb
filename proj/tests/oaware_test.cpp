// Copyright 2026 The hrdet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hrdet/oaware.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hrdet/anchors.hpp"
#include "oracles.hpp"

namespace hrdet {
namespace {

using oracle::random_tensor;

std::vector<double> as_vector(const Tensor<double>& t) { return {t.values().begin(), t.values().end()}; }

double dot_with(const Tensor<double>& y, const Tensor<double>& r) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
  return s;
}

// Anchors centered on S * p (no half-cell shift) with the given extents.
std::vector<HorizontalBox> lattice_anchors(int h, int w, double stride, double aw, double ah) {
  std::vector<HorizontalBox> out;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) out.push_back({stride * j, stride * i, aw, ah});
  }
  return out;
}

double off_x(const Tensor<double>& f, int k, int rx, int ry, int i, int j) {
  const int t = (ry + k / 2) * k + (rx + k / 2);
  return f.at(2 * t, i, j);
}
double off_y(const Tensor<double>& f, int k, int rx, int ry, int i, int j) {
  const int t = (ry + k / 2) * k + (rx + k / 2);
  return f.at(2 * t + 1, i, j);
}

TEST(OffsetField, CanonicalAnchorIsZero) {
  const int h = 4, w = 5, k = 3;
  const double s = 8;
  const auto anchors = lattice_anchors(h, w, s, k * s, k * s);
  const std::vector<double> thetas(anchors.size(), 0.0);
  const auto f = offset_field<double>(anchors, thetas, h, w, s, k);
  ASSERT_EQ(f.shape(), (std::vector<int>{2 * k * k, h, w}));
  for (double v : f.values()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(OffsetField, HalfCellAnchorsWithCellOffset) {
  // Anchors from the generator sit at (p + 0.5) * S.
  const std::vector<FeatureLevelSpec> levels = {{4, 6, 7}};
  const auto anchors = generate_anchors(levels, 3.0, 1.0).anchors[0];
  const std::vector<double> thetas(anchors.size(), 0.0);
  const auto f = offset_field<double>(anchors, thetas, 6, 7, 4.0, 3, 0.5);
  for (double v : f.values()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(OffsetField, WideAnchorStretchesHorizontally) {
  const int k = 3;
  const double s = 4;
  const auto anchors = lattice_anchors(3, 3, s, 2 * k * s, k * s);
  const std::vector<double> thetas(anchors.size(), 0.0);
  const auto f = offset_field<double>(anchors, thetas, 3, 3, s, k);
  for (int ry = -1; ry <= 1; ++ry) {
    for (int rx = -1; rx <= 1; ++rx) {
      EXPECT_NEAR(off_x(f, k, rx, ry, 1, 2), rx, 1e-12);
      EXPECT_NEAR(off_y(f, k, rx, ry, 1, 2), 0.0, 1e-12);
    }
  }
}

TEST(OffsetField, QuarterTurnMovesTap) {
  const int k = 3;
  const double s = 8;
  const auto anchors = lattice_anchors(2, 2, s, k * s, k * s);
  const std::vector<double> thetas(anchors.size(), 0.5 * kPi);
  const auto f = offset_field<double>(anchors, thetas, 2, 2, s, k);
  EXPECT_NEAR(off_x(f, k, 1, 0, 1, 1), -1.0, 1e-12);
  EXPECT_NEAR(off_y(f, k, 1, 0, 1, 1), 1.0, 1e-12);
}

TEST(OffsetField, RotationConsistencyForSquareAnchors) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(-1.5, 1.5), sz(10.0, 60.0), jit(-3.0, 3.0);
  const int h = 3, w = 4;
  for (int k : {3, 5}) {
    std::vector<HorizontalBox> anchors;
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const double e = sz(rng);
        anchors.push_back({8.0 * j + jit(rng), 8.0 * i + jit(rng), e, e});
      }
    }
    std::vector<double> th(anchors.size()), th90(anchors.size());
    for (std::size_t i = 0; i < th.size(); ++i) {
      th[i] = ang(rng);
      th90[i] = th[i] + 0.5 * kPi;
    }
    const auto f = offset_field<double>(anchors, th, h, w, 8.0, k);
    const auto g = offset_field<double>(anchors, th90, h, w, 8.0, k);
    const int half = k / 2;
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        for (int ry = -half; ry <= half; ++ry) {
          for (int rx = -half; rx <= half; ++rx) {
            // r * R(pi/2)^T = (-ry, rx).
            const int qx = -ry, qy = rx;
            EXPECT_NEAR(off_x(g, k, rx, ry, i, j) + rx, off_x(f, k, qx, qy, i, j) + qx, 1e-9);
            EXPECT_NEAR(off_y(g, k, rx, ry, i, j) + ry, off_y(f, k, qx, qy, i, j) + qy, 1e-9);
          }
        }
      }
    }
  }
}

TEST(OffsetField, ZeroThetaDependsOnlyOnAnchors) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  std::vector<HorizontalBox> anchors(12);
  for (auto& a : anchors) a = {u(rng), u(rng), u(rng) + 1, u(rng) + 1};
  const std::vector<double> zeros(12, 0.0);
  const auto a = offset_field<double>(anchors, zeros, 3, 4, 4.0, 3, 0.5);
  const auto b = offset_field<double>(anchors, zeros, 3, 4, 4.0, 3, 0.5);
  EXPECT_EQ(as_vector(a), as_vector(b));
}

TEST(OffsetField, RejectsBadInput) {
  const std::vector<HorizontalBox> anchors(4, HorizontalBox{0, 0, 1, 1});
  const std::vector<double> thetas(3, 0.0);
  EXPECT_THROW(offset_field<double>(anchors, thetas, 2, 2, 4.0, 3), ShapeError);
  const std::vector<double> ok(4, 0.0);
  EXPECT_THROW(offset_field<double>(anchors, ok, 2, 2, 4.0, 2), ShapeError);
}

ConvParams<double> random_params(std::mt19937_64& rng, int co, int ci, int k) {
  return {random_tensor<double>({co, ci, k, k}, rng), random_tensor<double>({co}, rng), 1, k / 2};
}

Tensor<double> random_offsets(std::mt19937_64& rng, int k, int h, int w, double scale) {
  return random_tensor<double>({2 * k * k, h, w}, rng, scale);
}

TEST(OaConv, ZeroOffsetsReduceToConv) {
  std::mt19937_64 rng(5);
  for (int k : {1, 3, 5}) {
    const auto x = random_tensor<double>({3, 7, 9}, rng);
    const auto p = random_params(rng, 4, 3, k);
    const Tensor<double> zero({2 * k * k, 7, 9});
    const auto y = oaconv_forward(x, p, zero);
    const auto want = conv2d(x, p);
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], want[i], 1e-6);
  }
}

TEST(OaConv, CanonicalFieldReducesToConvFloat) {
  std::mt19937_64 rng(6);
  const int h = 8, w = 8, k = 3;
  const std::vector<FeatureLevelSpec> levels = {{4, h, w}};
  const auto anchors = generate_anchors(levels, 3.0, 1.0).anchors[0];
  const std::vector<double> thetas(anchors.size(), 0.0);
  const auto f = offset_field<float>(anchors, thetas, h, w, 4.0, k, 0.5);
  const auto x = random_tensor<float>({4, h, w}, rng);
  ConvParams<float> p{random_tensor<float>({5, 4, k, k}, rng), random_tensor<float>({5}, rng), 1, 1};
  const auto y = oaconv_forward(x, p, f);
  const auto want = conv2d(x, p);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], want[i], 1e-6);
}

TEST(OaConv, ConstantInputOnesKernel) {
  std::mt19937_64 rng(7);
  const int h = 10, w = 10, k = 3;
  const Tensor<double> x({1, h, w}, 1.75);
  ConvParams<double> p{Tensor<double>({1, 1, k, k}, 1.0), Tensor<double>({1}), 1, 1};
  const auto off = random_offsets(rng, k, h, w, 0.4);
  const auto y = oaconv_forward(x, p, off);
  int checked = 0;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      bool inside = true;
      for (int ry = -1; ry <= 1; ++ry) {
        for (int rx = -1; rx <= 1; ++rx) {
          const double sx = j + rx + off_x(off, k, rx, ry, i, j), sy = i + ry + off_y(off, k, rx, ry, i, j);
          inside = inside && sx >= 0 && sx <= w - 1 && sy >= 0 && sy <= h - 1;
        }
      }
      if (!inside) continue;
      ++checked;
      EXPECT_NEAR(y.at(0, i, j), 9 * 1.75, 1e-12);
    }
  }
  EXPECT_GT(checked, 20);
}

TEST(OaConv, MatchesNaiveEvaluator) {
  std::mt19937_64 rng(8);
  const auto x = random_tensor<double>({3, 9, 8}, rng);
  const auto p = random_params(rng, 4, 3, 3);
  const auto off = random_offsets(rng, 3, 9, 8, 1.5);
  const auto y = oaconv_forward(x, p, off);
  const auto want = oracle::oaconv_naive(x, p, off);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], want[i], 1e-6);
}

TEST(OaConv, ZeroUpstreamGivesZeroGradients) {
  std::mt19937_64 rng(9);
  const auto x = random_tensor<double>({2, 6, 6}, rng);
  const auto p = random_params(rng, 3, 2, 3);
  const auto off = random_offsets(rng, 3, 6, 6, 1.0);
  const auto g = oaconv_backward(x, p, off, Tensor<double>({3, 6, 6}));
  for (const auto* t : {&g.grad_x, &g.grad_w, &g.grad_b}) {
    for (double v : t->values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(OaConv, ZeroOffsetGradientsMatchConv) {
  std::mt19937_64 rng(10);
  const auto x = random_tensor<double>({2, 7, 6}, rng);
  const auto p = random_params(rng, 3, 2, 3);
  const auto r = random_tensor<double>({3, 7, 6}, rng);
  const auto g = oaconv_backward(x, p, Tensor<double>({18, 7, 6}), r);
  const auto c = conv2d_backward(x, p, r);
  for (std::size_t i = 0; i < g.grad_x.size(); ++i) EXPECT_NEAR(g.grad_x[i], c.grad_x[i], 1e-6);
  for (std::size_t i = 0; i < g.grad_w.size(); ++i) EXPECT_NEAR(g.grad_w[i], c.grad_w[i], 1e-6);
  for (std::size_t i = 0; i < g.grad_b.size(); ++i) EXPECT_NEAR(g.grad_b[i], c.grad_b[i], 1e-6);
}

TEST(OaConv, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  const auto x = random_tensor<double>({2, 8, 8}, rng);
  const auto p = random_params(rng, 3, 2, 3);
  const auto off = random_offsets(rng, 3, 8, 8, 1.2);
  const auto r = random_tensor<double>({3, 8, 8}, rng);
  const auto g = oaconv_backward(x, p, off, r);
  const auto fx = [&](std::span<const double> v) {
    Tensor<double> t(x.shape());
    std::copy(v.begin(), v.end(), t.data());
    return dot_with(oaconv_forward(t, p, off), r);
  };
  EXPECT_LE(oracle::max_relative_error(as_vector(g.grad_x), oracle::numeric_gradient(fx, as_vector(x), 1e-4)), 1e-4);
  const auto fw = [&](std::span<const double> v) {
    ConvParams<double> q = p;
    std::copy(v.begin(), v.end(), q.weight.data());
    return dot_with(oaconv_forward(x, q, off), r);
  };
  EXPECT_LE(oracle::max_relative_error(as_vector(g.grad_w), oracle::numeric_gradient(fw, as_vector(p.weight), 1e-4)),
            1e-4);
  const auto fb = [&](std::span<const double> v) {
    ConvParams<double> q = p;
    std::copy(v.begin(), v.end(), q.bias.data());
    return dot_with(oaconv_forward(x, q, off), r);
  };
  EXPECT_LE(oracle::max_relative_error(as_vector(g.grad_b), oracle::numeric_gradient(fb, as_vector(p.bias), 1e-4)),
            1e-4);
}

TEST(OaConv, ShapeErrors) {
  std::mt19937_64 rng(12);
  const auto x = random_tensor<double>({2, 6, 6}, rng);
  auto p = random_params(rng, 3, 2, 3);
  EXPECT_THROW(oaconv_forward(x, p, Tensor<double>({18, 5, 6})), ShapeError);
  p.stride = 2;
  EXPECT_THROW(oaconv_forward(x, p, Tensor<double>({18, 6, 6})), ShapeError);
}

TEST(DeformIm2col, ParallelMatchesSerial) {
  std::mt19937_64 rng(13);
  const auto x = random_tensor<float>({6, 11, 13}, rng);
  const auto off = random_tensor<float>({18, 11, 13}, rng, 2.0f);
  std::vector<float> a(static_cast<std::size_t>(6 * 9 * 11 * 13)), b(a.size());
  deform_im2col(x, off, 3, a.data());
  serial::deform_im2col(x, off, 3, b.data());
  EXPECT_EQ(a, b);
}

}  // namespace
}  // namespace hrdet
