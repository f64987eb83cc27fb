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

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "hrdet/tensor.hpp"

namespace hrdet {

/// Weights (C_out, C_in, k, k), bias (C_out). Zero padding.
template <typename T>
struct ConvParams {
  Tensor<T> weight;
  Tensor<T> bias;
  int stride = 1;
  int padding = 0;

  int out_channels() const { return weight.dim(0); }
  int in_channels() const { return weight.dim(1); }
  int kernel() const { return weight.dim(2); }
};

template <typename T>
struct ConvGrads {
  Tensor<T> grad_x;
  Tensor<T> grad_w;
  Tensor<T> grad_b;
};

int conv_out_extent(int in, int k, int stride, int padding);

/// Cross-correlation. x is (C, H, W) or (N, C, H, W); the output keeps x's rank.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvParams<T>& p);

/// Gradients of conv2d for upstream dL/dy. grad_x is skipped when need_grad_x is false.
template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const ConvParams<T>& p, const Tensor<T>& upstream,
                             bool need_grad_x = true);

/// Unfolds one (C, H, W) image into a (C*k*k, Ho*Wo) row-major matrix.
template <typename T>
void im2col(const T* x, int channels, int height, int width, int k, int stride, int padding, T* col);
/// Adjoint of im2col: accumulates a column matrix back into (C, H, W).
template <typename T>
void col2im(const T* col, int channels, int height, int width, int k, int stride, int padding, T* x);

namespace serial {
template <typename T>
void im2col(const T* x, int channels, int height, int width, int k, int stride, int padding, T* col);
}  // namespace serial

/// out(rows x cols) = a(rows x inner) * b(inner x cols), all row-major.
/// accumulate adds into out instead of overwriting.
template <typename T>
void matmul(const T* a, const T* b, T* out, int rows, int inner, int cols, bool accumulate = false);
/// out(rows x cols) = a(inner x rows)^T * b(inner x cols).
template <typename T>
void matmul_tn(const T* a, const T* b, T* out, int rows, int inner, int cols, bool accumulate = false);
/// out(rows x cols) = a(rows x inner) * b(cols x inner)^T.
template <typename T>
void matmul_nt(const T* a, const T* b, T* out, int rows, int inner, int cols, bool accumulate = false);

template <typename T>
struct FcGrads {
  Tensor<T> grad_x;
  Tensor<T> grad_w;
  Tensor<T> grad_b;
};

/// y = x W^T + b with x (N, D), W (O, D), b (O).
template <typename T>
Tensor<T> fc(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);
template <typename T>
FcGrads<T> fc_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& upstream,
                       bool need_grad_x = true);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
/// Uses the forward input (or output; the masks agree) to gate upstream.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& upstream);

template <typename T>
T sigmoid(T x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

template <typename T>
struct LossGrad {
  T loss = 0;
  Tensor<T> grad;
};

inline constexpr double kProbClamp = 1e-7;

/// -mean(y ln p + (1 - y) ln(1 - p)), p clamped to [1e-7, 1 - 1e-7].
/// grad is dL/dp (zero where the clamp is active).
template <typename T>
LossGrad<T> bce_loss(std::span<const T> pred, std::span<const T> labels);

/// bce_loss(sigmoid(logits), labels) with grad taken w.r.t. the logits.
template <typename T>
LossGrad<T> bce_with_logits(std::span<const T> logits, std::span<const T> labels);

/// Mean softmax cross-entropy over rows of logits (N, K); grad w.r.t. logits.
template <typename T>
LossGrad<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

/// Row-wise softmax of (N, K).
template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

/// sum smooth_l1(pred - target) / normalizer, elementwise over equal-shape tensors.
template <typename T>
LossGrad<T> smooth_l1(const Tensor<T>& pred, const Tensor<T>& target, T beta, T normalizer);

/// Sampling location in cell units: x is the column, y the row.
template <typename T>
struct SamplePoint {
  T x = 0, y = 0;
};

/// Bilinear read of a single (H, W) plane with zero padding outside.
template <typename T>
T bilinear_at(const T* plane, int height, int width, T x, T y);

/// Bilinear weights and neighbor indices for one location.
template <typename T>
struct BilinearTap {
  int x0 = 0, y0 = 0;
  T lx = 0, ly = 0;
  std::array<T, 4> w{};          // (y0,x0), (y0,x1), (y1,x0), (y1,x1)
  std::array<bool, 4> valid{};

  static BilinearTap at(T x, T y, int height, int width);
};

/// Samples every channel of x (C, H, W) at each point. Output (P, C).
template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& x, std::span<const SamplePoint<T>> points);

template <typename T>
struct BilinearGrads {
  Tensor<T> grad_x;
  std::vector<SamplePoint<T>> grad_points;
};

template <typename T>
BilinearGrads<T> bilinear_sample_backward(const Tensor<T>& x, std::span<const SamplePoint<T>> points,
                                          const Tensor<T>& upstream);

/// Nearest-neighbour 2x upsampling of (C, H, W); backward sums 2x2 blocks.
template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x);
template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& upstream);

}  // namespace hrdet
