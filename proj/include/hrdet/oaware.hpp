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

#include <span>

#include "hrdet/geometry.hpp"
#include "hrdet/netcore.hpp"

namespace hrdet {

/// Sampling displacement field for a k x k kernel over an (H, W) map, stored
/// as (2*k*k, H, W). Tap t = (ry + (k-1)/2) * k + (rx + (k-1)/2) occupies
/// channel 2t (column / x offset) and 2t+1 (row / y offset), in cells.
///
/// For location p and tap r (a row vector in tap units):
///   offset(p, r) = ((x, y) + (1/k) * (w, h) .* r * R(theta)^T) / S - cell_offset - p - r
/// where (x, y, w, h) is the location's anchor in pixels. The anchor of a
/// location whose center sits at S * (p + cell_offset) with w = h = k * S
/// yields a zero field for theta = 0.
template <typename T>
Tensor<T> offset_field(std::span<const HorizontalBox> anchors, std::span<const double> thetas, int height,
                       int width, double stride, int k, double cell_offset = 0.0);

/// Y(p) = sum_r W(r) . X(p + r + offset(p, r)), bilinear reads with zero
/// padding; stride 1, "same" padding. x is (C, H, W).
template <typename T>
Tensor<T> oaconv_forward(const Tensor<T>& x, const ConvParams<T>& params, const Tensor<T>& offsets);

/// Gradients w.r.t. input, weights and bias. Offsets are constants.
template <typename T>
ConvGrads<T> oaconv_backward(const Tensor<T>& x, const ConvParams<T>& params, const Tensor<T>& offsets,
                             const Tensor<T>& upstream, bool need_grad_x = true);

/// Deformable unfold: (C*k*k, H*W) columns of bilinear samples. OpenMP over channels.
template <typename T>
void deform_im2col(const Tensor<T>& x, const Tensor<T>& offsets, int k, T* col);

namespace serial {
template <typename T>
void deform_im2col(const Tensor<T>& x, const Tensor<T>& offsets, int k, T* col);
}  // namespace serial

}  // namespace hrdet
