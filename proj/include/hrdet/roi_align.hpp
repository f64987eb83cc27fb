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

/// Region pooling geometry. A pixel coordinate p maps to feature coordinate
/// p / stride - 0.5, so cell centers sit at pixel (i + 0.5) * stride.
struct RoiAlignSpec {
  int out = 7;
  double stride = 4.0;
  /// Bilinear samples per bin along each axis.
  int sampling_ratio = 2;
};

/// Pools feature (C, H, W) over an axis-aligned box given in pixels.
/// Each output bin averages sampling_ratio^2 bilinear reads at regular
/// sub-bin points. Throws std::invalid_argument for a box of zero area.
template <typename T>
Tensor<T> roi_align(const Tensor<T>& feature, const HorizontalBox& box, const RoiAlignSpec& spec = {});

/// As roi_align, with sub-bin points laid out in the box frame and mapped
/// to the image by R(theta) and the box center.
template <typename T>
Tensor<T> rotated_roi_align(const Tensor<T>& feature, const OrientedBox& box, const RoiAlignSpec& spec = {});

/// Accumulates d(loss)/d(feature) for upstream (C, out, out) into grad_feature.
template <typename T>
void rotated_roi_align_backward(const OrientedBox& box, const RoiAlignSpec& spec, const Tensor<T>& upstream,
                                Tensor<T>& grad_feature);

/// Pools every box; output (N, C * out * out), one row per box. OpenMP over boxes.
template <typename T>
Tensor<T> rotated_roi_align_batch(const Tensor<T>& feature, std::span<const OrientedBox> boxes,
                                  const RoiAlignSpec& spec = {});

/// Adjoint of rotated_roi_align_batch, accumulated into grad_feature.
/// OpenMP over channels; per-channel accumulation order is box order.
template <typename T>
void rotated_roi_align_batch_backward(std::span<const OrientedBox> boxes, const RoiAlignSpec& spec,
                                      const Tensor<T>& upstream, Tensor<T>& grad_feature);

namespace serial {
template <typename T>
Tensor<T> rotated_roi_align_batch(const Tensor<T>& feature, std::span<const OrientedBox> boxes,
                                  const RoiAlignSpec& spec = {});
}  // namespace serial

}  // namespace hrdet
