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

// Independent reference implementations used to derive and check expected
// values. Nothing here may call the code path it is checking.

#pragma once

#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "hrdet/geometry.hpp"
#include "hrdet/netcore.hpp"

namespace hrdet::oracle {

/// Point-in-rectangle test in the box frame.
bool inside_box(const OrientedBox& b, double x, double y);

/// IoU by counting cell-center samples of a grid x grid raster over the joint
/// axis-aligned bounding region of both boxes.
double raster_iou(const OrientedBox& a, const OrientedBox& b, int grid = 512);

/// Quadratic greedy NMS: repeatedly take the best remaining box by argmax scan.
std::vector<std::size_t> nms_quadratic(std::span<const OrientedBox> boxes, std::span<const double> scores,
                                       double iou_thr);

/// Area of the bounding rectangle of pts when aligned with direction angle.
double enclosing_area_at(std::span<const Point2> pts, double angle);

/// Central finite-difference gradient of f at x.
std::vector<double> numeric_gradient(const std::function<double(std::span<const double>)>& f,
                                     std::vector<double> x, double eps);

/// Max over i of |a_i - b_i| / max(|a_i|, |b_i|, floor).
double max_relative_error(std::span<const double> a, std::span<const double> b, double floor = 1e-3);

/// Direct bilinear read with zero padding, written out longhand.
double bilinear_ref(const Tensor<double>& x, int c, double px, double py);

/// Per-tap evaluation of the orientation-aware convolution from its definition.
Tensor<double> oaconv_naive(const Tensor<double>& x, const ConvParams<double>& p, const Tensor<double>& offsets);

/// Direct 2D cross-correlation with zero padding.
Tensor<double> conv2d_naive(const Tensor<double>& x, const ConvParams<double>& p);

/// Average of samples x samples bilinear reads per output bin of a rotated
/// region (box in pixels, feature coordinate = pixel / stride - 0.5).
Tensor<double> roi_supersample(const Tensor<double>& feature, const OrientedBox& box, int out, double stride,
                               int samples);

OrientedBox random_box(std::mt19937_64& rng, double span = 100.0, double min_edge = 2.0, double max_edge = 60.0);

template <typename T>
Tensor<T> random_tensor(std::vector<int> shape, std::mt19937_64& rng, double scale = 1.0) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> nd(0.0, scale);
  for (T& v : t.values()) v = static_cast<T>(nd(rng));
  return t;
}

}  // namespace hrdet::oracle
