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

#include "hrdet/roi_align.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace hrdet {

namespace {

void check_spec(const RoiAlignSpec& spec) {
  if (spec.out <= 0 || spec.sampling_ratio <= 0 || !(spec.stride > 0)) {
    throw std::invalid_argument("roi_align: out, sampling_ratio and stride must be positive");
  }
}

void check_box(const OrientedBox& box) {
  if (!(box.w > 0 && box.h > 0) || box.area() < kMinArea || !std::isfinite(box.cx) || !std::isfinite(box.cy) ||
      !std::isfinite(box.theta)) {
    throw std::invalid_argument("roi_align: box has zero area or non-finite parameters");
  }
}

// Bilinear taps of every sample point of one box, bin-major:
// taps[(bin * sr + si) * sr + sj] with bin = i * out + j.
template <typename T>
std::vector<BilinearTap<T>> box_taps(const OrientedBox& box, const RoiAlignSpec& spec, int height, int width) {
  check_box(box);
  const int out = spec.out, sr = spec.sampling_ratio;
  const double c = std::cos(box.theta), s = std::sin(box.theta);
  const double bw = box.w / out, bh = box.h / out;
  std::vector<BilinearTap<T>> taps;
  taps.reserve(static_cast<std::size_t>(out * out * sr * sr));
  for (int i = 0; i < out; ++i) {
    for (int j = 0; j < out; ++j) {
      for (int si = 0; si < sr; ++si) {
        const double v = -0.5 * box.h + (i + (si + 0.5) / sr) * bh;
        for (int sj = 0; sj < sr; ++sj) {
          const double u = -0.5 * box.w + (j + (sj + 0.5) / sr) * bw;
          const double px = box.cx + c * u - s * v, py = box.cy + s * u + c * v;
          taps.push_back(BilinearTap<T>::at(static_cast<T>(px / spec.stride - 0.5),
                                            static_cast<T>(py / spec.stride - 0.5), height, width));
        }
      }
    }
  }
  return taps;
}

template <typename T>
inline T read(const T* plane, int width, const BilinearTap<T>& t) {
  T v = 0;
  if (t.valid[0]) v += t.w[0] * plane[static_cast<std::size_t>(t.y0) * width + t.x0];
  if (t.valid[1]) v += t.w[1] * plane[static_cast<std::size_t>(t.y0) * width + t.x0 + 1];
  if (t.valid[2]) v += t.w[2] * plane[static_cast<std::size_t>(t.y0 + 1) * width + t.x0];
  if (t.valid[3]) v += t.w[3] * plane[static_cast<std::size_t>(t.y0 + 1) * width + t.x0 + 1];
  return v;
}

template <typename T>
inline void scatter(T* plane, int width, const BilinearTap<T>& t, T g) {
  if (t.valid[0]) plane[static_cast<std::size_t>(t.y0) * width + t.x0] += t.w[0] * g;
  if (t.valid[1]) plane[static_cast<std::size_t>(t.y0) * width + t.x0 + 1] += t.w[1] * g;
  if (t.valid[2]) plane[static_cast<std::size_t>(t.y0 + 1) * width + t.x0] += t.w[2] * g;
  if (t.valid[3]) plane[static_cast<std::size_t>(t.y0 + 1) * width + t.x0 + 1] += t.w[3] * g;
}

// Pools one box into out[0 .. C*out*out).
template <typename T>
void pool_box(const Tensor<T>& feature, const std::vector<BilinearTap<T>>& taps, const RoiAlignSpec& spec, T* out) {
  const int channels = feature.dim(0), height = feature.dim(1), width = feature.dim(2);
  const int bins = spec.out * spec.out, per_bin = spec.sampling_ratio * spec.sampling_ratio;
  const T scale = T(1) / static_cast<T>(per_bin);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int ch = 0; ch < channels; ++ch) {
    const T* src = feature.data() + ch * plane;
    for (int b = 0; b < bins; ++b) {
      T acc = 0;
      for (int k = 0; k < per_bin; ++k) acc += read(src, width, taps[static_cast<std::size_t>(b * per_bin + k)]);
      out[static_cast<std::size_t>(ch) * bins + b] = acc * scale;
    }
  }
}

template <typename T>
void check_feature(const Tensor<T>& feature) {
  if (feature.rank() != 3) throw ShapeError("roi_align: feature must be (C, H, W)");
}

}  // namespace

template <typename T>
Tensor<T> rotated_roi_align(const Tensor<T>& feature, const OrientedBox& box, const RoiAlignSpec& spec) {
  check_spec(spec);
  check_feature(feature);
  Tensor<T> out({feature.dim(0), spec.out, spec.out});
  pool_box(feature, box_taps<T>(box, spec, feature.dim(1), feature.dim(2)), spec, out.data());
  return out;
}

template <typename T>
Tensor<T> roi_align(const Tensor<T>& feature, const HorizontalBox& box, const RoiAlignSpec& spec) {
  return rotated_roi_align(feature, OrientedBox{box.cx, box.cy, box.w, box.h, 0.0}, spec);
}

template <typename T>
void rotated_roi_align_backward(const OrientedBox& box, const RoiAlignSpec& spec, const Tensor<T>& upstream,
                                Tensor<T>& grad_feature) {
  check_spec(spec);
  check_feature(grad_feature);
  const int channels = grad_feature.dim(0), height = grad_feature.dim(1), width = grad_feature.dim(2);
  if (upstream.size() != static_cast<std::size_t>(channels) * spec.out * spec.out) {
    throw ShapeError("rotated_roi_align_backward: upstream shape " + shape_string(upstream.shape()));
  }
  const auto taps = box_taps<T>(box, spec, height, width);
  const int bins = spec.out * spec.out, per_bin = spec.sampling_ratio * spec.sampling_ratio;
  const T scale = T(1) / static_cast<T>(per_bin);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int ch = 0; ch < channels; ++ch) {
    T* dst = grad_feature.data() + ch * plane;
    for (int b = 0; b < bins; ++b) {
      const T g = upstream[static_cast<std::size_t>(ch) * bins + b] * scale;
      for (int k = 0; k < per_bin; ++k) scatter(dst, width, taps[static_cast<std::size_t>(b * per_bin + k)], g);
    }
  }
}

template <typename T>
Tensor<T> rotated_roi_align_batch(const Tensor<T>& feature, std::span<const OrientedBox> boxes,
                                  const RoiAlignSpec& spec) {
  check_spec(spec);
  check_feature(feature);
  const int n = static_cast<int>(boxes.size());
  const int row = feature.dim(0) * spec.out * spec.out;
  Tensor<T> out({n, row});
  for (const OrientedBox& b : boxes) check_box(b);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    pool_box(feature, box_taps<T>(boxes[i], spec, feature.dim(1), feature.dim(2)), spec,
             out.data() + static_cast<std::size_t>(i) * row);
  }
  return out;
}

template <typename T>
void rotated_roi_align_batch_backward(std::span<const OrientedBox> boxes, const RoiAlignSpec& spec,
                                      const Tensor<T>& upstream, Tensor<T>& grad_feature) {
  check_spec(spec);
  check_feature(grad_feature);
  const int channels = grad_feature.dim(0), height = grad_feature.dim(1), width = grad_feature.dim(2);
  const int n = static_cast<int>(boxes.size());
  const int bins = spec.out * spec.out, per_bin = spec.sampling_ratio * spec.sampling_ratio;
  const std::size_t row = static_cast<std::size_t>(channels) * bins;
  if (upstream.size() != row * static_cast<std::size_t>(n)) {
    throw ShapeError("rotated_roi_align_batch_backward: upstream shape " + shape_string(upstream.shape()));
  }
  std::vector<std::vector<BilinearTap<T>>> taps(boxes.size());
  for (int i = 0; i < n; ++i) taps[static_cast<std::size_t>(i)] = box_taps<T>(boxes[i], spec, height, width);
  const T scale = T(1) / static_cast<T>(per_bin);
  const std::size_t plane = static_cast<std::size_t>(height) * width;
#pragma omp parallel for schedule(static)
  for (int ch = 0; ch < channels; ++ch) {
    T* dst = grad_feature.data() + ch * plane;
    for (int i = 0; i < n; ++i) {
      const T* up = upstream.data() + static_cast<std::size_t>(i) * row + static_cast<std::size_t>(ch) * bins;
      const auto& t = taps[static_cast<std::size_t>(i)];
      for (int b = 0; b < bins; ++b) {
        const T g = up[b] * scale;
        for (int k = 0; k < per_bin; ++k) scatter(dst, width, t[static_cast<std::size_t>(b * per_bin + k)], g);
      }
    }
  }
}

namespace serial {

template <typename T>
Tensor<T> rotated_roi_align_batch(const Tensor<T>& feature, std::span<const OrientedBox> boxes,
                                  const RoiAlignSpec& spec) {
  const int n = static_cast<int>(boxes.size());
  const int row = feature.dim(0) * spec.out * spec.out;
  Tensor<T> out({n, row});
  for (int i = 0; i < n; ++i) {
    const Tensor<T> one = hrdet::rotated_roi_align(feature, boxes[i], spec);
    std::copy(one.data(), one.data() + row, out.data() + static_cast<std::size_t>(i) * row);
  }
  return out;
}

}  // namespace serial

#define HRDET_INSTANTIATE(T)                                                                                  \
  template Tensor<T> roi_align<T>(const Tensor<T>&, const HorizontalBox&, const RoiAlignSpec&);               \
  template Tensor<T> rotated_roi_align<T>(const Tensor<T>&, const OrientedBox&, const RoiAlignSpec&);         \
  template void rotated_roi_align_backward<T>(const OrientedBox&, const RoiAlignSpec&, const Tensor<T>&,      \
                                              Tensor<T>&);                                                    \
  template Tensor<T> rotated_roi_align_batch<T>(const Tensor<T>&, std::span<const OrientedBox>,               \
                                                const RoiAlignSpec&);                                         \
  template void rotated_roi_align_batch_backward<T>(std::span<const OrientedBox>, const RoiAlignSpec&,        \
                                                    const Tensor<T>&, Tensor<T>&);                            \
  template Tensor<T> serial::rotated_roi_align_batch<T>(const Tensor<T>&, std::span<const OrientedBox>,       \
                                                        const RoiAlignSpec&);

HRDET_INSTANTIATE(float)
HRDET_INSTANTIATE(double)

#undef HRDET_INSTANTIATE

}  // namespace hrdet
