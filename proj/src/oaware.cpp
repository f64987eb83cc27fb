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

#include <cmath>
#include <vector>

namespace hrdet {

template <typename T>
Tensor<T> offset_field(std::span<const HorizontalBox> anchors, std::span<const double> thetas, int height,
                       int width, double stride, int k, double cell_offset) {
  const std::size_t locs = static_cast<std::size_t>(height) * width;
  if (anchors.size() != locs || thetas.size() != locs) throw ShapeError("offset_field: need one anchor and theta per location");
  if (k <= 0 || k % 2 == 0) throw ShapeError("offset_field: kernel size must be odd");
  const int half = (k - 1) / 2;
  Tensor<T> field({2 * k * k, height, width});
  for (int py = 0; py < height; ++py) {
    for (int px = 0; px < width; ++px) {
      const std::size_t l = static_cast<std::size_t>(py) * width + px;
      const HorizontalBox& a = anchors[l];
      const double c = std::cos(thetas[l]), s = std::sin(thetas[l]);
      for (int ry = -half; ry <= half; ++ry) {
        for (int rx = -half; rx <= half; ++rx) {
          const int t = (ry + half) * k + (rx + half);
          const double sx = a.w * rx / k, sy = a.h * ry / k;
          // Row vector times R^T: (sx, sy) -> (sx c - sy s, sx s + sy c).
          const double ux = sx * c - sy * s, uy = sx * s + sy * c;
          const double ox = (a.cx + ux) / stride - cell_offset - px - rx;
          const double oy = (a.cy + uy) / stride - cell_offset - py - ry;
          field.at(2 * t, py, px) = static_cast<T>(ox);
          field.at(2 * t + 1, py, px) = static_cast<T>(oy);
        }
      }
    }
  }
  return field;
}

namespace {

template <typename T>
void check_shapes(const Tensor<T>& x, const Tensor<T>& offsets, int k) {
  if (x.rank() != 3) throw ShapeError("oaconv: x must be (C, H, W)");
  if (offsets.rank() != 3 || offsets.dim(0) != 2 * k * k || offsets.dim(1) != x.dim(1) || offsets.dim(2) != x.dim(2)) {
    throw ShapeError("oaconv: offsets " + shape_string(offsets.shape()) + " do not match input " + shape_string(x.shape()));
  }
}

template <typename T>
void check_params(const Tensor<T>& x, const ConvParams<T>& p) {
  if (p.weight.rank() != 4 || p.in_channels() != x.dim(0)) throw ShapeError("oaconv: weight/input channel mismatch");
  if (p.stride != 1 || p.padding != (p.kernel() - 1) / 2) throw ShapeError("oaconv: requires stride 1 and same padding");
}

// Bilinear taps for every (tap, location), shared by all channels.
template <typename T>
std::vector<BilinearTap<T>> sample_taps(const Tensor<T>& offsets, int height, int width, int k) {
  const int half = (k - 1) / 2;
  const std::size_t locs = static_cast<std::size_t>(height) * width;
  std::vector<BilinearTap<T>> taps(static_cast<std::size_t>(k) * k * locs);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < k * k; ++t) {
    const int ry = t / k - half, rx = t % k - half;
    const T* ox = offsets.data() + static_cast<std::size_t>(2 * t) * locs;
    const T* oy = offsets.data() + static_cast<std::size_t>(2 * t + 1) * locs;
    for (int py = 0; py < height; ++py) {
      for (int px = 0; px < width; ++px) {
        const std::size_t l = static_cast<std::size_t>(py) * width + px;
        taps[t * locs + l] = BilinearTap<T>::at(static_cast<T>(px + rx) + ox[l], static_cast<T>(py + ry) + oy[l], height, width);
      }
    }
  }
  return taps;
}

template <typename T>
void fill_columns(const Tensor<T>& x, const std::vector<BilinearTap<T>>& taps, int k, T* col) {
  const int channels = x.dim(0), height = x.dim(1), width = x.dim(2);
  const std::size_t locs = static_cast<std::size_t>(height) * width;
  const int kk = k * k;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    const T* src = x.data() + c * locs;
    for (int t = 0; t < kk; ++t) {
      T* dst = col + (static_cast<std::size_t>(c) * kk + t) * locs;
      const BilinearTap<T>* tp = taps.data() + t * locs;
      for (std::size_t l = 0; l < locs; ++l) {
        const BilinearTap<T>& b = tp[l];
        const std::size_t base = static_cast<std::size_t>(b.y0) * width + b.x0;
        T v = 0;
        if (b.valid[0]) v += b.w[0] * src[base];
        if (b.valid[1]) v += b.w[1] * src[base + 1];
        if (b.valid[2]) v += b.w[2] * src[base + width];
        if (b.valid[3]) v += b.w[3] * src[base + width + 1];
        dst[l] = v;
      }
    }
  }
}

}  // namespace

template <typename T>
void deform_im2col(const Tensor<T>& x, const Tensor<T>& offsets, int k, T* col) {
  check_shapes(x, offsets, k);
  fill_columns(x, sample_taps(offsets, x.dim(1), x.dim(2), k), k, col);
}

namespace serial {
template <typename T>
void deform_im2col(const Tensor<T>& x, const Tensor<T>& offsets, int k, T* col) {
  check_shapes(x, offsets, k);
  const int channels = x.dim(0), height = x.dim(1), width = x.dim(2), half = (k - 1) / 2;
  const std::size_t locs = static_cast<std::size_t>(height) * width;
  for (int c = 0; c < channels; ++c) {
    for (int t = 0; t < k * k; ++t) {
      const int ry = t / k - half, rx = t % k - half;
      for (int py = 0; py < height; ++py) {
        for (int px = 0; px < width; ++px) {
          const std::size_t l = static_cast<std::size_t>(py) * width + px;
          const T sx = static_cast<T>(px + rx) + offsets.at(2 * t, py, px);
          const T sy = static_cast<T>(py + ry) + offsets.at(2 * t + 1, py, px);
          col[(static_cast<std::size_t>(c) * k * k + t) * locs + l] = bilinear_at(x.data() + c * locs, height, width, sx, sy);
        }
      }
    }
  }
}
}  // namespace serial

template <typename T>
Tensor<T> oaconv_forward(const Tensor<T>& x, const ConvParams<T>& params, const Tensor<T>& offsets) {
  check_params(x, params);
  const int k = params.kernel(), co = params.out_channels();
  check_shapes(x, offsets, k);
  const int height = x.dim(1), width = x.dim(2);
  const int locs = height * width, kdim = x.dim(0) * k * k;
  std::vector<T, Eigen::aligned_allocator<T>> col(static_cast<std::size_t>(kdim) * locs);
  deform_im2col(x, offsets, k, col.data());
  Tensor<T> y({co, height, width});
  for (int c = 0; c < co; ++c) std::fill(y.data() + static_cast<std::size_t>(c) * locs, y.data() + static_cast<std::size_t>(c + 1) * locs, params.bias[c]);
  matmul(params.weight.data(), col.data(), y.data(), co, kdim, locs, /*accumulate=*/true);
  return y;
}

template <typename T>
ConvGrads<T> oaconv_backward(const Tensor<T>& x, const ConvParams<T>& params, const Tensor<T>& offsets,
                             const Tensor<T>& upstream, bool need_grad_x) {
  check_params(x, params);
  const int k = params.kernel(), co = params.out_channels();
  check_shapes(x, offsets, k);
  const int channels = x.dim(0), height = x.dim(1), width = x.dim(2);
  const int locs = height * width, kk = k * k, kdim = channels * kk;
  if (upstream.shape() != std::vector<int>{co, height, width}) throw ShapeError("oaconv_backward: upstream shape");

  ConvGrads<T> g{Tensor<T>(need_grad_x ? x.shape() : std::vector<int>{0}), Tensor<T>(params.weight.shape()),
                 Tensor<T>(params.bias.shape())};
  for (int c = 0; c < co; ++c) {
    T acc = 0;
    const T* row = upstream.data() + static_cast<std::size_t>(c) * locs;
    for (int i = 0; i < locs; ++i) acc += row[i];
    g.grad_b[c] = acc;
  }
  const std::vector<BilinearTap<T>> taps = sample_taps(offsets, height, width, k);
  std::vector<T, Eigen::aligned_allocator<T>> col(static_cast<std::size_t>(kdim) * locs);
  fill_columns(x, taps, k, col.data());
  matmul_nt(upstream.data(), col.data(), g.grad_w.data(), co, locs, kdim);
  if (!need_grad_x) return g;

  matmul_tn(params.weight.data(), upstream.data(), col.data(), kdim, co, locs);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    T* dst = g.grad_x.data() + static_cast<std::size_t>(c) * locs;
    for (int t = 0; t < kk; ++t) {
      const T* src = col.data() + (static_cast<std::size_t>(c) * kk + t) * locs;
      const BilinearTap<T>* tp = taps.data() + static_cast<std::size_t>(t) * locs;
      for (int l = 0; l < locs; ++l) {
        const BilinearTap<T>& b = tp[l];
        const T up = src[l];
        const std::size_t base = static_cast<std::size_t>(b.y0) * width + b.x0;
        if (b.valid[0]) dst[base] += b.w[0] * up;
        if (b.valid[1]) dst[base + 1] += b.w[1] * up;
        if (b.valid[2]) dst[base + width] += b.w[2] * up;
        if (b.valid[3]) dst[base + width + 1] += b.w[3] * up;
      }
    }
  }
  return g;
}

#define HRDET_INSTANTIATE(T)                                                                                    \
  template Tensor<T> offset_field<T>(std::span<const HorizontalBox>, std::span<const double>, int, int, double, \
                                     int, double);                                                              \
  template Tensor<T> oaconv_forward<T>(const Tensor<T>&, const ConvParams<T>&, const Tensor<T>&);              \
  template ConvGrads<T> oaconv_backward<T>(const Tensor<T>&, const ConvParams<T>&, const Tensor<T>&,           \
                                           const Tensor<T>&, bool);                                             \
  template void deform_im2col<T>(const Tensor<T>&, const Tensor<T>&, int, T*);                                 \
  template void serial::deform_im2col<T>(const Tensor<T>&, const Tensor<T>&, int, T*);

HRDET_INSTANTIATE(float)
HRDET_INSTANTIATE(double)

#undef HRDET_INSTANTIATE

}  // namespace hrdet
