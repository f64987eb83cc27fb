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

#include "hrdet/netcore.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

namespace hrdet {

std::string shape_string(const std::vector<int>& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ')';
  return os.str();
}

int conv_out_extent(int in, int k, int stride, int padding) {
  const int span = in + 2 * padding - k;
  if (span < 0 || stride <= 0) throw ShapeError("conv: kernel larger than padded input");
  return span / stride + 1;
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
inline void im2col_channel(const T* x, int c, int height, int width, int k, int stride, int padding, int ho,
                           int wo, T* col) {
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  const T* src = x + static_cast<std::size_t>(c) * height * width;
  for (int ki = 0; ki < k; ++ki) {
    for (int kj = 0; kj < k; ++kj) {
      T* dst = col + (static_cast<std::size_t>(c * k + ki) * k + kj) * plane;
      for (int oy = 0; oy < ho; ++oy) {
        const int iy = oy * stride - padding + ki;
        T* row = dst + static_cast<std::size_t>(oy) * wo;
        if (iy < 0 || iy >= height) {
          std::fill(row, row + wo, T(0));
          continue;
        }
        const T* srow = src + static_cast<std::size_t>(iy) * width;
        for (int ox = 0; ox < wo; ++ox) {
          const int ix = ox * stride - padding + kj;
          row[ox] = (ix >= 0 && ix < width) ? srow[ix] : T(0);
        }
      }
    }
  }
}

struct ConvGeometry {
  int batch, channels, height, width, ho, wo;
  bool batched;
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& x, const ConvParams<T>& p) {
  if (p.weight.rank() != 4 || p.weight.dim(2) != p.weight.dim(3)) throw ShapeError("conv2d: weight must be (Co, Ci, k, k)");
  if (p.bias.size() != static_cast<std::size_t>(p.weight.dim(0))) throw ShapeError("conv2d: bias length mismatch");
  ConvGeometry g{};
  if (x.rank() == 3) {
    g = {1, x.dim(0), x.dim(1), x.dim(2), 0, 0, false};
  } else if (x.rank() == 4) {
    g = {x.dim(0), x.dim(1), x.dim(2), x.dim(3), 0, 0, true};
  } else {
    throw ShapeError("conv2d: input must be rank 3 or 4, got " + shape_string(x.shape()));
  }
  if (g.channels != p.in_channels()) {
    throw ShapeError("conv2d: input has " + std::to_string(g.channels) + " channels, weight expects " +
                     std::to_string(p.in_channels()));
  }
  g.ho = conv_out_extent(g.height, p.kernel(), p.stride, p.padding);
  g.wo = conv_out_extent(g.width, p.kernel(), p.stride, p.padding);
  return g;
}

}  // namespace

template <typename T>
void im2col(const T* x, int channels, int height, int width, int k, int stride, int padding, T* col) {
  const int ho = conv_out_extent(height, k, stride, padding);
  const int wo = conv_out_extent(width, k, stride, padding);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) im2col_channel(x, c, height, width, k, stride, padding, ho, wo, col);
}

namespace serial {
template <typename T>
void im2col(const T* x, int channels, int height, int width, int k, int stride, int padding, T* col) {
  const int ho = conv_out_extent(height, k, stride, padding);
  const int wo = conv_out_extent(width, k, stride, padding);
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < channels; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        T* dst = col + (static_cast<std::size_t>(c * k + ki) * k + kj) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          for (int ox = 0; ox < wo; ++ox) {
            const int iy = oy * stride - padding + ki, ix = ox * stride - padding + kj;
            const bool in = iy >= 0 && iy < height && ix >= 0 && ix < width;
            dst[static_cast<std::size_t>(oy) * wo + ox] =
                in ? x[(static_cast<std::size_t>(c) * height + iy) * width + ix] : T(0);
          }
        }
      }
    }
  }
}
}  // namespace serial

template <typename T>
void col2im(const T* col, int channels, int height, int width, int k, int stride, int padding, T* x) {
  const int ho = conv_out_extent(height, k, stride, padding);
  const int wo = conv_out_extent(width, k, stride, padding);
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  // Each channel owns its output plane, so the per-channel order is fixed.
#pragma omp parallel for schedule(static)
  for (int c = 0; c < channels; ++c) {
    T* dst = x + static_cast<std::size_t>(c) * height * width;
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const T* src = col + (static_cast<std::size_t>(c * k + ki) * k + kj) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride - padding + ki;
          if (iy < 0 || iy >= height) continue;
          for (int ox = 0; ox < wo; ++ox) {
            const int ix = ox * stride - padding + kj;
            if (ix >= 0 && ix < width) dst[static_cast<std::size_t>(iy) * width + ix] += src[static_cast<std::size_t>(oy) * wo + ox];
          }
        }
      }
    }
  }
}

template <typename T>
void matmul(const T* a, const T* b, T* out, int rows, int inner, int cols, bool accumulate) {
  Eigen::Map<const RowMat<T>> A(a, rows, inner);
  Eigen::Map<const RowMat<T>> B(b, inner, cols);
  Eigen::Map<RowMat<T>> O(out, rows, cols);
  if (accumulate) {
    O.noalias() += A * B;
  } else {
    O.noalias() = A * B;
  }
}

template <typename T>
void matmul_tn(const T* a, const T* b, T* out, int rows, int inner, int cols, bool accumulate) {
  Eigen::Map<const RowMat<T>> A(a, inner, rows);
  Eigen::Map<const RowMat<T>> B(b, inner, cols);
  Eigen::Map<RowMat<T>> O(out, rows, cols);
  if (accumulate) {
    O.noalias() += A.transpose() * B;
  } else {
    O.noalias() = A.transpose() * B;
  }
}

template <typename T>
void matmul_nt(const T* a, const T* b, T* out, int rows, int inner, int cols, bool accumulate) {
  Eigen::Map<const RowMat<T>> A(a, rows, inner);
  Eigen::Map<const RowMat<T>> B(b, cols, inner);
  Eigen::Map<RowMat<T>> O(out, rows, cols);
  if (accumulate) {
    O.noalias() += A * B.transpose();
  } else {
    O.noalias() = A * B.transpose();
  }
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvParams<T>& p) {
  const ConvGeometry g = conv_geometry(x, p);
  const int co = p.out_channels(), k = p.kernel();
  const int kdim = g.channels * k * k;
  const int plane = g.ho * g.wo;
  Tensor<T> y = g.batched ? Tensor<T>({g.batch, co, g.ho, g.wo}) : Tensor<T>({co, g.ho, g.wo});
  std::vector<T, Eigen::aligned_allocator<T>> col(static_cast<std::size_t>(kdim) * plane);
  const std::size_t in_stride = static_cast<std::size_t>(g.channels) * g.height * g.width;
  const std::size_t out_stride = static_cast<std::size_t>(co) * plane;
  for (int n = 0; n < g.batch; ++n) {
    im2col(x.data() + n * in_stride, g.channels, g.height, g.width, k, p.stride, p.padding, col.data());
    T* out = y.data() + n * out_stride;
    for (int c = 0; c < co; ++c) std::fill(out + static_cast<std::size_t>(c) * plane, out + static_cast<std::size_t>(c + 1) * plane, p.bias[c]);
    matmul(p.weight.data(), col.data(), out, co, kdim, plane, /*accumulate=*/true);
  }
  return y;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& x, const ConvParams<T>& p, const Tensor<T>& upstream,
                             bool need_grad_x) {
  const ConvGeometry g = conv_geometry(x, p);
  const int co = p.out_channels(), k = p.kernel();
  const int kdim = g.channels * k * k;
  const int plane = g.ho * g.wo;
  const std::vector<int> expect =
      g.batched ? std::vector<int>{g.batch, co, g.ho, g.wo} : std::vector<int>{co, g.ho, g.wo};
  if (upstream.shape() != expect) throw ShapeError("conv2d_backward: upstream shape " + shape_string(upstream.shape()));
  ConvGrads<T> gr{Tensor<T>(need_grad_x ? x.shape() : std::vector<int>{0}), Tensor<T>(p.weight.shape()),
                  Tensor<T>(p.bias.shape())};
  std::vector<T, Eigen::aligned_allocator<T>> col(static_cast<std::size_t>(kdim) * plane);
  const std::size_t in_stride = static_cast<std::size_t>(g.channels) * g.height * g.width;
  const std::size_t out_stride = static_cast<std::size_t>(co) * plane;
  for (int n = 0; n < g.batch; ++n) {
    const T* gy = upstream.data() + n * out_stride;
    for (int c = 0; c < co; ++c) {
      T acc = 0;
      const T* row = gy + static_cast<std::size_t>(c) * plane;
      for (int i = 0; i < plane; ++i) acc += row[i];
      gr.grad_b[c] += acc;
    }
    im2col(x.data() + n * in_stride, g.channels, g.height, g.width, k, p.stride, p.padding, col.data());
    matmul_nt(gy, col.data(), gr.grad_w.data(), co, plane, kdim, /*accumulate=*/true);
    if (need_grad_x) {
      matmul_tn(p.weight.data(), gy, col.data(), kdim, co, plane);
      col2im(col.data(), g.channels, g.height, g.width, k, p.stride, p.padding, gr.grad_x.data() + n * in_stride);
    }
  }
  return gr;
}

template <typename T>
Tensor<T> fc(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || x.dim(1) != weight.dim(1) ||
      bias.size() != static_cast<std::size_t>(weight.dim(0))) {
    throw ShapeError("fc: x " + shape_string(x.shape()) + " vs weight " + shape_string(weight.shape()));
  }
  const int n = x.dim(0), d = x.dim(1), o = weight.dim(0);
  Tensor<T> y({n, o});
  for (int i = 0; i < n; ++i) std::copy(bias.data(), bias.data() + o, y.data() + static_cast<std::size_t>(i) * o);
  if (n > 0) matmul_nt(x.data(), weight.data(), y.data(), n, d, o, /*accumulate=*/true);
  return y;
}

template <typename T>
FcGrads<T> fc_backward(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& upstream, bool need_grad_x) {
  const int n = x.dim(0), d = x.dim(1), o = weight.dim(0);
  if (upstream.rank() != 2 || upstream.dim(0) != n || upstream.dim(1) != o) throw ShapeError("fc_backward: upstream shape");
  FcGrads<T> g{Tensor<T>(need_grad_x ? x.shape() : std::vector<int>{0}), Tensor<T>(weight.shape()), Tensor<T>({o})};
  if (n == 0) return g;
  for (int i = 0; i < n; ++i) {
    const T* row = upstream.data() + static_cast<std::size_t>(i) * o;
    for (int j = 0; j < o; ++j) g.grad_b[j] += row[j];
  }
  matmul_tn(upstream.data(), x.data(), g.grad_w.data(), o, n, d);
  if (need_grad_x) matmul(upstream.data(), weight.data(), g.grad_x.data(), n, o, d);
  return g;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (T& v : y.values()) v = v > T(0) ? v : T(0);
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& x, const Tensor<T>& upstream) {
  x.require_same_shape(upstream, "relu_backward");
  Tensor<T> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > T(0) ? upstream[i] : T(0);
  return g;
}

template <typename T>
T sigmoid(T x) {
  if (x >= 0) {
    const T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (T& v : y.values()) v = sigmoid(v);
  return y;
}

template <typename T>
LossGrad<T> bce_loss(std::span<const T> pred, std::span<const T> labels) {
  if (pred.size() != labels.size()) throw ShapeError("bce_loss: length mismatch");
  LossGrad<T> out{T(0), Tensor<T>({static_cast<int>(pred.size())})};
  if (pred.empty()) return out;
  const double n = static_cast<double>(pred.size());
  double acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = static_cast<double>(pred[i]);
    const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    const double y = static_cast<double>(labels[i]);
    acc -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
    const bool clamped = p < kProbClamp || p > 1.0 - kProbClamp;
    out.grad[i] = clamped ? T(0) : static_cast<T>(-(y / pc - (1.0 - y) / (1.0 - pc)) / n);
  }
  out.loss = static_cast<T>(acc / n);
  return out;
}

template <typename T>
LossGrad<T> bce_with_logits(std::span<const T> logits, std::span<const T> labels) {
  if (logits.size() != labels.size()) throw ShapeError("bce_with_logits: length mismatch");
  LossGrad<T> out{T(0), Tensor<T>({static_cast<int>(logits.size())})};
  if (logits.empty()) return out;
  const double n = static_cast<double>(logits.size());
  double acc = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = sigmoid(static_cast<double>(logits[i]));
    const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    const double y = static_cast<double>(labels[i]);
    acc -= y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc);
    const bool clamped = p < kProbClamp || p > 1.0 - kProbClamp;
    out.grad[i] = clamped ? T(0) : static_cast<T>((p - y) / n);
  }
  out.loss = static_cast<T>(acc / n);
  return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  const int n = logits.dim(0), k = logits.dim(1);
  Tensor<T> p(logits.shape());
  for (int i = 0; i < n; ++i) {
    const T* z = logits.data() + static_cast<std::size_t>(i) * k;
    T* out = p.data() + static_cast<std::size_t>(i) * k;
    const T zmax = *std::max_element(z, z + k);
    double sum = 0;
    for (int j = 0; j < k; ++j) sum += std::exp(static_cast<double>(z[j] - zmax));
    for (int j = 0; j < k; ++j) out[j] = static_cast<T>(std::exp(static_cast<double>(z[j] - zmax)) / sum);
  }
  return p;
}

template <typename T>
LossGrad<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || static_cast<std::size_t>(logits.dim(0)) != labels.size()) {
    throw ShapeError("softmax_cross_entropy: shape mismatch");
  }
  const int n = logits.dim(0), k = logits.dim(1);
  LossGrad<T> out{T(0), Tensor<T>(logits.shape())};
  if (n == 0) return out;
  double acc = 0;
  for (int i = 0; i < n; ++i) {
    const T* z = logits.data() + static_cast<std::size_t>(i) * k;
    T* g = out.grad.data() + static_cast<std::size_t>(i) * k;
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= k) throw std::out_of_range("softmax_cross_entropy: label out of range");
    const double zmax = static_cast<double>(*std::max_element(z, z + k));
    double sum = 0;
    for (int j = 0; j < k; ++j) sum += std::exp(static_cast<double>(z[j]) - zmax);
    const double lse = zmax + std::log(sum);
    acc += lse - static_cast<double>(z[y]);
    for (int j = 0; j < k; ++j) {
      const double pj = std::exp(static_cast<double>(z[j]) - lse);
      g[j] = static_cast<T>((pj - (j == y ? 1.0 : 0.0)) / n);
    }
  }
  out.loss = static_cast<T>(acc / n);
  return out;
}

template <typename T>
LossGrad<T> smooth_l1(const Tensor<T>& pred, const Tensor<T>& target, T beta, T normalizer) {
  pred.require_same_shape(target, "smooth_l1");
  LossGrad<T> out{T(0), Tensor<T>(pred.shape())};
  double acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i] - target[i]);
    const double ad = std::abs(d);
    if (ad < beta) {
      acc += 0.5 * d * d / beta;
      out.grad[i] = static_cast<T>(d / beta / normalizer);
    } else {
      acc += ad - 0.5 * beta;
      out.grad[i] = static_cast<T>((d > 0 ? 1.0 : -1.0) / normalizer);
    }
  }
  out.loss = static_cast<T>(acc / normalizer);
  return out;
}

template <typename T>
BilinearTap<T> BilinearTap<T>::at(T x, T y, int height, int width) {
  BilinearTap<T> t;
  if (!(x > T(-1) && x < T(width) && y > T(-1) && y < T(height))) return t;  // all weights zero
  const T fx = std::floor(x), fy = std::floor(y);
  t.x0 = static_cast<int>(fx);
  t.y0 = static_cast<int>(fy);
  t.lx = x - fx;
  t.ly = y - fy;
  t.w = {(T(1) - t.ly) * (T(1) - t.lx), (T(1) - t.ly) * t.lx, t.ly * (T(1) - t.lx), t.ly * t.lx};
  const bool x0 = t.x0 >= 0, x1 = t.x0 + 1 < width, y0 = t.y0 >= 0, y1 = t.y0 + 1 < height;
  t.valid = {y0 && x0, y0 && x1, y1 && x0, y1 && x1};
  return t;
}

template <typename T>
T bilinear_at(const T* plane, int height, int width, T x, T y) {
  const BilinearTap<T> t = BilinearTap<T>::at(x, y, height, width);
  T v = 0;
  if (t.valid[0]) v += t.w[0] * plane[static_cast<std::size_t>(t.y0) * width + t.x0];
  if (t.valid[1]) v += t.w[1] * plane[static_cast<std::size_t>(t.y0) * width + t.x0 + 1];
  if (t.valid[2]) v += t.w[2] * plane[static_cast<std::size_t>(t.y0 + 1) * width + t.x0];
  if (t.valid[3]) v += t.w[3] * plane[static_cast<std::size_t>(t.y0 + 1) * width + t.x0 + 1];
  return v;
}

template <typename T>
Tensor<T> bilinear_sample(const Tensor<T>& x, std::span<const SamplePoint<T>> points) {
  if (x.rank() != 3) throw ShapeError("bilinear_sample: x must be (C, H, W)");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<T> out({static_cast<int>(points.size()), c});
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t p = 0; p < points.size(); ++p) {
    for (int ch = 0; ch < c; ++ch) out[p * c + ch] = bilinear_at(x.data() + ch * plane, h, w, points[p].x, points[p].y);
  }
  return out;
}

template <typename T>
BilinearGrads<T> bilinear_sample_backward(const Tensor<T>& x, std::span<const SamplePoint<T>> points,
                                          const Tensor<T>& upstream) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (upstream.rank() != 2 || static_cast<std::size_t>(upstream.dim(0)) != points.size() || upstream.dim(1) != c) {
    throw ShapeError("bilinear_sample_backward: upstream shape");
  }
  BilinearGrads<T> g{Tensor<T>(x.shape()), std::vector<SamplePoint<T>>(points.size())};
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t p = 0; p < points.size(); ++p) {
    const BilinearTap<T> t = BilinearTap<T>::at(points[p].x, points[p].y, h, w);
    const std::array<std::size_t, 4> idx = {static_cast<std::size_t>(t.y0) * w + t.x0,
                                            static_cast<std::size_t>(t.y0) * w + t.x0 + 1,
                                            static_cast<std::size_t>(t.y0 + 1) * w + t.x0,
                                            static_cast<std::size_t>(t.y0 + 1) * w + t.x0 + 1};
    T gx = 0, gy = 0;
    for (int ch = 0; ch < c; ++ch) {
      const T up = upstream[p * c + ch];
      const T* src = x.data() + ch * plane;
      T* dst = g.grad_x.data() + ch * plane;
      std::array<T, 4> v{};
      for (int q = 0; q < 4; ++q) {
        if (!t.valid[q]) continue;
        v[q] = src[idx[q]];
        dst[idx[q]] += t.w[q] * up;
      }
      gx += up * ((T(1) - t.ly) * (v[1] - v[0]) + t.ly * (v[3] - v[2]));
      gy += up * ((T(1) - t.lx) * (v[2] - v[0]) + t.lx * (v[3] - v[1]));
    }
    g.grad_points[p] = {gx, gy};
  }
  return g;
}

template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x) {
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor<T> y({c, 2 * h, 2 * w});
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < 2 * h; ++i) {
      for (int j = 0; j < 2 * w; ++j) y.at(ch, i, j) = x.at(ch, i / 2, j / 2);
    }
  }
  return y;
}

template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& upstream) {
  const int c = upstream.dim(0), h = upstream.dim(1) / 2, w = upstream.dim(2) / 2;
  Tensor<T> g({c, h, w});
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < 2 * h; ++i) {
      for (int j = 0; j < 2 * w; ++j) g.at(ch, i / 2, j / 2) += upstream.at(ch, i, j);
    }
  }
  return g;
}

#define HRDET_INSTANTIATE(T)                                                                              \
  template void im2col<T>(const T*, int, int, int, int, int, int, T*);                                  \
  template void serial::im2col<T>(const T*, int, int, int, int, int, int, T*);                          \
  template void col2im<T>(const T*, int, int, int, int, int, int, T*);                                  \
  template void matmul<T>(const T*, const T*, T*, int, int, int, bool);                                 \
  template void matmul_tn<T>(const T*, const T*, T*, int, int, int, bool);                              \
  template void matmul_nt<T>(const T*, const T*, T*, int, int, int, bool);                              \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const ConvParams<T>&);                                 \
  template ConvGrads<T> conv2d_backward<T>(const Tensor<T>&, const ConvParams<T>&, const Tensor<T>&, bool); \
  template Tensor<T> fc<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template FcGrads<T> fc_backward<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, bool);        \
  template Tensor<T> relu<T>(const Tensor<T>&);                                                         \
  template Tensor<T> relu_backward<T>(const Tensor<T>&, const Tensor<T>&);                              \
  template T sigmoid<T>(T);                                                                             \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                                      \
  template LossGrad<T> bce_loss<T>(std::span<const T>, std::span<const T>);                             \
  template LossGrad<T> bce_with_logits<T>(std::span<const T>, std::span<const T>);                      \
  template LossGrad<T> softmax_cross_entropy<T>(const Tensor<T>&, std::span<const int>);                \
  template Tensor<T> softmax<T>(const Tensor<T>&);                                                      \
  template LossGrad<T> smooth_l1<T>(const Tensor<T>&, const Tensor<T>&, T, T);                          \
  template struct BilinearTap<T>;                                                                       \
  template T bilinear_at<T>(const T*, int, int, T, T);                                                  \
  template Tensor<T> bilinear_sample<T>(const Tensor<T>&, std::span<const SamplePoint<T>>);             \
  template BilinearGrads<T> bilinear_sample_backward<T>(const Tensor<T>&, std::span<const SamplePoint<T>>, \
                                                        const Tensor<T>&);                              \
  template Tensor<T> upsample2x<T>(const Tensor<T>&);                                                   \
  template Tensor<T> upsample2x_backward<T>(const Tensor<T>&);

HRDET_INSTANTIATE(float)
HRDET_INSTANTIATE(double)

#undef HRDET_INSTANTIATE

}  // namespace hrdet
