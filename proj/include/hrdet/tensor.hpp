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

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hrdet {

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense row-major array. Feature maps are (C, H, W) or (N, C, H, W).
/// Storage is over-aligned so vectorized kernels see identical layouts run to run.
template <typename T>
class Tensor {
 public:
  using Storage = std::vector<T, Eigen::aligned_allocator<T>>;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape, T fill = T(0)) : shape_(std::move(shape)) {
    for (int d : shape_) {
      if (d < 0) throw ShapeError("Tensor: negative extent");
    }
    data_.assign(count(shape_), fill);
  }

  static std::size_t count(const std::vector<int>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i < 0 ? rank() + i : i)); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return {data_.data(), data_.size()}; }
  std::span<const T> values() const { return {data_.data(), data_.size()}; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  /// Element (c, y, x) of a rank-3 tensor.
  T& at(int c, int y, int x) { return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x]; }
  const T& at(int c, int y, int x) const {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  void zero() { fill(T(0)); }

  Tensor reshaped(std::vector<int> shape) const {
    if (count(shape) != size()) throw ShapeError("Tensor::reshaped: element count mismatch");
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> t(shape_);
    std::transform(data_.begin(), data_.end(), t.data(), [](T v) { return static_cast<U>(v); });
    return t;
  }

  Tensor& operator+=(const Tensor& o) {
    require_same_shape(o, "Tensor::operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  void require_same_shape(const Tensor& o, const char* what) const {
    if (shape_ != o.shape_) throw ShapeError(std::string(what) + ": shape mismatch");
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(static_cast<double>(v)); });
  }

 private:
  std::vector<int> shape_;
  Storage data_;
};

std::string shape_string(const std::vector<int>& shape);

}  // namespace hrdet
