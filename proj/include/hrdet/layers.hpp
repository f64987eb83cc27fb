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

#include <cmath>
#include <functional>
#include <random>
#include <string>

#include "hrdet/netcore.hpp"

namespace hrdet {

/// Named view of one trainable tensor and its gradient accumulator.
template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;
};

template <typename T>
using ParamVisitor = std::function<void(const std::string&, Tensor<T>&, Tensor<T>&)>;

template <typename T>
void fill_normal(Tensor<T>& t, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, stddev);
  for (T& v : t.values()) v = static_cast<T>(nd(rng));
}

/// Convolution weights with gradient accumulators.
template <typename T>
struct ConvLayer {
  ConvParams<T> p;
  Tensor<T> grad_w, grad_b;

  ConvLayer() = default;
  ConvLayer(int out_ch, int in_ch, int k, int stride, int padding)
      : p{Tensor<T>({out_ch, in_ch, k, k}), Tensor<T>({out_ch}), stride, padding},
        grad_w({out_ch, in_ch, k, k}),
        grad_b({out_ch}) {}

  /// He-normal weights, zero bias.
  void init_kaiming(std::mt19937_64& rng) {
    fill_normal(p.weight, std::sqrt(2.0 / (p.in_channels() * p.kernel() * p.kernel())), rng);
    p.bias.zero();
  }
  void init_normal(double stddev, std::mt19937_64& rng, double bias = 0.0) {
    fill_normal(p.weight, stddev, rng);
    p.bias.fill(static_cast<T>(bias));
  }
  void accumulate(const ConvGrads<T>& g) {
    grad_w += g.grad_w;
    grad_b += g.grad_b;
  }
  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn(prefix + ".weight", p.weight, grad_w);
    fn(prefix + ".bias", p.bias, grad_b);
  }
};

/// Fully connected layer y = x W^T + b.
template <typename T>
struct FcLayer {
  Tensor<T> w, b, grad_w, grad_b;

  FcLayer() = default;
  FcLayer(int out, int in) : w({out, in}), b({out}), grad_w({out, in}), grad_b({out}) {}

  int in_features() const { return w.dim(1); }
  int out_features() const { return w.dim(0); }

  void init_kaiming(std::mt19937_64& rng) {
    fill_normal(w, std::sqrt(2.0 / in_features()), rng);
    b.zero();
  }
  void init_normal(double stddev, std::mt19937_64& rng) {
    fill_normal(w, stddev, rng);
    b.zero();
  }
  Tensor<T> forward(const Tensor<T>& x) const { return fc(x, w, b); }
  /// Accumulates weight gradients and returns dL/dx.
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& upstream, bool need_grad_x = true) {
    FcGrads<T> g = fc_backward(x, w, upstream, need_grad_x);
    grad_w += g.grad_w;
    grad_b += g.grad_b;
    return std::move(g.grad_x);
  }
  void visit(const std::string& prefix, const ParamVisitor<T>& fn) {
    fn(prefix + ".weight", w, grad_w);
    fn(prefix + ".bias", b, grad_b);
  }
};

}  // namespace hrdet
