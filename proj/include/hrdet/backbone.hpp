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
#include <vector>

#include "hrdet/layers.hpp"

namespace hrdet {

/// Four conv stages (stride 1, 2, 2, 2; ReLU after every conv) and a
/// two-level pyramid at strides 4 and 8 built from 1x1 laterals with
/// nearest upsample-add and a 3x3 output conv per level.
struct BackboneConfig {
  int in_channels = 1;
  std::array<int, 4> channels{16, 32, 64, 64};
  int fpn_channels = 32;
};

template <typename T>
struct BackboneParams {
  ConvLayer<T> c1, c2, c3a, c3b, c4a, c4b, lat3, lat4, out3, out4;

  BackboneParams() = default;
  explicit BackboneParams(const BackboneConfig& cfg);
  void init(std::mt19937_64& rng);
  void visit(const ParamVisitor<T>& fn);
};

template <typename T>
struct BackboneCache {
  Tensor<T> x, z1, a1, z2, a2, z3a, a3a, z3b, a3b, z4a, a4a, z4b, a4b, m3, m4;
};

/// image (C, H, W) -> {P at stride 4, P at stride 8}. H and W must be multiples of 8.
template <typename T>
std::vector<Tensor<T>> backbone_forward(const BackboneParams<T>& params, const Tensor<T>& image,
                                        BackboneCache<T>* cache = nullptr);

/// Accumulates parameter gradients given dL/dP for both levels.
template <typename T>
void backbone_backward(BackboneParams<T>& params, const BackboneCache<T>& cache, const std::vector<Tensor<T>>& grads);

}  // namespace hrdet
