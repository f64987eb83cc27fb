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

#include "hrdet/backbone.hpp"

namespace hrdet {

template <typename T>
BackboneParams<T>::BackboneParams(const BackboneConfig& cfg) {
  const auto& c = cfg.channels;
  c1 = ConvLayer<T>(c[0], cfg.in_channels, 3, 1, 1);
  c2 = ConvLayer<T>(c[1], c[0], 3, 2, 1);
  c3a = ConvLayer<T>(c[2], c[1], 3, 2, 1);
  c3b = ConvLayer<T>(c[2], c[2], 3, 1, 1);
  c4a = ConvLayer<T>(c[3], c[2], 3, 2, 1);
  c4b = ConvLayer<T>(c[3], c[3], 3, 1, 1);
  lat3 = ConvLayer<T>(cfg.fpn_channels, c[2], 1, 1, 0);
  lat4 = ConvLayer<T>(cfg.fpn_channels, c[3], 1, 1, 0);
  out3 = ConvLayer<T>(cfg.fpn_channels, cfg.fpn_channels, 3, 1, 1);
  out4 = ConvLayer<T>(cfg.fpn_channels, cfg.fpn_channels, 3, 1, 1);
}

template <typename T>
void BackboneParams<T>::init(std::mt19937_64& rng) {
  for (ConvLayer<T>* l : {&c1, &c2, &c3a, &c3b, &c4a, &c4b}) l->init_kaiming(rng);
  // Linear layers: unit-gain fan-in init.
  for (ConvLayer<T>* l : {&lat3, &lat4, &out3, &out4}) {
    l->init_normal(std::sqrt(1.0 / (l->p.in_channels() * l->p.kernel() * l->p.kernel())), rng);
  }
}

template <typename T>
void BackboneParams<T>::visit(const ParamVisitor<T>& fn) {
  c1.visit("backbone.c1", fn);
  c2.visit("backbone.c2", fn);
  c3a.visit("backbone.c3a", fn);
  c3b.visit("backbone.c3b", fn);
  c4a.visit("backbone.c4a", fn);
  c4b.visit("backbone.c4b", fn);
  lat3.visit("fpn.lat3", fn);
  lat4.visit("fpn.lat4", fn);
  out3.visit("fpn.out3", fn);
  out4.visit("fpn.out4", fn);
}

template <typename T>
std::vector<Tensor<T>> backbone_forward(const BackboneParams<T>& p, const Tensor<T>& image, BackboneCache<T>* cache) {
  if (image.rank() != 3 || image.dim(1) % 8 != 0 || image.dim(2) % 8 != 0) {
    throw ShapeError("backbone: image must be (C, H, W) with H, W multiples of 8, got " + shape_string(image.shape()));
  }
  BackboneCache<T> local;
  BackboneCache<T>& c = cache ? *cache : local;
  c.x = image;
  c.z1 = conv2d(c.x, p.c1.p);
  c.a1 = relu(c.z1);
  c.z2 = conv2d(c.a1, p.c2.p);
  c.a2 = relu(c.z2);
  c.z3a = conv2d(c.a2, p.c3a.p);
  c.a3a = relu(c.z3a);
  c.z3b = conv2d(c.a3a, p.c3b.p);
  c.a3b = relu(c.z3b);
  c.z4a = conv2d(c.a3b, p.c4a.p);
  c.a4a = relu(c.z4a);
  c.z4b = conv2d(c.a4a, p.c4b.p);
  c.a4b = relu(c.z4b);
  c.m4 = conv2d(c.a4b, p.lat4.p);
  c.m3 = conv2d(c.a3b, p.lat3.p);
  c.m3 += upsample2x(c.m4);
  return {conv2d(c.m3, p.out3.p), conv2d(c.m4, p.out4.p)};
}

template <typename T>
void backbone_backward(BackboneParams<T>& p, const BackboneCache<T>& c, const std::vector<Tensor<T>>& grads) {
  if (grads.size() != 2) throw ShapeError("backbone_backward: expected gradients for two levels");
  ConvGrads<T> g3 = conv2d_backward(c.m3, p.out3.p, grads[0]);
  p.out3.accumulate(g3);
  ConvGrads<T> g4 = conv2d_backward(c.m4, p.out4.p, grads[1]);
  p.out4.accumulate(g4);
  Tensor<T> g_m4 = std::move(g4.grad_x);
  g_m4 += upsample2x_backward(g3.grad_x);

  ConvGrads<T> gl3 = conv2d_backward(c.a3b, p.lat3.p, g3.grad_x);
  p.lat3.accumulate(gl3);
  ConvGrads<T> gl4 = conv2d_backward(c.a4b, p.lat4.p, g_m4);
  p.lat4.accumulate(gl4);

  auto step = [](ConvLayer<T>& layer, const Tensor<T>& in, const Tensor<T>& z, const Tensor<T>& g_out, bool need_x) {
    ConvGrads<T> g = conv2d_backward(in, layer.p, relu_backward(z, g_out), need_x);
    layer.accumulate(g);
    return std::move(g.grad_x);
  };
  Tensor<T> g = step(p.c4b, c.a4a, c.z4b, gl4.grad_x, true);
  g = step(p.c4a, c.a3b, c.z4a, g, true);
  g += gl3.grad_x;
  g = step(p.c3b, c.a3a, c.z3b, g, true);
  g = step(p.c3a, c.a2, c.z3a, g, true);
  g = step(p.c2, c.a1, c.z2, g, true);
  step(p.c1, c.x, c.z1, g, false);
}

#define HRDET_INSTANTIATE(T)                                                                                  \
  template struct BackboneParams<T>;                                                                          \
  template std::vector<Tensor<T>> backbone_forward<T>(const BackboneParams<T>&, const Tensor<T>&,             \
                                                      BackboneCache<T>*);                                     \
  template void backbone_backward<T>(BackboneParams<T>&, const BackboneCache<T>&, const std::vector<Tensor<T>>&);

HRDET_INSTANTIATE(float)
HRDET_INSTANTIATE(double)

#undef HRDET_INSTANTIATE

}  // namespace hrdet
