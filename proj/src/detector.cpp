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

#include "hrdet/detector.hpp"

#include <stdexcept>

#include "hrdet/seed.hpp"

namespace hrdet {

void DetectorConfig::sync() {
  if (image_size <= 0 || image_size % 8 != 0) {
    throw std::invalid_argument("detector: image_size must be a positive multiple of 8");
  }
  rpn.levels = {{4, image_size / 4, image_size / 4}, {8, image_size / 8, image_size / 8}};
  rpn.image_width = image_size;
  rpn.image_height = image_size;
  heads.feature_channels = backbone.fpn_channels;
  heads.roi.stride = 4.0;
}

StepLosses& StepLosses::operator+=(const StepLosses& o) {
  loss_af += o.loss_af;
  loss_ab_reg += o.loss_ab_reg;
  loss_ab_cls += o.loss_ab_cls;
  loss_h2o += o.loss_h2o;
  loss_cls += o.loss_cls;
  loss_reg += o.loss_reg;
  af_positives += o.af_positives;
  af_clamped += o.af_clamped;
  ab_clamped += o.ab_clamped;
  anchor_maxiou_positives += o.anchor_maxiou_positives;
  num_proposals += o.num_proposals;
  return *this;
}

template <typename T>
Detector<T>::Detector(DetectorConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
  cfg_.sync();
  backbone = BackboneParams<T>(cfg_.backbone);
  rpn = RpnParams<T>(cfg_.backbone.fpn_channels, cfg_.rpn.oaconv_kernel);
  heads = HeadParams<T>(cfg_.heads);
  std::mt19937_64 rng(init_seed);
  backbone.init(rng);
  rpn.init(rng);
  heads.init(rng);
}

template <typename T>
Tensor<T> Detector<T>::normalize(const Tensor<T>& image) const {
  if (image.rank() != 3 || image.dim(0) != cfg_.backbone.in_channels || image.dim(1) != cfg_.image_size ||
      image.dim(2) != cfg_.image_size) {
    throw ShapeError("detector: expected image " + shape_string({cfg_.backbone.in_channels, cfg_.image_size,
                                                                 cfg_.image_size}) +
                     ", got " + shape_string(image.shape()));
  }
  Tensor<T> x = image;
  const T mean = static_cast<T>(cfg_.input_mean), inv = static_cast<T>(1.0 / cfg_.input_std);
  for (T& v : x.values()) v = (v - mean) * inv;
  return x;
}

template <typename T>
std::vector<Tensor<T>> Detector<T>::features(const Tensor<T>& image) const {
  return backbone_forward(backbone, normalize(image));
}

template <typename T>
StepLosses Detector<T>::accumulate_gradients(const Tensor<T>& image, std::span<const OrientedBox> gts,
                                             std::span<const int> labels, std::uint64_t seed) {
  if (gts.size() != labels.size()) throw std::invalid_argument("detector: gts/labels length mismatch");
  BackboneCache<T> cache;
  const std::vector<Tensor<T>> feats = backbone_forward(backbone, normalize(image), &cache);

  RpnTrainOutput<T> r = rpn_forward_train(feats, gts, cfg_.rpn, rpn, mix_seed(seed, 101));
  std::vector<Tensor<T>> grads = std::move(r.grad_features);
  const RcnnTrainOutput h =
      rcnn_forward_train(feats[0], r.proposals, gts, labels, cfg_.heads, heads, mix_seed(seed, 102), grads[0]);
  backbone_backward(backbone, cache, grads);

  StepLosses out;
  out.loss_af = r.loss_af;
  out.loss_ab_reg = r.loss_ab_reg;
  out.loss_ab_cls = r.loss_ab_cls;
  out.loss_h2o = h.loss_h2o;
  out.loss_cls = h.loss_cls;
  out.loss_reg = h.loss_reg;
  out.af_positives = r.af_positives;
  out.af_clamped = r.af_clamped;
  out.ab_clamped = r.ab_clamped;
  out.anchor_maxiou_positives = r.anchor_maxiou_positives;
  out.num_proposals = r.proposals.size();
  return out;
}

template <typename T>
std::vector<Proposal> Detector<T>::propose(const Tensor<T>& image) const {
  return rpn_forward_infer(features(image), cfg_.rpn, rpn);
}

template <typename T>
std::vector<Detection> Detector<T>::detect(const Tensor<T>& image) const {
  const std::vector<Tensor<T>> feats = features(image);
  const std::vector<Proposal> props = rpn_forward_infer(feats, cfg_.rpn, rpn);
  return hrdet::detect(feats[0], props, cfg_.heads, heads);
}

template <typename T>
void Detector<T>::visit(const ParamVisitor<T>& fn) {
  backbone.visit(fn);
  rpn.visit(fn);
  heads.visit(fn);
}

template <typename T>
void Detector<T>::zero_grad() {
  visit([](const std::string&, Tensor<T>&, Tensor<T>& g) { g.zero(); });
}

template <typename T>
std::vector<ParamRef<T>> Detector<T>::parameters() {
  std::vector<ParamRef<T>> out;
  visit([&](const std::string& name, Tensor<T>& v, Tensor<T>& g) { out.push_back({name, &v, &g}); });
  return out;
}

template <typename T>
std::size_t Detector<T>::num_parameters() {
  std::size_t n = 0;
  visit([&](const std::string&, Tensor<T>& v, Tensor<T>&) { n += v.size(); });
  return n;
}

template class Detector<float>;
template class Detector<double>;

}  // namespace hrdet
