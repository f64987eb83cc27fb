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
#include <cstdint>
#include <span>
#include <vector>

#include "hrdet/anchors.hpp"
#include "hrdet/assign.hpp"
#include "hrdet/coders.hpp"
#include "hrdet/layers.hpp"

namespace hrdet {

struct LossConfig {
  double w_af = 7.0;
  double w_ab = 7.0;
  double iou_eps = 1e-6;
};

struct RpnConfig {
  std::vector<FeatureLevelSpec> levels = {{4, 32, 32}, {8, 16, 16}};
  double image_width = 128;
  double image_height = 128;
  double anchor_scale = 4.0;
  double anchor_ratio = 1.0;
  double ratio_pos = 0.3;
  double ratio_ignore = 0.1;
  double maxiou_pos = 0.7;
  double maxiou_neg = 0.3;
  std::size_t num_pos = 256;
  std::size_t num_neg = 256;
  LossConfig loss;
  int pre_nms_top_k = 1000;
  int post_nms_top_k = 500;
  double nms_iou = 0.7;
  /// Proposals narrower or shorter than this after clipping are dropped.
  double min_proposal_size = 1.0;
  int oaconv_kernel = 3;
  bool use_af_head = true;
  bool use_ab_head = true;
  bool use_oaconv = true;
};

struct Proposal {
  HorizontalBox box;
  double objectness = 0;
};

/// weight * -ln(max(IoU, eps)) and its gradient w.r.t. pred (cx, cy, w, h).
/// The gradient is zero where the clamp is active.
struct IouLoss {
  double loss = 0;
  std::array<double, 4> grad{};
  bool clamped = false;
};
IouLoss iou_loss(const HorizontalBox& pred, const HorizontalBox& target, double weight, double eps = 1e-6);

/// iou_loss of decode_h(anchor, delta) with the gradient taken w.r.t. delta.
IouLoss iou_loss_delta(const HorizontalBox& anchor, const Delta4& delta, const HorizontalBox& target, double weight,
                       double eps = 1e-6);

/// Regression-only loss over sampled positives: mean of iou_loss_delta.
struct RegressionLoss {
  double loss = 0;
  std::vector<Delta4> grad;  // one per anchor, zero outside the sample
  std::size_t num_pos = 0;
  std::size_t num_clamped = 0;
  AssignResult assign;
};

/// Anchor-free stage loss: ratio assignment against rectangularized GTs,
/// balanced sampling, weight w_af.
RegressionLoss af_regression_loss(std::span<const HorizontalBox> anchors, std::span<const Delta4> deltas,
                                  std::span<const HorizontalBox> rect_gts, const RpnConfig& cfg, std::uint64_t seed);

/// Clip to the image, drop tiny boxes, take pre-NMS top-k by score (stable),
/// horizontal NMS, then post-NMS top-k.
std::vector<Proposal> select_proposals(std::span<const HorizontalBox> boxes, std::span<const double> scores,
                                       const RpnConfig& cfg);

/// Angle handed to the offset field for a matched GT: the representation of
/// the box with theta in [-pi/4, pi/4).
double near_axis_theta(const OrientedBox& gt);

template <typename T>
struct RpnParams {
  ConvLayer<T> af_conv, af_reg, ab_conv, ab_reg, ab_obj;

  RpnParams() = default;
  RpnParams(int channels, int k);
  void init(std::mt19937_64& rng);
  void visit(const ParamVisitor<T>& fn);
};

template <typename T>
struct RpnTrainOutput {
  double loss_af = 0;
  double loss_ab_reg = 0;
  double loss_ab_cls = 0;
  std::vector<Proposal> proposals;
  /// Ratio-based positives (before sampling) and, for comparison, Max-IoU
  /// positives against the undecoded anchors.
  std::size_t af_positives = 0;
  std::size_t anchor_maxiou_positives = 0;
  std::size_t ab_positives = 0;
  /// Sampled positives whose IoU loss sits at the eps floor (no gradient).
  std::size_t af_clamped = 0;
  std::size_t ab_clamped = 0;
  std::vector<Tensor<T>> grad_features;

  double loss_ab() const { return loss_ab_reg + loss_ab_cls; }
  double loss_rpn() const { return loss_af + loss_ab(); }
};

/// One image. features are (C, H, W) per level; parameter gradients are
/// accumulated into params.
template <typename T>
RpnTrainOutput<T> rpn_forward_train(const std::vector<Tensor<T>>& features, std::span<const OrientedBox> gts,
                                    const RpnConfig& cfg, RpnParams<T>& params, std::uint64_t seed);

/// Inference: zero orientation in the offset field, no losses.
template <typename T>
std::vector<Proposal> rpn_forward_infer(const std::vector<Tensor<T>>& features, const RpnConfig& cfg,
                                        const RpnParams<T>& params);

}  // namespace hrdet
