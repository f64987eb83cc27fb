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

#include "hrdet/coders.hpp"
#include "hrdet/layers.hpp"
#include "hrdet/roi_align.hpp"
#include "hrdet/rpn.hpp"

namespace hrdet {

struct Detection {
  OrientedBox box;
  double score = 0;
  int class_id = 0;
};

struct HeadsConfig {
  int num_classes = 3;
  int feature_channels = 32;
  int hidden = 256;
  RoiAlignSpec roi{7, 4.0, 2};
  /// Regression targets are divided by these before the loss.
  std::array<double, 5> h2o_stds{0.1, 0.1, 0.2, 0.2, 0.1};
  std::array<double, 5> obb_stds{0.05, 0.05, 0.1, 0.1, 0.05};
  double h2o_pos_iou = 0.5;
  double h2o_neg_iou = 0.5;
  double obb_pos_iou = 0.5;
  std::size_t num_samples = 64;
  double pos_fraction = 0.25;
  double smooth_l1_beta = 1.0 / 9.0;
  double score_thr = 0.05;
  double nms_iou = 0.1;
  int max_detections = 100;
};

/// Horizontal-to-oriented transform (two fc layers) and the oriented box
/// head (two shared fc layers, then classification over C + 1 and
/// class-specific Delta5 regression).
template <typename T>
struct HeadParams {
  FcLayer<T> h2o_fc1, h2o_fc2, obb_fc1, obb_fc2, obb_cls, obb_reg;

  HeadParams() = default;
  explicit HeadParams(const HeadsConfig& cfg);
  void init(std::mt19937_64& rng);
  void visit(const ParamVisitor<T>& fn);
};

/// Per-RoI pooled features (N, C*out*out) -> normalized Delta5 (N, 5).
template <typename T>
Tensor<T> h2o_forward(const HeadParams<T>& params, const Tensor<T>& roi_feats);

/// decode_o of each proposal with delta * stds.
template <typename T>
std::vector<OrientedBox> h2o_decode(std::span<const HorizontalBox> proposals, const Tensor<T>& deltas,
                                    const std::array<double, 5>& stds);

template <typename T>
struct ObbOutput {
  Tensor<T> logits;  // (N, C + 1); column 0 is background
  Tensor<T> reg;     // (N, 5 C), normalized Delta5 per class
};

template <typename T>
ObbOutput<T> obb_forward(const HeadParams<T>& params, const Tensor<T>& roi_feats);

/// Horizontal box as a rotated-pooling region with theta = 0 (not canonicalized,
/// so the sampling grid follows the x and y axes).
OrientedBox horizontal_region(const HorizontalBox& b);

struct RcnnTrainOutput {
  double loss_h2o = 0;
  double loss_cls = 0;
  double loss_reg = 0;
  std::size_t h2o_positives = 0;
  std::size_t obb_positives = 0;
};

/// One image. Proposals are treated as constants; gradients of the pooled
/// features are accumulated into grad_feature, parameter gradients into params.
template <typename T>
RcnnTrainOutput rcnn_forward_train(const Tensor<T>& feature, std::span<const Proposal> proposals,
                                   std::span<const OrientedBox> gts, std::span<const int> labels,
                                   const HeadsConfig& cfg, HeadParams<T>& params, std::uint64_t seed,
                                   Tensor<T>& grad_feature);

/// Score threshold, per-class rotated NMS, then the top max_detections by
/// score (stable). Boxes are canonicalized.
std::vector<Detection> finalize_detections(std::vector<Detection> candidates, const HeadsConfig& cfg);

template <typename T>
std::vector<Detection> detect(const Tensor<T>& feature, std::span<const Proposal> proposals, const HeadsConfig& cfg,
                              const HeadParams<T>& params);

}  // namespace hrdet
