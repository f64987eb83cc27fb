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

#include <cstdint>
#include <span>
#include <vector>

#include "hrdet/backbone.hpp"
#include "hrdet/heads.hpp"
#include "hrdet/rpn.hpp"

namespace hrdet {

struct DetectorConfig {
  int image_size = 128;
  BackboneConfig backbone;
  RpnConfig rpn;
  HeadsConfig heads;
  /// Pixel values in [0, 1] are mapped to (v - mean) / std.
  double input_mean = 0.4;
  double input_std = 0.25;

  /// Derives the feature-level grid, image extent and head feature width
  /// from image_size and the backbone. Call after editing either.
  void sync();
};

struct StepLosses {
  double loss_af = 0;
  double loss_ab_reg = 0;
  double loss_ab_cls = 0;
  double loss_h2o = 0;
  double loss_cls = 0;
  double loss_reg = 0;
  std::size_t af_positives = 0;
  std::size_t af_clamped = 0;
  std::size_t ab_clamped = 0;
  std::size_t anchor_maxiou_positives = 0;
  std::size_t num_proposals = 0;

  double loss_rpn() const { return loss_af + loss_ab_reg + loss_ab_cls; }
  double total() const { return loss_rpn() + loss_h2o + loss_cls + loss_reg; }
  StepLosses& operator+=(const StepLosses& o);
};

/// Backbone, pyramid, two-stage RPN and the R-CNN heads.
template <typename T>
class Detector {
 public:
  Detector() = default;
  Detector(DetectorConfig cfg, std::uint64_t init_seed);

  const DetectorConfig& config() const { return cfg_; }
  DetectorConfig& mutable_config() { return cfg_; }

  /// image: (1, H, W) with values in [0, 1]. Adds this image's gradients to
  /// the accumulators and returns its losses.
  StepLosses accumulate_gradients(const Tensor<T>& image, std::span<const OrientedBox> gts,
                                  std::span<const int> labels, std::uint64_t seed);

  std::vector<Tensor<T>> features(const Tensor<T>& image) const;
  std::vector<Proposal> propose(const Tensor<T>& image) const;
  std::vector<Detection> detect(const Tensor<T>& image) const;

  void zero_grad();
  void visit(const ParamVisitor<T>& fn);
  std::vector<ParamRef<T>> parameters();
  std::size_t num_parameters();

  BackboneParams<T> backbone;
  RpnParams<T> rpn;
  HeadParams<T> heads;

 private:
  Tensor<T> normalize(const Tensor<T>& image) const;
  DetectorConfig cfg_;
};

}  // namespace hrdet
