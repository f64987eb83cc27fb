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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hrdet/geometry.hpp"

namespace hrdet {

/// Per-anchor label. Values >= 0 are positive matches naming a ground truth.
struct AssignResult {
  static constexpr int kNegative = -1;
  static constexpr int kIgnore = -2;

  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool positive(std::size_t i) const { return labels[i] >= 0; }
  bool negative(std::size_t i) const { return labels[i] == kNegative; }
  std::size_t num_positive() const;
  std::size_t num_negative() const;
};

struct SampleResult {
  std::vector<std::size_t> pos_indices;
  std::vector<std::size_t> neg_indices;
};

/// Center-region assignment. An anchor is positive for g when its center lies
/// inside g shrunk about its center to pos_ratio of its extents (closed
/// region); ignored when inside the (pos_ratio + ignore_margin) region of some
/// GT without being positive; negative otherwise. Overlapping positive regions
/// resolve to the GT of smallest area (lower index on ties).
AssignResult assign_ratio(std::span<const HorizontalBox> anchors, std::span<const HorizontalBox> rect_gts,
                          double pos_ratio = 0.3, double ignore_margin = 0.1);

/// Max-IoU assignment with forced best match. Each GT's highest-IoU anchor
/// (lowest index on ties) becomes positive for it when that IoU is > 0 and
/// >= min_pos_iou; a negative min_pos_iou means "use neg_thr".
AssignResult assign_maxiou(std::span<const HorizontalBox> anchors, std::span<const HorizontalBox> rect_gts,
                           double pos_thr = 0.7, double neg_thr = 0.3, double min_pos_iou = -1.0);

/// Uniform sampling without replacement; indices returned ascending.
SampleResult sample_balanced(const AssignResult& assign, std::size_t num_pos, std::size_t num_neg,
                             std::uint64_t rng_seed);

/// Pairwise positive labels of a sample, ordered as pos_indices.
std::vector<int> sampled_targets(const AssignResult& assign, const SampleResult& sample);

}  // namespace hrdet
