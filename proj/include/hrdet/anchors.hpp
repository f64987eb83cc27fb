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
#include <span>
#include <vector>

#include "hrdet/geometry.hpp"

namespace hrdet {

struct FeatureLevelSpec {
  int stride = 8;
  int height = 1;
  int width = 1;
};

/// One preset horizontal anchor per feature-map location, per level.
/// Anchors of a level are row-major over (y, x); cell (i, j) is centered at
/// ((j + 0.5) * stride, (i + 0.5) * stride).
struct AnchorGrid {
  std::vector<FeatureLevelSpec> levels;
  std::vector<std::vector<HorizontalBox>> anchors;

  std::size_t total() const;
  /// All levels concatenated in level order.
  std::vector<HorizontalBox> flatten() const;
  /// Offset of each level inside flatten().
  std::vector<std::size_t> level_offsets() const;
};

AnchorGrid generate_anchors(std::span<const FeatureLevelSpec> levels, double scale, double ratio);

}  // namespace hrdet
