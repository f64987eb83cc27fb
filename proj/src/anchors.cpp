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

#include "hrdet/anchors.hpp"

#include <cmath>
#include <stdexcept>

namespace hrdet {

std::size_t AnchorGrid::total() const {
  std::size_t n = 0;
  for (const auto& a : anchors) n += a.size();
  return n;
}

std::vector<HorizontalBox> AnchorGrid::flatten() const {
  std::vector<HorizontalBox> out;
  out.reserve(total());
  for (const auto& a : anchors) out.insert(out.end(), a.begin(), a.end());
  return out;
}

std::vector<std::size_t> AnchorGrid::level_offsets() const {
  std::vector<std::size_t> offs;
  std::size_t acc = 0;
  for (const auto& a : anchors) {
    offs.push_back(acc);
    acc += a.size();
  }
  return offs;
}

AnchorGrid generate_anchors(std::span<const FeatureLevelSpec> levels, double scale, double ratio) {
  if (!(scale > 0) || !(ratio > 0)) throw std::invalid_argument("generate_anchors: scale and ratio must be positive");
  AnchorGrid grid;
  grid.levels.assign(levels.begin(), levels.end());
  const double sr = std::sqrt(ratio);
  for (const FeatureLevelSpec& lv : levels) {
    if (lv.stride <= 0 || lv.height < 1 || lv.width < 1) throw std::invalid_argument("generate_anchors: bad level");
    const double s = lv.stride;
    const double w = s * scale * sr, h = s * scale / sr;
    std::vector<HorizontalBox> boxes;
    boxes.reserve(static_cast<std::size_t>(lv.height) * lv.width);
    for (int i = 0; i < lv.height; ++i) {
      for (int j = 0; j < lv.width; ++j) boxes.push_back({(j + 0.5) * s, (i + 0.5) * s, w, h});
    }
    grid.anchors.push_back(std::move(boxes));
  }
  return grid;
}

}  // namespace hrdet
