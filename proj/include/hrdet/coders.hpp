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

#include "hrdet/geometry.hpp"

namespace hrdet {

/// Horizontal regression offsets: center shift over reference size, log size ratio.
struct Delta4 {
  double dx = 0, dy = 0, dw = 0, dh = 0;
  bool operator==(const Delta4&) const = default;
};

/// Delta4 plus a raw angle offset in radians.
struct Delta5 {
  double dx = 0, dy = 0, dw = 0, dh = 0, dtheta = 0;
  bool operator==(const Delta5&) const = default;
};

/// Bound on |dw|, |dh| before exponentiation.
inline const double kMaxLogRatio = std::log(1000.0 / 16.0);

Delta4 encode_h(const HorizontalBox& anchor, const HorizontalBox& target);
HorizontalBox decode_h(const HorizontalBox& anchor, const Delta4& delta);

/// Horizontal reference -> oriented target. The reference has theta = 0; the
/// target is expressed in whichever of its two equivalent (w, h, theta)
/// forms has theta in [-pi/4, pi/4), so w and h pair with the reference's
/// horizontal and vertical extents.
Delta5 encode_o(const HorizontalBox& reference, const OrientedBox& target);
/// Inverse of encode_o; the result is canonicalized.
OrientedBox decode_o(const HorizontalBox& reference, const Delta5& delta);

/// Oriented reference -> oriented target, offsets measured in the reference
/// frame. dtheta is in [-pi/4, pi/4); w/h swap accordingly.
Delta5 encode_obb(const OrientedBox& reference, const OrientedBox& target);
OrientedBox decode_obb(const OrientedBox& reference, const Delta5& delta);

}  // namespace hrdet
