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

#include "hrdet/coders.hpp"

#include <algorithm>

namespace hrdet {

namespace {

double clamp_log(double v) { return std::clamp(v, -kMaxLogRatio, kMaxLogRatio); }

// Picks the representation of b with theta in [-pi/4, pi/4) relative to ref_theta.
OrientedBox near_representation(const OrientedBox& b, double ref_theta) {
  double d = wrap_half_pi(b.theta - ref_theta);
  OrientedBox r = b;
  if (d >= 0.25 * kPi) {
    std::swap(r.w, r.h);
    d -= 0.5 * kPi;
  } else if (d < -0.25 * kPi) {
    std::swap(r.w, r.h);
    d += 0.5 * kPi;
  }
  r.theta = ref_theta + d;
  return r;
}

}  // namespace

Delta4 encode_h(const HorizontalBox& anchor, const HorizontalBox& target) {
  return {(target.cx - anchor.cx) / anchor.w, (target.cy - anchor.cy) / anchor.h,
          std::log(target.w / anchor.w), std::log(target.h / anchor.h)};
}

HorizontalBox decode_h(const HorizontalBox& anchor, const Delta4& delta) {
  return {delta.dx * anchor.w + anchor.cx, delta.dy * anchor.h + anchor.cy,
          anchor.w * std::exp(clamp_log(delta.dw)), anchor.h * std::exp(clamp_log(delta.dh))};
}

Delta5 encode_o(const HorizontalBox& reference, const OrientedBox& target) {
  const OrientedBox t = near_representation(target, 0.0);
  return {(t.cx - reference.cx) / reference.w, (t.cy - reference.cy) / reference.h,
          std::log(t.w / reference.w), std::log(t.h / reference.h), t.theta};
}

OrientedBox decode_o(const HorizontalBox& reference, const Delta5& delta) {
  OrientedBox b{delta.dx * reference.w + reference.cx, delta.dy * reference.h + reference.cy,
                reference.w * std::exp(clamp_log(delta.dw)), reference.h * std::exp(clamp_log(delta.dh)),
                delta.dtheta};
  return canonicalize(b);
}

Delta5 encode_obb(const OrientedBox& reference, const OrientedBox& target) {
  const OrientedBox t = near_representation(target, reference.theta);
  const double c = std::cos(reference.theta), s = std::sin(reference.theta);
  const double gx = t.cx - reference.cx, gy = t.cy - reference.cy;
  return {(c * gx + s * gy) / reference.w, (-s * gx + c * gy) / reference.h,
          std::log(t.w / reference.w), std::log(t.h / reference.h), t.theta - reference.theta};
}

OrientedBox decode_obb(const OrientedBox& reference, const Delta5& delta) {
  const double c = std::cos(reference.theta), s = std::sin(reference.theta);
  const double lx = delta.dx * reference.w, ly = delta.dy * reference.h;
  OrientedBox b{reference.cx + c * lx - s * ly, reference.cy + s * lx + c * ly,
                reference.w * std::exp(clamp_log(delta.dw)), reference.h * std::exp(clamp_log(delta.dh)),
                reference.theta + delta.dtheta};
  return canonicalize(b);
}

}  // namespace hrdet
