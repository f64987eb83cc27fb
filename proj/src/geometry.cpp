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

#include "hrdet/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

namespace hrdet {

Mat2 rotation_matrix(double alpha) {
  const double c = std::cos(alpha), s = std::sin(alpha);
  return {{{c, -s}, {s, c}}};
}

double wrap_half_pi(double theta) {
  double t = theta - kPi * std::floor((theta + 0.5 * kPi) / kPi);
  // floor() can land exactly on the open end after rounding.
  if (t >= 0.5 * kPi) t -= kPi;
  if (t < -0.5 * kPi) t += kPi;
  return t;
}

OrientedBox canonicalize(const OrientedBox& b) {
  OrientedBox out = b;
  if (out.w < out.h) {
    std::swap(out.w, out.h);
    out.theta += 0.5 * kPi;
  }
  out.theta = wrap_half_pi(out.theta);
  return out;
}

Polygon4 obb_to_polygon(const OrientedBox& b) {
  const double c = std::cos(b.theta), s = std::sin(b.theta);
  const double hw = 0.5 * b.w, hh = 0.5 * b.h;
  const std::array<Point2, 4> local = {{{hw, hh}, {-hw, hh}, {-hw, -hh}, {hw, -hh}}};
  Polygon4 poly;
  for (int i = 0; i < 4; ++i) {
    poly[i] = {b.cx + c * local[i].x - s * local[i].y, b.cy + s * local[i].x + c * local[i].y};
  }
  return poly;
}

OrientedBox polygon_to_obb(const Polygon4& poly) {
  OrientedBox b;
  b.cx = 0.25 * (poly[0].x + poly[1].x + poly[2].x + poly[3].x);
  b.cy = 0.25 * (poly[0].y + poly[1].y + poly[2].y + poly[3].y);
  const Point2 e0 = poly[0] - poly[1];
  const Point2 e1 = poly[1] - poly[2];
  b.w = std::hypot(e0.x, e0.y);
  b.h = std::hypot(e1.x, e1.y);
  b.theta = std::atan2(e0.y, e0.x);
  return canonicalize(b);
}

double signed_area(std::span<const Point2> poly) {
  const std::size_t n = poly.size();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += cross(poly[i], poly[(i + 1) % n]);
  return 0.5 * acc;
}

std::vector<Point2> clip_convex(std::span<const Point2> subject, std::span<const Point2> clip) {
  std::vector<Point2> out(subject.begin(), subject.end());
  std::vector<Point2> in;
  in.reserve(8);
  out.reserve(8);
  const std::size_t m = clip.size();
  for (std::size_t e = 0; e < m && !out.empty(); ++e) {
    const Point2 a = clip[e], b = clip[(e + 1) % m];
    const Point2 edge = b - a;
    in.swap(out);
    out.clear();
    const std::size_t n = in.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2& p = in[i];
      const Point2& q = in[(i + 1) % n];
      const double sp = cross(edge, p - a);
      const double sq = cross(edge, q - a);
      if (sp >= 0) out.push_back(p);
      if ((sp >= 0) != (sq >= 0)) {
        const double t = sp / (sp - sq);
        out.push_back(p + (q - p) * t);
      }
    }
  }
  return out;
}

namespace {

// Strict weak order on box parameters; used to make the clipping order
// independent of argument order.
bool param_less(const OrientedBox& a, const OrientedBox& b) {
  return std::tie(a.cx, a.cy, a.w, a.h, a.theta) < std::tie(b.cx, b.cy, b.w, b.h, b.theta);
}

double intersection_area_ordered(const OrientedBox& a, const OrientedBox& b) {
  const double dx = a.cx - b.cx, dy = a.cy - b.cy;
  const double reach = 0.5 * (std::hypot(a.w, a.h) + std::hypot(b.w, b.h));
  if (dx * dx + dy * dy > reach * reach) return 0.0;
  const Polygon4 pa = obb_to_polygon(a);
  const Polygon4 pb = obb_to_polygon(b);
  const std::vector<Point2> inter = clip_convex(pa, pb);
  if (inter.size() < 3) return 0.0;
  const double area = signed_area(inter);
  return area < kMinArea ? 0.0 : area;
}

}  // namespace

double rotated_intersection_area(const OrientedBox& a, const OrientedBox& b) {
  return param_less(b, a) ? intersection_area_ordered(b, a) : intersection_area_ordered(a, b);
}

double rotated_iou(const OrientedBox& a, const OrientedBox& b) {
  const bool swap = param_less(b, a);
  const OrientedBox& first = swap ? b : a;
  const OrientedBox& second = swap ? a : b;
  const double inter = intersection_area_ordered(first, second);
  if (inter <= 0.0) return 0.0;
  const double uni = first.area() + second.area() - inter;
  if (uni <= kMinArea) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double horizontal_iou(const HorizontalBox& a, const HorizontalBox& b) {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  if (inter < kMinArea) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

HorizontalBox rectangularize(const OrientedBox& b) {
  const double c = std::abs(std::cos(b.theta)), s = std::abs(std::sin(b.theta));
  return {b.cx, b.cy, b.w * c + b.h * s, b.w * s + b.h * c};
}

OrientedBox to_oriented(const HorizontalBox& b) {
  return canonicalize({b.cx, b.cy, b.w, b.h, 0.0});
}

std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(),
            [](const Point2& a, const Point2& b) { return std::tie(a.x, a.y) < std::tie(b.x, b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point2& p : pts) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    const Point2& p = pts[i];
    while (k >= lower && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0) --k;
    hull[k++] = p;
  }
  hull.resize(k - 1);
  return hull;
}

OrientedBox min_area_rect(std::span<const Point2> poly) {
  for (const Point2& p : poly) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw GeometryError("min_area_rect: non-finite vertex");
  }
  const std::vector<Point2> hull = convex_hull({poly.begin(), poly.end()});
  if (hull.size() < 3 || signed_area(hull) < kMinArea) {
    throw GeometryError("min_area_rect: degenerate polygon (collinear or repeated vertices)");
  }
  double best_area = std::numeric_limits<double>::infinity();
  OrientedBox best;
  const std::size_t n = hull.size();
  for (std::size_t i = 0; i < n; ++i) {
    Point2 u = hull[(i + 1) % n] - hull[i];
    const double len = std::hypot(u.x, u.y);
    if (len <= 0) continue;
    u = u * (1.0 / len);
    const Point2 v{-u.y, u.x};
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    for (const Point2& p : hull) {
      const double pu = dot(p, u), pv = dot(p, v);
      umin = std::min(umin, pu);
      umax = std::max(umax, pu);
      vmin = std::min(vmin, pv);
      vmax = std::max(vmax, pv);
    }
    const double area = (umax - umin) * (vmax - vmin);
    if (area < best_area) {
      best_area = area;
      const Point2 c = u * (0.5 * (umin + umax)) + v * (0.5 * (vmin + vmax));
      best = {c.x, c.y, umax - umin, vmax - vmin, std::atan2(u.y, u.x)};
    }
  }
  return canonicalize(best);
}

namespace {

std::vector<std::size_t> score_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

template <typename Box, typename IouFn>
std::vector<std::size_t> greedy_nms(std::span<const Box> boxes, std::span<const double> scores,
                                    double iou_thr, IouFn iou) {
  if (boxes.size() != scores.size()) throw std::invalid_argument("nms: boxes/scores length mismatch");
  const std::vector<std::size_t> order = score_order(scores);
  std::vector<char> suppressed(boxes.size(), 0);
  std::vector<std::size_t> keep;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (suppressed[i]) continue;
    keep.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (!suppressed[j] && iou(boxes[i], boxes[j]) > iou_thr) suppressed[j] = 1;
    }
  }
  return keep;
}

}  // namespace

std::vector<std::size_t> rotated_nms(std::span<const OrientedBox> boxes,
                                     std::span<const double> scores, double iou_thr) {
  return greedy_nms(boxes, scores, iou_thr,
                    [](const OrientedBox& a, const OrientedBox& b) { return rotated_iou(a, b); });
}

std::vector<std::size_t> horizontal_nms(std::span<const HorizontalBox> boxes,
                                        std::span<const double> scores, double iou_thr) {
  return greedy_nms(boxes, scores, iou_thr,
                    [](const HorizontalBox& a, const HorizontalBox& b) { return horizontal_iou(a, b); });
}

std::vector<double> rotated_iou_matrix(std::span<const OrientedBox> a,
                                       std::span<const OrientedBox> b) {
  std::vector<double> out(a.size() * b.size());
  const long na = static_cast<long>(a.size());
  const std::size_t nb = b.size();
#pragma omp parallel for schedule(dynamic, 16)
  for (long i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) out[static_cast<std::size_t>(i) * nb + j] = rotated_iou(a[i], b[j]);
  }
  return out;
}

std::vector<double> horizontal_iou_matrix(std::span<const HorizontalBox> a,
                                          std::span<const HorizontalBox> b) {
  std::vector<double> out(a.size() * b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out[i * b.size() + j] = horizontal_iou(a[i], b[j]);
  }
  return out;
}

namespace serial {

std::vector<double> rotated_iou_matrix(std::span<const OrientedBox> a,
                                       std::span<const OrientedBox> b) {
  std::vector<double> out;
  out.reserve(a.size() * b.size());
  for (const OrientedBox& x : a) {
    for (const OrientedBox& y : b) out.push_back(rotated_iou(x, y));
  }
  return out;
}

}  // namespace serial

}  // namespace hrdet
