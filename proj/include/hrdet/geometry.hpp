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
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace hrdet {

inline constexpr double kPi = 3.14159265358979323846;

/// Rotated rectangle. Canonical form is long-edge: w >= h > 0 and
/// theta in [-pi/2, pi/2). Angles are radians, counter-clockwise in the
/// (x, y) frame.
struct OrientedBox {
  double cx = 0, cy = 0, w = 0, h = 0, theta = 0;

  double area() const { return w * h; }
  bool operator==(const OrientedBox&) const = default;
};

/// Axis-aligned box in center form.
struct HorizontalBox {
  double cx = 0, cy = 0, w = 0, h = 0;

  double x1() const { return cx - 0.5 * w; }
  double y1() const { return cy - 0.5 * h; }
  double x2() const { return cx + 0.5 * w; }
  double y2() const { return cy + 0.5 * h; }
  double area() const { return w * h; }
  bool operator==(const HorizontalBox&) const = default;

  static HorizontalBox from_corners(double x1, double y1, double x2, double y2) {
    return {0.5 * (x1 + x2), 0.5 * (y1 + y2), x2 - x1, y2 - y1};
  }
};

struct Point2 {
  double x = 0, y = 0;

  Point2 operator+(const Point2& o) const { return {x + o.x, y + o.y}; }
  Point2 operator-(const Point2& o) const { return {x - o.x, y - o.y}; }
  Point2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Point2&) const = default;
};

inline double cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }
inline double dot(const Point2& a, const Point2& b) { return a.x * b.x + a.y * b.y; }

/// Four vertices with positive shoelace area (counter-clockwise).
using Polygon4 = std::array<Point2, 4>;

/// Row-major 2x2 matrix.
using Mat2 = std::array<std::array<double, 2>, 2>;

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// [[cos a, -sin a], [sin a, cos a]].
Mat2 rotation_matrix(double alpha);

/// Wraps an angle into [-pi/2, pi/2).
double wrap_half_pi(double theta);

/// Long-edge canonical form. Idempotent.
OrientedBox canonicalize(const OrientedBox& b);

/// Corners of b, counter-clockwise, starting at the local (+w/2, +h/2) corner.
Polygon4 obb_to_polygon(const OrientedBox& b);

/// Inverse of obb_to_polygon for rectangles: center from the vertex mean,
/// extents from edges v0v1 / v1v2, angle from the v1->v0 direction.
OrientedBox polygon_to_obb(const Polygon4& poly);

double signed_area(std::span<const Point2> poly);

/// Clips `subject` against the convex counter-clockwise polygon `clip`
/// (Sutherland-Hodgman). Returns the intersection polygon.
std::vector<Point2> clip_convex(std::span<const Point2> subject, std::span<const Point2> clip);

/// Areas below this are treated as empty intersections.
inline constexpr double kMinArea = 1e-12;

double rotated_intersection_area(const OrientedBox& a, const OrientedBox& b);
double rotated_iou(const OrientedBox& a, const OrientedBox& b);
double horizontal_iou(const HorizontalBox& a, const HorizontalBox& b);

/// Minimal axis-aligned box enclosing b.
HorizontalBox rectangularize(const OrientedBox& b);

/// Oriented embedding of a horizontal box (theta = 0, canonicalized).
OrientedBox to_oriented(const HorizontalBox& b);

/// Counter-clockwise convex hull (monotone chain). Collinear points dropped.
std::vector<Point2> convex_hull(std::vector<Point2> pts);

/// Smallest-area enclosing rectangle by rotating calipers over hull edges.
/// Throws GeometryError for degenerate (collinear or repeated) input.
OrientedBox min_area_rect(std::span<const Point2> poly);

/// Greedy NMS by rotated IoU. Kept indices in descending score order; equal
/// scores keep the lower index first. A box is suppressed when its IoU with a
/// kept box is strictly greater than iou_thr.
std::vector<std::size_t> rotated_nms(std::span<const OrientedBox> boxes,
                                     std::span<const double> scores, double iou_thr);

/// Same contract as rotated_nms, with axis-aligned IoU.
std::vector<std::size_t> horizontal_nms(std::span<const HorizontalBox> boxes,
                                        std::span<const double> scores, double iou_thr);

/// Pairwise rotated IoU, row-major |a| x |b|. OpenMP over rows.
std::vector<double> rotated_iou_matrix(std::span<const OrientedBox> a,
                                       std::span<const OrientedBox> b);

/// Pairwise axis-aligned IoU, row-major |a| x |b|.
std::vector<double> horizontal_iou_matrix(std::span<const HorizontalBox> a,
                                          std::span<const HorizontalBox> b);

namespace serial {
std::vector<double> rotated_iou_matrix(std::span<const OrientedBox> a,
                                       std::span<const OrientedBox> b);
}  // namespace serial

}  // namespace hrdet
