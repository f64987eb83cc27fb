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
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hrdet/geometry.hpp"
#include "hrdet/heads.hpp"
#include "hrdet/tensor.hpp"

namespace hrdet {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// DOTA annotation text.

struct AnnotationRecord {
  Polygon4 polygon;
  std::string category;
  int difficulty = 0;
};

/// Parses "x1 y1 x2 y2 x3 y3 x4 y4 category difficulty" lines (LF or CRLF).
/// Leading lines whose first token is not a number (for example
/// "gsd:0.146") are metadata and skipped; every other non-blank line must be
/// a record.
/// Polygons come back counter-clockwise, starting at the first source vertex.
/// Throws DataError naming the 1-based line on malformed input.
std::vector<AnnotationRecord> parse_dota(std::string_view text);

/// One record per line, single-space separated, shortest round-trip numbers, LF endings.
std::string serialize_dota(std::span<const AnnotationRecord> records);

/// Canonical text for a DOTA file: what serialize_dota(parse_dota(text)) produces.
/// Works token-wise (metadata dropped, whitespace collapsed, numbers reprinted,
/// polygon vertex order made counter-clockwise).
std::string normalize_dota(std::string_view text);

/// Counter-clockwise order of four vertices, starting at p[0]. Self-crossing
/// (bow-tie) orders are replaced by the convex hull order when the hull has
/// four vertices.
Polygon4 ccw_order(const Polygon4& p);

/// Oriented target for a record (min_area_rect of its polygon).
OrientedBox record_to_obb(const AnnotationRecord& r);

// Tiling.

struct TileWindow {
  int x0 = 0, y0 = 0, width = 0, height = 0;
  std::vector<std::size_t> source_index;  // index into the input records
  std::vector<AnnotationRecord> records;  // polygons in window coordinates
};

/// Window origins 0, stride, 2 stride, ... with the last window clamped to the
/// image edge. A record is kept in a window when the part of its polygon inside
/// the window has at least retain_fraction of its area; the kept polygon is the
/// full shape shifted into window coordinates.
std::vector<int> tile_origins(int extent, int tile, int stride);
std::vector<TileWindow> tile_image(int width, int height, int tile, int stride,
                                   std::span<const AnnotationRecord> records, double retain_fraction = 0.6);

// Synthetic scenes.

struct ClassStyle {
  std::string name;
  double aspect_min = 1.0, aspect_max = 1.5;  // w / h
  double long_min = 20, long_max = 36;        // long edge, pixels
  double intensity = 0.5;                     // fill value in [0, 1]
};

struct SceneSpec {
  int image_size = 128;
  int min_instances = 1;
  int max_instances = 6;
  std::vector<ClassStyle> classes = default_classes();
  /// Uniform angle over [-pi/2, pi/2) unless rotation_heavy, which draws
  /// |theta| uniformly from [pi/6, pi/3] with a random sign.
  bool rotation_heavy = false;
  double background = 0.2;
  double noise_sigma = 0.05;
  /// Minimum distance between instances; boxes grown by half of it on each
  /// side may not intersect.
  double min_gap = 2.0;
  /// Minimum distance between an instance and the image border.
  double border = 2.0;
  int supersample = 4;
  int max_attempts = 1000;
  std::uint64_t seed = 0;

  static std::vector<ClassStyle> default_classes();
};

struct Scene {
  Tensor<float> image;  // (1, H, W), values quantized to k / 255
  std::vector<OrientedBox> boxes;
  std::vector<int> labels;
};

/// Deterministic per seed. Throws DataError if an instance cannot be placed in
/// max_attempts draws.
Scene generate_scene(const SceneSpec& spec);

/// Mirror across the vertical axis (x -> W - x) or the horizontal axis.
/// Angles are negated and re-canonicalized.
Scene flip_scene(const Scene& s, bool horizontal, bool vertical);
OrientedBox flip_box(const OrientedBox& b, double width, double height, bool horizontal, bool vertical);

// Datasets.

struct Sample {
  std::string id;
  Tensor<float> image;
  std::vector<OrientedBox> boxes;
  std::vector<int> labels;
  std::vector<int> difficult;  // 0 or 1 per box
};

struct Dataset {
  std::vector<std::string> class_names;
  std::vector<Sample> samples;

  int num_classes() const { return static_cast<int>(class_names.size()); }
};

/// n scenes; scene i uses seed mix_seed(spec.seed, i) and id "<prefix><i>".
Dataset generate_dataset(const SceneSpec& spec, int n, const std::string& id_prefix);

/// Writes dir/manifest.json and dir/images.bin (row-major 8-bit pixels,
/// images back to back in manifest order).
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// Detection dumps.

struct ImageDetection {
  std::string image_id;
  std::string class_name;
  Detection det;
};

/// One JSON object per line with keys in the order
/// image_id, class, score, cx, cy, w, h, theta.
void write_detections_jsonl(std::ostream& os, std::span<const ImageDetection> dets);
std::vector<ImageDetection> read_detections_jsonl(std::istream& is);

// Evaluation.

enum class ApMetric { kVoc07, kVoc12 };

struct GroundTruth {
  OrientedBox box;
  int class_id = 0;
  bool difficult = false;
};

struct ClassAp {
  double ap = 0;
  std::size_t num_gts = 0;  // non-difficult
  std::size_t num_dets = 0;
};

struct MapResult {
  std::vector<ClassAp> per_class;
  /// Mean over classes with at least one non-difficult ground truth.
  double map = 0;
};

/// Rotated-IoU mAP. Detections of a class are ranked by descending score;
/// equal scores keep (image index, detection index) order. Each detection is
/// matched to its highest-IoU ground truth of the same class; it is a true
/// positive if that IoU >= iou_thr and the ground truth is still unmatched,
/// ignored if that ground truth is difficult, else a false positive.
/// Throws std::invalid_argument for class ids outside [0, num_classes).
MapResult evaluate_map(std::span<const std::vector<Detection>> dets, std::span<const std::vector<GroundTruth>> gts,
                       int num_classes, double iou_thr = 0.5, ApMetric metric = ApMetric::kVoc07);

/// AP from a ranked true/false-positive sequence.
double average_precision(std::span<const double> recall, std::span<const double> precision, ApMetric metric);

// Image files.

/// Binary PGM (P5). Values are clamped to [0, 1] and scaled to 0..255.
void write_pgm(const std::string& path, const Tensor<float>& image);
Tensor<float> read_pgm(const std::string& path);

struct RgbImage {
  int width = 0, height = 0;
  std::vector<std::uint8_t> pixels;  // RGB, row-major

  static RgbImage from_gray(const Tensor<float>& image);
  void draw_line(double x0, double y0, double x1, double y1, std::uint8_t r, std::uint8_t g, std::uint8_t b);
  void draw_box(const OrientedBox& box, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

/// Binary PPM (P6).
void write_ppm(const std::string& path, const RgbImage& image);

}  // namespace hrdet
