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

#include "hrdet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "hrdet/seed.hpp"

namespace hrdet {

namespace {

std::vector<std::string_view> split_tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    out.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  return out;
}

double parse_number(std::string_view tok, std::size_t line_no) {
  double v = 0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw DataError("dota: line " + std::to_string(line_no) + ": non-numeric coordinate '" + std::string(tok) + "'");
  }
  return v;
}

// Leading header lines such as "imagesource:GoogleEarth" or "gsd:0.146".
bool is_metadata(const std::vector<std::string_view>& tok) {
  if (tok.size() == 10) return false;
  double v = 0;
  const auto [ptr, ec] = std::from_chars(tok[0].data(), tok[0].data() + tok[0].size(), v);
  return ec != std::errc() || ptr != tok[0].data() + tok[0].size();
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

Polygon4 ccw_order(const Polygon4& p) {
  const std::vector<Point2> hull = convex_hull({p.begin(), p.end()});
  if (hull.size() == 4) {
    const auto it = std::find(hull.begin(), hull.end(), p[0]);
    if (it != hull.end()) {
      Polygon4 out;
      const std::size_t s = static_cast<std::size_t>(it - hull.begin());
      for (std::size_t i = 0; i < 4; ++i) out[i] = hull[(s + i) % 4];
      return out;
    }
  }
  if (signed_area(p) < 0) return {p[0], p[3], p[2], p[1]};
  return p;
}

std::vector<AnnotationRecord> parse_dota(std::string_view text) {
  std::vector<AnnotationRecord> out;
  bool in_body = false;
  const std::vector<std::string_view> lines = split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::size_t line_no = n + 1;
    const std::vector<std::string_view> tok = split_tokens(lines[n]);
    if (tok.empty()) continue;
    if (tok.size() != 10) {
      if (!in_body && is_metadata(tok)) continue;
      throw DataError("dota: line " + std::to_string(line_no) + ": expected 10 tokens, got " +
                      std::to_string(tok.size()));
    }
    in_body = true;
    AnnotationRecord r;
    for (int i = 0; i < 4; ++i) {
      r.polygon[i] = {parse_number(tok[2 * i], line_no), parse_number(tok[2 * i + 1], line_no)};
    }
    r.polygon = ccw_order(r.polygon);
    r.category = std::string(tok[8]);
    if (tok[9] == "0") {
      r.difficulty = 0;
    } else if (tok[9] == "1") {
      r.difficulty = 1;
    } else {
      throw DataError("dota: line " + std::to_string(line_no) + ": difficulty must be 0 or 1, got '" +
                      std::string(tok[9]) + "'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string serialize_dota(std::span<const AnnotationRecord> records) {
  std::string out;
  for (const AnnotationRecord& r : records) {
    for (const Point2& p : r.polygon) {
      out += format_number(p.x) + ' ' + format_number(p.y) + ' ';
    }
    out += r.category + ' ' + std::to_string(r.difficulty) + '\n';
  }
  return out;
}

std::string normalize_dota(std::string_view text) {
  std::string out;
  bool in_body = false;
  std::size_t line_no = 0;
  for (std::string_view line : split_lines(text)) {
    ++line_no;
    const std::vector<std::string_view> tok = split_tokens(line);
    if (tok.empty() || (!in_body && is_metadata(tok))) continue;
    if (tok.size() != 10) throw DataError("dota: line " + std::to_string(line_no) + ": expected 10 tokens");
    in_body = true;
    Polygon4 p;
    for (int i = 0; i < 4; ++i) p[i] = {parse_number(tok[2 * i], line_no), parse_number(tok[2 * i + 1], line_no)};
    p = ccw_order(p);
    for (const Point2& q : p) out += format_number(q.x) + ' ' + format_number(q.y) + ' ';
    out += std::string(tok[8]) + ' ' + std::string(tok[9]) + '\n';
  }
  return out;
}

OrientedBox record_to_obb(const AnnotationRecord& r) { return min_area_rect(r.polygon); }

std::vector<int> tile_origins(int extent, int tile, int stride) {
  if (stride <= 0 || tile < stride) throw std::invalid_argument("tile_image: need tile >= stride > 0");
  std::vector<int> out{0};
  int o = 0;
  while (o + tile < extent) {
    o = std::min(o + stride, extent - tile);
    out.push_back(o);
  }
  return out;
}

std::vector<TileWindow> tile_image(int width, int height, int tile, int stride,
                                   std::span<const AnnotationRecord> records, double retain_fraction) {
  const std::vector<int> xs = tile_origins(width, tile, stride);
  const std::vector<int> ys = tile_origins(height, tile, stride);
  std::vector<TileWindow> out;
  for (int y0 : ys) {
    for (int x0 : xs) {
      TileWindow w{x0, y0, std::min(tile, width), std::min(tile, height), {}, {}};
      const std::array<Point2, 4> rect = {{{double(x0), double(y0)},
                                           {double(x0 + w.width), double(y0)},
                                           {double(x0 + w.width), double(y0 + w.height)},
                                           {double(x0), double(y0 + w.height)}}};
      for (std::size_t i = 0; i < records.size(); ++i) {
        const Polygon4 poly = ccw_order(records[i].polygon);
        const double area = signed_area(poly);
        if (area <= kMinArea) continue;
        const std::vector<Point2> clipped = clip_convex(poly, rect);
        const double inside = clipped.size() < 3 ? 0.0 : signed_area(clipped);
        if (inside < retain_fraction * area) continue;
        AnnotationRecord r = records[i];
        for (Point2& p : r.polygon) p = {p.x - x0, p.y - y0};
        w.source_index.push_back(i);
        w.records.push_back(std::move(r));
      }
      out.push_back(std::move(w));
    }
  }
  return out;
}

std::vector<ClassStyle> SceneSpec::default_classes() {
  return {{"square", 1.0, 1.5, 20, 36, 0.45}, {"bar", 2.0, 4.0, 28, 52, 0.65}, {"needle", 5.0, 9.0, 36, 64, 0.85}};
}

namespace {

float dequantize(int k) { return static_cast<float>(k / 255.0); }

int quantize(double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

bool inside(const OrientedBox& b, double c, double s, double x, double y) {
  const double dx = x - b.cx, dy = y - b.cy;
  const double u = c * dx + s * dy, v = -s * dx + c * dy;
  return std::abs(u) <= 0.5 * b.w && std::abs(v) <= 0.5 * b.h;
}

}  // namespace

Scene generate_scene(const SceneSpec& spec) {
  if (spec.image_size <= 0 || spec.classes.empty() || spec.min_instances < 0 ||
      spec.max_instances < spec.min_instances || spec.supersample <= 0) {
    throw std::invalid_argument("generate_scene: invalid SceneSpec");
  }
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> count_dist(spec.min_instances, spec.max_instances);
  std::uniform_int_distribution<int> class_dist(0, static_cast<int>(spec.classes.size()) - 1);
  const double size = spec.image_size;

  Scene scene;
  const int count = count_dist(rng);
  std::vector<OrientedBox> grown;
  for (int n = 0; n < count; ++n) {
    const int label = class_dist(rng);
    const ClassStyle& st = spec.classes[static_cast<std::size_t>(label)];
    bool placed = false;
    for (int attempt = 0; attempt < spec.max_attempts && !placed; ++attempt) {
      const double aspect = st.aspect_min + (st.aspect_max - st.aspect_min) * unit(rng);
      const double len = st.long_min + (st.long_max - st.long_min) * unit(rng);
      double theta;
      if (spec.rotation_heavy) {
        const double mag = kPi / 6 + (kPi / 6) * unit(rng);
        theta = unit(rng) < 0.5 ? -mag : mag;
      } else {
        theta = -0.5 * kPi + kPi * unit(rng);
      }
      OrientedBox b{0, 0, len, len / aspect, theta};
      const HorizontalBox r = rectangularize(b);
      const double lo_x = spec.border + 0.5 * r.w, hi_x = size - spec.border - 0.5 * r.w;
      const double lo_y = spec.border + 0.5 * r.h, hi_y = size - spec.border - 0.5 * r.h;
      const double ux = unit(rng), uy = unit(rng);
      if (hi_x < lo_x || hi_y < lo_y) continue;
      b.cx = lo_x + (hi_x - lo_x) * ux;
      b.cy = lo_y + (hi_y - lo_y) * uy;
      b = canonicalize(b);
      const OrientedBox g{b.cx, b.cy, b.w + spec.min_gap, b.h + spec.min_gap, b.theta};
      bool clear = true;
      for (const OrientedBox& o : grown) {
        if (rotated_intersection_area(g, o) > 0) {
          clear = false;
          break;
        }
      }
      if (!clear) continue;
      grown.push_back(g);
      scene.boxes.push_back(b);
      scene.labels.push_back(label);
      placed = true;
    }
    if (!placed) {
      throw DataError("generate_scene: could not place instance " + std::to_string(n) + " after " +
                      std::to_string(spec.max_attempts) + " attempts");
    }
  }

  const int s = spec.image_size, ss = spec.supersample;
  std::vector<double> canvas(static_cast<std::size_t>(s) * s, spec.background);
  const double inv = 1.0 / (ss * ss);
  for (std::size_t i = 0; i < scene.boxes.size(); ++i) {
    const OrientedBox& b = scene.boxes[i];
    const double fill = spec.classes[static_cast<std::size_t>(scene.labels[i])].intensity;
    const double c = std::cos(b.theta), sn = std::sin(b.theta);
    const HorizontalBox r = rectangularize(b);
    const int x0 = std::max(0, static_cast<int>(std::floor(r.x1()))), x1 = std::min(s - 1, static_cast<int>(r.x2()));
    const int y0 = std::max(0, static_cast<int>(std::floor(r.y1()))), y1 = std::min(s - 1, static_cast<int>(r.y2()));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        int hits = 0;
        for (int sy = 0; sy < ss; ++sy) {
          for (int sx = 0; sx < ss; ++sx) {
            hits += inside(b, c, sn, x + (sx + 0.5) / ss, y + (sy + 0.5) / ss);
          }
        }
        if (hits == 0) continue;
        const double f = hits * inv;
        double& px = canvas[static_cast<std::size_t>(y) * s + x];
        px = px * (1.0 - f) + fill * f;
      }
    }
  }
  scene.image = Tensor<float>({1, s, s});
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < canvas.size(); ++i) {
    const double v = canvas[i] + (spec.noise_sigma > 0 ? spec.noise_sigma * noise(rng) : 0.0);
    scene.image[i] = dequantize(quantize(v));
  }
  return scene;
}

OrientedBox flip_box(const OrientedBox& b, double width, double height, bool horizontal, bool vertical) {
  OrientedBox out = b;
  if (horizontal) {
    out.cx = width - out.cx;
    out.theta = -out.theta;
  }
  if (vertical) {
    out.cy = height - out.cy;
    out.theta = -out.theta;
  }
  return canonicalize(out);
}

Scene flip_scene(const Scene& s, bool horizontal, bool vertical) {
  const int c = s.image.dim(0), h = s.image.dim(1), w = s.image.dim(2);
  Scene out;
  out.labels = s.labels;
  out.image = Tensor<float>(s.image.shape());
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        out.image.at(ch, vertical ? h - 1 - y : y, horizontal ? w - 1 - x : x) = s.image.at(ch, y, x);
      }
    }
  }
  for (const OrientedBox& b : s.boxes) out.boxes.push_back(flip_box(b, w, h, horizontal, vertical));
  return out;
}

Dataset generate_dataset(const SceneSpec& spec, int n, const std::string& id_prefix) {
  Dataset ds;
  for (const ClassStyle& c : spec.classes) ds.class_names.push_back(c.name);
  ds.samples.resize(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) {
    SceneSpec local = spec;
    local.seed = mix_seed(spec.seed, static_cast<std::uint64_t>(i));
    Scene sc = generate_scene(local);
    Sample& s = ds.samples[static_cast<std::size_t>(i)];
    s.id = id_prefix + std::to_string(i);
    s.image = std::move(sc.image);
    s.boxes = std::move(sc.boxes);
    s.labels = std::move(sc.labels);
    s.difficult.assign(s.boxes.size(), 0);
  }
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["format"] = "hrdet-dataset-v1";
  manifest["classes"] = ds.class_names;
  manifest["pixel_file"] = "images.bin";
  nlohmann::ordered_json images = nlohmann::ordered_json::array();
  std::ofstream bin(fs::path(dir) / "images.bin", std::ios::binary);
  if (!bin) throw DataError("save_dataset: cannot write " + (fs::path(dir) / "images.bin").string());
  std::uint64_t offset = 0;
  for (const Sample& s : ds.samples) {
    if (s.image.rank() != 3) throw ShapeError("save_dataset: image must be (C, H, W)");
    nlohmann::ordered_json rec;
    rec["id"] = s.id;
    rec["channels"] = s.image.dim(0);
    rec["height"] = s.image.dim(1);
    rec["width"] = s.image.dim(2);
    rec["offset"] = offset;
    nlohmann::ordered_json boxes = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < s.boxes.size(); ++i) {
      const OrientedBox& b = s.boxes[i];
      boxes.push_back({{"class", s.labels[i]},
                       {"cx", b.cx},
                       {"cy", b.cy},
                       {"w", b.w},
                       {"h", b.h},
                       {"theta", b.theta},
                       {"difficult", i < s.difficult.size() ? s.difficult[i] : 0}});
    }
    rec["objects"] = std::move(boxes);
    images.push_back(std::move(rec));
    std::vector<std::uint8_t> bytes(s.image.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) bytes[i] = static_cast<std::uint8_t>(quantize(s.image[i]));
    bin.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    offset += bytes.size();
  }
  manifest["images"] = std::move(images);
  std::ofstream(fs::path(dir) / "manifest.json") << manifest.dump(1) << '\n';
}

Dataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw DataError("load_dataset: missing " + (fs::path(dir) / "manifest.json").string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mf);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("load_dataset: bad manifest: ") + e.what());
  }
  if (manifest.value("format", "") != "hrdet-dataset-v1") throw DataError("load_dataset: unknown manifest format");
  std::ifstream bin(fs::path(dir) / manifest.value("pixel_file", "images.bin"), std::ios::binary);
  if (!bin) throw DataError("load_dataset: missing pixel file");
  Dataset ds;
  ds.class_names = manifest.at("classes").get<std::vector<std::string>>();
  for (const auto& rec : manifest.at("images")) {
    Sample s;
    s.id = rec.at("id").get<std::string>();
    const int c = rec.at("channels"), h = rec.at("height"), w = rec.at("width");
    s.image = Tensor<float>({c, h, w});
    std::vector<std::uint8_t> bytes(s.image.size());
    bin.seekg(static_cast<std::streamoff>(rec.at("offset").get<std::uint64_t>()));
    bin.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!bin) throw DataError("load_dataset: pixel file truncated at image '" + s.id + "'");
    for (std::size_t i = 0; i < bytes.size(); ++i) s.image[i] = dequantize(bytes[i]);
    for (const auto& o : rec.at("objects")) {
      const int label = o.at("class");
      if (label < 0 || label >= ds.num_classes()) throw DataError("load_dataset: class id out of range in '" + s.id + "'");
      s.boxes.push_back({o.at("cx"), o.at("cy"), o.at("w"), o.at("h"), o.at("theta")});
      s.labels.push_back(label);
      s.difficult.push_back(o.value("difficult", 0));
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

void write_detections_jsonl(std::ostream& os, std::span<const ImageDetection> dets) {
  for (const ImageDetection& d : dets) {
    nlohmann::ordered_json j;
    j["image_id"] = d.image_id;
    j["class"] = d.class_name;
    j["score"] = d.det.score;
    j["cx"] = d.det.box.cx;
    j["cy"] = d.det.box.cy;
    j["w"] = d.det.box.w;
    j["h"] = d.det.box.h;
    j["theta"] = d.det.box.theta;
    os << j.dump() << '\n';
  }
}

std::vector<ImageDetection> read_detections_jsonl(std::istream& is) {
  std::vector<ImageDetection> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (split_tokens(line).empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      ImageDetection d;
      d.image_id = j.at("image_id").get<std::string>();
      d.class_name = j.at("class").get<std::string>();
      d.det.score = j.at("score");
      d.det.box = {j.at("cx"), j.at("cy"), j.at("w"), j.at("h"), j.at("theta")};
      out.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("detections: line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

double average_precision(std::span<const double> recall, std::span<const double> precision, ApMetric metric) {
  if (recall.size() != precision.size()) throw std::invalid_argument("average_precision: length mismatch");
  if (metric == ApMetric::kVoc07) {
    double sum = 0;
    for (int i = 0; i <= 10; ++i) {
      const double t = i / 10.0;
      double p = 0;
      for (std::size_t k = 0; k < recall.size(); ++k) {
        if (recall[k] >= t) p = std::max(p, precision[k]);
      }
      sum += p;
    }
    return sum / 11.0;
  }
  std::vector<double> mrec{0.0}, mpre{0.0};
  mrec.insert(mrec.end(), recall.begin(), recall.end());
  mpre.insert(mpre.end(), precision.begin(), precision.end());
  mrec.push_back(1.0);
  mpre.push_back(0.0);
  for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
  double ap = 0;
  for (std::size_t i = 1; i < mrec.size(); ++i) {
    if (mrec[i] != mrec[i - 1]) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
  }
  return ap;
}

MapResult evaluate_map(std::span<const std::vector<Detection>> dets, std::span<const std::vector<GroundTruth>> gts,
                       int num_classes, double iou_thr, ApMetric metric) {
  if (dets.size() != gts.size()) throw std::invalid_argument("evaluate_map: detections/ground truths image count mismatch");
  if (num_classes <= 0) throw std::invalid_argument("evaluate_map: num_classes must be positive");
  for (const auto& img : dets) {
    for (const Detection& d : img) {
      if (d.class_id < 0 || d.class_id >= num_classes) {
        throw std::invalid_argument("evaluate_map: detection class " + std::to_string(d.class_id) + " not in label map");
      }
    }
  }
  for (const auto& img : gts) {
    for (const GroundTruth& g : img) {
      if (g.class_id < 0 || g.class_id >= num_classes) {
        throw std::invalid_argument("evaluate_map: ground-truth class " + std::to_string(g.class_id) + " not in label map");
      }
    }
  }
  struct Ranked {
    double score;
    std::size_t image, index;
  };
  MapResult res;
  res.per_class.resize(static_cast<std::size_t>(num_classes));
  double sum = 0;
  int counted = 0;
  for (int c = 0; c < num_classes; ++c) {
    ClassAp& out = res.per_class[static_cast<std::size_t>(c)];
    std::vector<Ranked> ranked;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      for (std::size_t k = 0; k < dets[i].size(); ++k) {
        if (dets[i][k].class_id == c) ranked.push_back({dets[i][k].score, i, k});
      }
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
    std::vector<std::vector<char>> matched(gts.size());
    for (std::size_t i = 0; i < gts.size(); ++i) {
      matched[i].assign(gts[i].size(), 0);
      for (const GroundTruth& g : gts[i]) out.num_gts += (g.class_id == c && !g.difficult);
    }
    out.num_dets = ranked.size();
    std::vector<double> recall, precision;
    std::size_t tp = 0, fp = 0;
    for (const Ranked& r : ranked) {
      const OrientedBox& box = dets[r.image][r.index].box;
      double best = -1;
      std::size_t best_j = 0;
      for (std::size_t j = 0; j < gts[r.image].size(); ++j) {
        const GroundTruth& g = gts[r.image][j];
        if (g.class_id != c) continue;
        const double iou = rotated_iou(box, g.box);
        if (iou > best) {
          best = iou;
          best_j = j;
        }
      }
      if (best >= iou_thr) {
        if (gts[r.image][best_j].difficult) continue;
        if (!matched[r.image][best_j]) {
          matched[r.image][best_j] = 1;
          ++tp;
        } else {
          ++fp;
        }
      } else {
        ++fp;
      }
      recall.push_back(out.num_gts ? static_cast<double>(tp) / out.num_gts : 0.0);
      precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    }
    if (out.num_gts == 0) continue;
    out.ap = average_precision(recall, precision, metric);
    sum += out.ap;
    ++counted;
  }
  res.map = counted ? sum / counted : 0.0;
  return res;
}

void write_pgm(const std::string& path, const Tensor<float>& image) {
  if (image.rank() != 3 || image.dim(0) != 1) throw ShapeError("write_pgm: expected (1, H, W)");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("write_pgm: cannot open " + path);
  os << "P5\n" << image.dim(2) << ' ' << image.dim(1) << "\n255\n";
  for (float v : image.values()) os.put(static_cast<char>(quantize(v)));
}

Tensor<float> read_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("read_pgm: cannot open " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  is >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255) throw DataError("read_pgm: unsupported header in " + path);
  is.get();
  Tensor<float> out({1, h, w});
  std::vector<std::uint8_t> bytes(out.size());
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!is) throw DataError("read_pgm: truncated pixel data in " + path);
  for (std::size_t i = 0; i < bytes.size(); ++i) out[i] = dequantize(bytes[i]);
  return out;
}

RgbImage RgbImage::from_gray(const Tensor<float>& image) {
  if (image.rank() != 3 || image.dim(0) != 1) throw ShapeError("RgbImage: expected (1, H, W)");
  RgbImage out{image.dim(2), image.dim(1), {}};
  out.pixels.reserve(image.size() * 3);
  for (float v : image.values()) {
    const auto g = static_cast<std::uint8_t>(quantize(v));
    out.pixels.insert(out.pixels.end(), {g, g, g});
  }
  return out;
}

void RgbImage::draw_line(double x0, double y0, double x1, double y1, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const int steps = std::max(1, static_cast<int>(std::ceil(2.0 * std::hypot(x1 - x0, y1 - y0))));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const int x = static_cast<int>(std::floor(x0 + t * (x1 - x0)));
    const int y = static_cast<int>(std::floor(y0 + t * (y1 - y0)));
    if (x < 0 || y < 0 || x >= width || y >= height) continue;
    std::uint8_t* px = &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
    px[0] = r;
    px[1] = g;
    px[2] = b;
  }
}

void RgbImage::draw_box(const OrientedBox& box, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const Polygon4 p = obb_to_polygon(box);
  for (int i = 0; i < 4; ++i) draw_line(p[i].x, p[i].y, p[(i + 1) % 4].x, p[(i + 1) % 4].y, r, g, b);
}

void write_ppm(const std::string& path, const RgbImage& image) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("write_ppm: cannot open " + path);
  os << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
}

}  // namespace hrdet
