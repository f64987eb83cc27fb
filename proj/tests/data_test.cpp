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

#include <gtest/gtest.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hrdet/data.hpp"
#include "oracles.hpp"

namespace hrdet {
namespace {

std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("hrdet_data_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

std::string shortest(double v) {
  char buf[64];
  return std::string(buf, std::to_chars(buf, buf + sizeof(buf), v).ptr);
}

TEST(ParseDota, AxisAlignedShip) {
  const auto recs = parse_dota("0 0 10 0 10 5 0 5 ship 0\n");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].category, "ship");
  EXPECT_EQ(recs[0].difficulty, 0);
  const OrientedBox b = record_to_obb(recs[0]);
  EXPECT_NEAR(b.cx, 5.0, 1e-12);
  EXPECT_NEAR(b.cy, 2.5, 1e-12);
  EXPECT_NEAR(b.w, 10.0, 1e-12);
  EXPECT_NEAR(b.h, 5.0, 1e-12);
  EXPECT_NEAR(std::remainder(b.theta, kPi), 0.0, 1e-12);
}

TEST(ParseDota, NineTokensNamesTheLine) {
  try {
    parse_dota("0 0 10 0 10 5 0 5 ship 0\n0 0 10 0 10 5 0 5 ship\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  try {
    parse_dota("0 0 10 0 10 5 0 5 ship\n");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos) << e.what();
  }
}

TEST(ParseDota, NonNumericCoordinate) {
  EXPECT_THROW(parse_dota("0 0 10 zero 10 5 0 5 ship 0\n"), DataError);
  EXPECT_THROW(parse_dota("0 0 10 0 10 5 0 5 ship 2\n"), DataError);
}

TEST(ParseDota, SkipsHeaderAndHandlesCrlf) {
  const auto recs = parse_dota("imagesource:GoogleEarth\r\ngsd:0.146\r\n1 1 5 1 5 3 1 3 small-vehicle 1\r\n\r\n");
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].category, "small-vehicle");
  EXPECT_EQ(recs[0].difficulty, 1);
}

TEST(ParseDota, ReordersToCounterClockwise) {
  // Clockwise and bow-tie orders of the same rectangle.
  for (const char* line : {"0 0 0 5 10 5 10 0 plane 0", "0 0 10 5 10 0 0 5 plane 0"}) {
    const auto recs = parse_dota(line);
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_GT(signed_area(recs[0].polygon), 0.0) << line;
    EXPECT_NEAR(signed_area(recs[0].polygon), 50.0, 1e-12) << line;
    EXPECT_EQ(recs[0].polygon[0], (Point2{0, 0}));
  }
}

// Random rectangles written in random vertex order and formatting. The
// expected canonical line is built from the known counter-clockwise corners.
TEST(ParseDota, SerializeParseEqualsNormalizeFuzz) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> coin(0, 1), start(0, 3), ws(0, 2), cat(0, 2);
  const char* cats[] = {"plane", "ship", "large-vehicle"};
  const char* spaces[] = {" ", "  ", "\t"};
  std::string text, expected;
  for (int n = 0; n < 1000; ++n) {
    OrientedBox b = oracle::random_box(rng, 1000.0, 2.0, 200.0);
    // Quarter-pixel grid keeps the printed values exact.
    Polygon4 p = obb_to_polygon(b);
    for (Point2& q : p) q = {std::round(q.x * 4) / 4, std::round(q.y * 4) / 4};
    if (signed_area(p) <= 1.0) continue;
    bool convex = true;
    for (int i = 0; i < 4; ++i) convex &= cross(p[(i + 1) % 4] - p[i], p[(i + 2) % 4] - p[(i + 1) % 4]) > 0;
    if (!convex) continue;
    const int s = start(rng);
    Polygon4 ccw;
    for (int i = 0; i < 4; ++i) ccw[i] = p[(s + i) % 4];
    Polygon4 written = ccw;
    const int mode = start(rng);
    if (mode == 1) written = {ccw[0], ccw[3], ccw[2], ccw[1]};  // clockwise
    if (mode == 2) written = {ccw[0], ccw[2], ccw[1], ccw[3]};  // bow-tie
    const std::string c = cats[cat(rng)];
    const int diff = coin(rng);
    std::string line;
    for (const Point2& q : written) {
      line += (coin(rng) ? shortest(q.x) : shortest(q.x) + (std::floor(q.x) == q.x ? ".0" : "")) + spaces[ws(rng)];
      line += shortest(q.y) + spaces[ws(rng)];
    }
    line += c + spaces[ws(rng)] + std::to_string(diff);
    text += line + (coin(rng) ? "\r\n" : "\n");
    for (const Point2& q : ccw) expected += shortest(q.x) + ' ' + shortest(q.y) + ' ';
    expected += c + ' ' + std::to_string(diff) + '\n';
  }
  const auto recs = parse_dota(text);
  EXPECT_GT(recs.size(), 900u);
  EXPECT_EQ(serialize_dota(recs), normalize_dota(text));
  EXPECT_EQ(normalize_dota(text), expected);
}

TEST(TileImage, SingleWindowWhenTileCoversImage) {
  const auto w = tile_image(1024, 1024, 1024, 824, {});
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].x0, 0);
  EXPECT_EQ(w[0].y0, 0);
}

TEST(TileImage, ClampedOriginsFor2000) {
  EXPECT_EQ(tile_origins(2000, 1024, 824), (std::vector<int>{0, 824, 976}));
  const auto w = tile_image(2000, 2000, 1024, 824, {});
  ASSERT_EQ(w.size(), 9u);
  std::set<std::pair<int, int>> origins;
  for (const TileWindow& t : w) origins.insert({t.x0, t.y0});
  for (int y : {0, 824, 976}) {
    for (int x : {0, 824, 976}) EXPECT_TRUE(origins.count({x, y}));
  }
}

TEST(TileImage, WindowsCoverEveryPixel) {
  for (int extent : {1, 500, 1024, 1025, 1848, 2000, 4096, 5001}) {
    const std::vector<int> o = tile_origins(extent, 1024, 824);
    EXPECT_EQ(o.front(), 0);
    EXPECT_GE(o.back() + 1024, extent);
    for (std::size_t i = 1; i < o.size(); ++i) {
      EXPECT_LE(o[i] - o[i - 1], 1024);
      EXPECT_GT(o[i], o[i - 1]);
    }
  }
  EXPECT_THROW(tile_origins(100, 10, 20), std::invalid_argument);
  EXPECT_THROW(tile_origins(100, 10, 0), std::invalid_argument);
}

TEST(TileImage, RetentionRule) {
  auto rect = [](double x0, double y0, double x1, double y1) {
    return AnnotationRecord{{{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}}}, "ship", 0};
  };
  const std::vector<AnnotationRecord> recs{
      rect(100, 100, 140, 120),    // inside the first window only
      rect(1000, 10, 1040, 30),    // 60% inside the first window (x < 1024)
      rect(1010, 50, 1040, 70),    // under half inside the first window
  };
  const auto w = tile_image(2000, 1024, 1024, 824, recs);
  ASSERT_EQ(w.size(), 3u);
  ASSERT_EQ(w[0].source_index, (std::vector<std::size_t>{0, 1}));
  // The second window starts at 824: records 1 and 2 are fully inside.
  EXPECT_EQ(w[1].source_index, (std::vector<std::size_t>{1, 2}));
  const OrientedBox moved = record_to_obb(w[1].records[0]);
  EXPECT_NEAR(moved.cx, 1020.0 - 824.0, 1e-9);
  EXPECT_NEAR(moved.cy, 20.0, 1e-9);
  const OrientedBox first = record_to_obb(w[0].records[0]);
  EXPECT_NEAR(first.cx, 120.0, 1e-9);
}

SceneSpec quiet_spec(std::uint64_t seed) {
  SceneSpec s;
  s.seed = seed;
  s.noise_sigma = 0.0;
  return s;
}

TEST(GenerateScene, RenderedAreaMatchesBoxArea) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SceneSpec spec = quiet_spec(seed);
    spec.min_instances = spec.max_instances = 1;
    const Scene s = generate_scene(spec);
    ASSERT_EQ(s.boxes.size(), 1u);
    const double bg = std::round(spec.background * 255) / 255;
    const double fill = std::round(spec.classes[static_cast<std::size_t>(s.labels[0])].intensity * 255) / 255;
    double covered = 0;
    for (float v : s.image.values()) covered += (v - bg) / (fill - bg);
    EXPECT_NEAR(covered / s.boxes[0].area(), 1.0, 0.02) << "seed " << seed;
  }
}

TEST(GenerateScene, DeterministicPerSeed) {
  SceneSpec spec;
  spec.seed = 77;
  const Scene a = generate_scene(spec), b = generate_scene(spec);
  ASSERT_EQ(a.boxes.size(), b.boxes.size());
  for (std::size_t i = 0; i < a.boxes.size(); ++i) EXPECT_EQ(a.boxes[i], b.boxes[i]);
  for (std::size_t i = 0; i < a.image.size(); ++i) EXPECT_EQ(a.image[i], b.image[i]);
  spec.seed = 78;
  const Scene c = generate_scene(spec);
  bool differs = c.boxes.size() != a.boxes.size();
  for (std::size_t i = 0; !differs && i < a.image.size(); ++i) differs = a.image[i] != c.image[i];
  EXPECT_TRUE(differs);
}

TEST(GenerateScene, GroundTruthContract) {
  for (bool heavy : {false, true}) {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      SceneSpec spec;
      spec.seed = seed;
      spec.rotation_heavy = heavy;
      const Scene s = generate_scene(spec);
      ASSERT_GE(static_cast<int>(s.boxes.size()), spec.min_instances);
      ASSERT_LE(static_cast<int>(s.boxes.size()), spec.max_instances);
      for (std::size_t i = 0; i < s.boxes.size(); ++i) {
        const OrientedBox& b = s.boxes[i];
        const ClassStyle& st = spec.classes[static_cast<std::size_t>(s.labels[i])];
        EXPECT_GE(b.w, b.h);
        EXPECT_GT(b.h, 0.0);
        EXPECT_GE(b.theta, -kPi / 2);
        EXPECT_LT(b.theta, kPi / 2);
        EXPECT_GE(b.w, st.long_min - 1e-9);
        EXPECT_LE(b.w, st.long_max + 1e-9);
        EXPECT_GE(b.w / b.h, st.aspect_min - 1e-9);
        EXPECT_LE(b.w / b.h, st.aspect_max + 1e-9);
        if (heavy && b.w > b.h) {
          EXPECT_GE(std::abs(b.theta), kPi / 6 - 1e-12);
          EXPECT_LE(std::abs(b.theta), kPi / 3 + 1e-12);
        }
        for (const Point2& p : obb_to_polygon(b)) {
          EXPECT_GE(p.x, 0.0);
          EXPECT_LE(p.x, spec.image_size);
          EXPECT_GE(p.y, 0.0);
          EXPECT_LE(p.y, spec.image_size);
        }
        for (std::size_t j = 0; j < i; ++j) EXPECT_LE(rotated_iou(b, s.boxes[j]), 0.05);
      }
    }
  }
}

TEST(GenerateScene, InfeasiblePlacementThrows) {
  SceneSpec spec;
  spec.image_size = 40;
  spec.min_instances = spec.max_instances = 6;
  spec.classes = {{"big", 1.0, 1.2, 30, 34, 0.5}};
  EXPECT_THROW(generate_scene(spec), DataError);
}

TEST(Flip, TwiceIsIdentity) {
  SceneSpec spec;
  spec.seed = 5;
  const Scene s = generate_scene(spec);
  for (bool h : {false, true}) {
    for (bool v : {false, true}) {
      const Scene back = flip_scene(flip_scene(s, h, v), h, v);
      for (std::size_t i = 0; i < s.image.size(); ++i) EXPECT_EQ(back.image[i], s.image[i]);
      for (std::size_t i = 0; i < s.boxes.size(); ++i) EXPECT_NEAR(rotated_iou(back.boxes[i], s.boxes[i]), 1.0, 1e-9);
    }
  }
}

TEST(Flip, BoxesFollowPixels) {
  SceneSpec spec = quiet_spec(9);
  spec.min_instances = spec.max_instances = 1;
  const Scene s = generate_scene(spec);
  const double bg = s.image[0];
  for (bool h : {false, true}) {
    for (bool v : {false, true}) {
      const Scene f = flip_scene(s, h, v);
      // Pixels well inside the flipped box are filled; pixels well outside are background.
      const OrientedBox& b = f.boxes[0];
      const OrientedBox inner{b.cx, b.cy, b.w - 3, b.h - 3, b.theta};
      const OrientedBox outer{b.cx, b.cy, b.w + 3, b.h + 3, b.theta};
      for (int y = 0; y < 128; ++y) {
        for (int x = 0; x < 128; ++x) {
          const float px = f.image.at(0, y, x);
          if (inner.h > 0 && oracle::inside_box(inner, x + 0.5, y + 0.5)) {
            EXPECT_GT(px, bg + 0.1f);
          }
          if (!oracle::inside_box(outer, x + 0.5, y + 0.5)) {
            EXPECT_EQ(px, bg);
          }
        }
      }
    }
  }
}

TEST(Dataset, SaveLoadRoundTrip) {
  SceneSpec spec;
  spec.seed = 3;
  Dataset ds = generate_dataset(spec, 5, "img");
  ds.samples[1].difficult[0] = 1;
  const std::string dir = temp_dir("roundtrip");
  save_dataset(ds, dir);
  const Dataset back = load_dataset(dir);
  EXPECT_EQ(back.class_names, ds.class_names);
  ASSERT_EQ(back.samples.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    const Sample &a = ds.samples[i], &b = back.samples[i];
    EXPECT_EQ(a.id, b.id);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.difficult, b.difficult);
    ASSERT_EQ(a.boxes.size(), b.boxes.size());
    for (std::size_t k = 0; k < a.boxes.size(); ++k) EXPECT_EQ(a.boxes[k], b.boxes[k]);
    for (std::size_t k = 0; k < a.image.size(); ++k) EXPECT_EQ(a.image[k], b.image[k]);
  }
  EXPECT_EQ(std::filesystem::file_size(std::filesystem::path(dir) / "images.bin"), 5u * 128 * 128);
  EXPECT_THROW(load_dataset(temp_dir("empty")), DataError);
}

TEST(DetectionsJsonl, RoundTripAndFieldOrder) {
  const std::vector<ImageDetection> dets{{"a", "ship", {{1.5, 2, 10, 4, 0.25}, 0.75, 1}},
                                         {"b", "plane", {{3, 4, 5, 6, -1}, 0.5, 0}}};
  std::stringstream ss;
  write_detections_jsonl(ss, dets);
  const std::string text = ss.str();
  const std::string first = text.substr(0, text.find('\n'));
  EXPECT_EQ(first, R"({"image_id":"a","class":"ship","score":0.75,"cx":1.5,"cy":2.0,"w":10.0,"h":4.0,"theta":0.25})");
  const auto back = read_detections_jsonl(ss);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].image_id, "b");
  EXPECT_EQ(back[1].class_name, "plane");
  EXPECT_EQ(back[1].det.box, dets[1].det.box);
  std::stringstream bad("{\"image_id\": 1}\n");
  EXPECT_THROW(read_detections_jsonl(bad), DataError);
}

// Independent evaluator: recounts the greedy matching for every prefix of
// the ranked list and integrates the precision envelope directly.
struct PrefixPoint {
  double recall, precision;
};

std::vector<PrefixPoint> brute_force_curve(const std::vector<std::vector<Detection>>& dets,
                                           const std::vector<std::vector<GroundTruth>>& gts, int cls, double thr) {
  struct Item {
    double score;
    std::size_t img, idx;
  };
  std::vector<Item> items;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    for (std::size_t k = 0; k < dets[i].size(); ++k) {
      if (dets[i][k].class_id == cls) items.push_back({dets[i][k].score, i, k});
    }
  }
  // Insertion sort keeps equal scores in (image, index) order.
  for (std::size_t a = 1; a < items.size(); ++a) {
    for (std::size_t b = a; b > 0 && items[b - 1].score < items[b].score; --b) std::swap(items[b - 1], items[b]);
  }
  std::size_t npos = 0;
  for (const auto& img : gts) {
    for (const GroundTruth& g : img) npos += g.class_id == cls && !g.difficult;
  }
  std::vector<PrefixPoint> curve;
  for (std::size_t k = 1; k <= items.size(); ++k) {
    std::set<std::pair<std::size_t, std::size_t>> used;
    int tp = 0, fp = 0;
    bool last_counted = false;
    for (std::size_t q = 0; q < k; ++q) {
      const Item& it = items[q];
      double best = -1;
      std::size_t bj = 0;
      for (std::size_t j = 0; j < gts[it.img].size(); ++j) {
        if (gts[it.img][j].class_id != cls) continue;
        const double iou = rotated_iou(dets[it.img][it.idx].box, gts[it.img][j].box);
        if (iou > best) {
          best = iou;
          bj = j;
        }
      }
      last_counted = true;
      if (best >= thr && gts[it.img][bj].difficult) {
        last_counted = false;
      } else if (best >= thr && !used.count({it.img, bj})) {
        used.insert({it.img, bj});
        ++tp;
      } else {
        ++fp;
      }
    }
    if (last_counted) curve.push_back({npos ? double(tp) / npos : 0.0, double(tp) / (tp + fp)});
  }
  return curve;
}

double brute_voc07(const std::vector<PrefixPoint>& c) {
  double s = 0;
  for (int i = 0; i <= 10; ++i) {
    double best = 0;
    for (const PrefixPoint& p : c) {
      if (p.recall >= i / 10.0) best = std::max(best, p.precision);
    }
    s += best;
  }
  return s / 11;
}

double brute_voc12(const std::vector<PrefixPoint>& c) {
  double area = 0, prev = 0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    if (c[k].recall <= prev) continue;
    double env = 0;
    for (std::size_t j = k; j < c.size(); ++j) env = std::max(env, c[j].precision);
    area += (c[k].recall - prev) * env;
    prev = c[k].recall;
  }
  return area;
}

TEST(EvaluateMap, PerfectDetectionsScoreOne) {
  std::vector<std::vector<GroundTruth>> gts{{{{10, 10, 8, 4, 0.2}, 0, false}, {{30, 30, 9, 3, -0.4}, 1, false}},
                                            {{{50, 20, 12, 5, 1.0}, 1, false}}};
  std::vector<std::vector<Detection>> dets(2);
  for (std::size_t i = 0; i < 2; ++i) {
    for (const GroundTruth& g : gts[i]) dets[i].push_back({g.box, 1.0, g.class_id});
  }
  for (ApMetric m : {ApMetric::kVoc07, ApMetric::kVoc12}) {
    EXPECT_DOUBLE_EQ(evaluate_map(dets, gts, 2, 0.5, m).map, 1.0);
    const std::vector<std::vector<Detection>> none(2);
    EXPECT_DOUBLE_EQ(evaluate_map(none, gts, 2, 0.5, m).map, 0.0);
  }
}

TEST(EvaluateMap, HandCaseMatchesFixture) {
  std::ifstream f(std::string(HRDET_FIXTURE_DIR) + "/voc_hand_case.json");
  ASSERT_TRUE(f.good());
  const nlohmann::json fx = nlohmann::json::parse(f);
  const OrientedBox g1{10, 10, 10, 4, 0.0}, g2{40, 40, 10, 4, 0.5};
  const std::vector<std::vector<GroundTruth>> gts{{{g1, 0, false}, {g2, 0, false}}};
  const std::vector<std::vector<Detection>> dets{
      {{g1, 0.9, 0}, {{70, 70, 10, 4, 0}, 0.8, 0}, {g2, 0.7, 0}}};
  EXPECT_NEAR(evaluate_map(dets, gts, 1, 0.5, ApMetric::kVoc07).map, fx["voc07_ap"].get<double>(), 1e-12);
  EXPECT_NEAR(evaluate_map(dets, gts, 1, 0.5, ApMetric::kVoc12).map, fx["voc12_ap"].get<double>(), 1e-12);
  EXPECT_NEAR(fx["voc07_ap"].get<double>(), (6 + 5 * 2.0 / 3.0) / 11, 1e-12);
}

TEST(EvaluateMap, DifficultGroundTruthIgnored) {
  const OrientedBox a{10, 10, 10, 4, 0.0}, b{40, 40, 10, 4, 0.5};
  const std::vector<std::vector<GroundTruth>> gts{{{a, 0, false}, {b, 0, true}}};
  // Detecting or missing the difficult box changes nothing.
  const std::vector<std::vector<Detection>> with{{{a, 0.9, 0}, {b, 0.95, 0}}};
  const std::vector<std::vector<Detection>> without{{{a, 0.9, 0}}};
  EXPECT_DOUBLE_EQ(evaluate_map(with, gts, 1).map, 1.0);
  EXPECT_DOUBLE_EQ(evaluate_map(without, gts, 1).map, 1.0);
  EXPECT_EQ(evaluate_map(with, gts, 1).per_class[0].num_gts, 1u);
}

TEST(EvaluateMap, UnknownClassThrows) {
  const std::vector<std::vector<GroundTruth>> gts{{{{10, 10, 10, 4, 0}, 0, false}}};
  const std::vector<std::vector<Detection>> dets{{{{10, 10, 10, 4, 0}, 0.9, 3}}};
  EXPECT_THROW(evaluate_map(dets, gts, 2), std::invalid_argument);
}

struct RandomEvalCase {
  std::vector<std::vector<Detection>> dets;
  std::vector<std::vector<GroundTruth>> gts;
};

RandomEvalCase random_eval_case(std::mt19937_64& rng, int images, int classes) {
  RandomEvalCase c;
  std::uniform_int_distribution<int> count(0, 5), cls(0, classes - 1), coarse(0, 4);
  std::normal_distribution<double> jitter(0.0, 2.0);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < images; ++i) {
    std::vector<GroundTruth> g;
    std::vector<Detection> d;
    const int n = count(rng);
    for (int k = 0; k < n; ++k) {
      const OrientedBox b{20.0 + 25 * k, 30 + 10 * u(rng), 14 + 6 * u(rng), 5 + 3 * u(rng), u(rng) - 0.5};
      const int c0 = cls(rng);
      g.push_back({b, c0, u(rng) < 0.1});
      const int copies = coarse(rng) % 3;
      for (int r = 0; r < copies; ++r) {
        const OrientedBox db{b.cx + jitter(rng), b.cy + jitter(rng), b.w + jitter(rng) * 0.5, b.h, b.theta + 0.1 * jitter(rng)};
        // Scores on a coarse grid so that ties occur.
        d.push_back({db, 0.2 * coarse(rng) + 0.1, u(rng) < 0.8 ? c0 : cls(rng)});
      }
    }
    for (int k = 0; k < 2; ++k) d.push_back({{150 + 10 * u(rng), 150, 10, 4, 0}, 0.2 * coarse(rng) + 0.1, cls(rng)});
    c.gts.push_back(std::move(g));
    c.dets.push_back(std::move(d));
  }
  return c;
}

TEST(EvaluateMap, MatchesBruteForceOracle) {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 30; ++t) {
    const RandomEvalCase c = random_eval_case(rng, 6, 3);
    const MapResult r07 = evaluate_map(c.dets, c.gts, 3, 0.5, ApMetric::kVoc07);
    const MapResult r12 = evaluate_map(c.dets, c.gts, 3, 0.5, ApMetric::kVoc12);
    for (int cls = 0; cls < 3; ++cls) {
      if (r07.per_class[static_cast<std::size_t>(cls)].num_gts == 0) continue;
      const auto curve = brute_force_curve(c.dets, c.gts, cls, 0.5);
      EXPECT_NEAR(r07.per_class[static_cast<std::size_t>(cls)].ap, brute_voc07(curve), 1e-12);
      EXPECT_NEAR(r12.per_class[static_cast<std::size_t>(cls)].ap, brute_voc12(curve), 1e-12);
    }
  }
}

TEST(EvaluateMap, PermutationInvariantOverImages) {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 20; ++t) {
    RandomEvalCase c = random_eval_case(rng, 5, 2);
    // Distinct scores so that the ranking does not depend on image order.
    double s = 0.999;
    for (auto& img : c.dets) {
      for (Detection& d : img) d.score = (s -= 0.003);
    }
    const double before = evaluate_map(c.dets, c.gts, 2).map;
    std::vector<std::size_t> perm{4, 2, 0, 3, 1};
    RandomEvalCase p;
    for (std::size_t i : perm) {
      p.dets.push_back(c.dets[i]);
      p.gts.push_back(c.gts[i]);
      std::reverse(p.dets.back().begin(), p.dets.back().end());
    }
    EXPECT_DOUBLE_EQ(evaluate_map(p.dets, p.gts, 2).map, before);
  }
}

TEST(EvaluateMap, NonIncreasingInIouThreshold) {
  std::mt19937_64 rng(43);
  for (int t = 0; t < 30; ++t) {
    const RandomEvalCase c = random_eval_case(rng, 6, 3);
    for (ApMetric m : {ApMetric::kVoc07, ApMetric::kVoc12}) {
      const double a = evaluate_map(c.dets, c.gts, 3, 0.3, m).map;
      const double b = evaluate_map(c.dets, c.gts, 3, 0.5, m).map;
      const double d = evaluate_map(c.dets, c.gts, 3, 0.7, m).map;
      EXPECT_GE(a + 1e-12, b);
      EXPECT_GE(b + 1e-12, d);
    }
  }
}

TEST(ImageFiles, PgmRoundTripAndPpmSize) {
  SceneSpec spec;
  spec.seed = 1;
  const Scene s = generate_scene(spec);
  const std::string dir = temp_dir("pgm");
  write_pgm(dir + "/a.pgm", s.image);
  const Tensor<float> back = read_pgm(dir + "/a.pgm");
  ASSERT_EQ(back.shape(), s.image.shape());
  for (std::size_t i = 0; i < back.size(); ++i) EXPECT_EQ(back[i], s.image[i]);
  RgbImage rgb = RgbImage::from_gray(s.image);
  for (const OrientedBox& b : s.boxes) rgb.draw_box(b, 255, 0, 0);
  write_ppm(dir + "/a.ppm", rgb);
  EXPECT_EQ(std::filesystem::file_size(dir + "/a.ppm"), std::string("P6\n128 128\n255\n").size() + 128u * 128 * 3);
  std::size_t red = 0;
  for (std::size_t i = 0; i < rgb.pixels.size(); i += 3) red += rgb.pixels[i] == 255 && rgb.pixels[i + 1] == 0;
  EXPECT_GT(red, 40u);
  EXPECT_THROW(read_pgm(dir + "/missing.pgm"), DataError);
}

}  // namespace
}  // namespace hrdet
