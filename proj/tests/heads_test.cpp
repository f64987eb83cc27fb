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

#include <cmath>
#include <map>
#include <random>
#include <string>

#include "hrdet/heads.hpp"
#include "oracles.hpp"

namespace hrdet {
namespace {

using oracle::random_tensor;

double inner(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

TEST(RoiAlign, ConstantFeatureGivesConstantOutput) {
  Tensor<double> f({3, 16, 16});
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) f.at(c, y, x) = 1.5 + c;
    }
  }
  const Tensor<double> out = rotated_roi_align(f, OrientedBox{32, 30, 20, 12, 0.7}, {7, 4.0, 2});
  ASSERT_EQ(out.shape(), (std::vector<int>{3, 7, 7}));
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 7; ++i) {
      for (int j = 0; j < 7; ++j) EXPECT_NEAR(out.at(c, i, j), 1.5 + c, 1e-12);
    }
  }
}

TEST(RoiAlign, CellAlignedBoxReadsExactCells) {
  std::mt19937_64 rng(1);
  const Tensor<double> f = random_tensor<double>({2, 10, 10}, rng);
  // Bins of one stride with one sample each land on cell centers.
  const int x0 = 3, y0 = 2;
  const HorizontalBox box{(x0 + 1.5) * 4.0, (y0 + 1.5) * 4.0, 12.0, 12.0};
  const Tensor<double> out = roi_align(f, box, {3, 4.0, 1});
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) EXPECT_NEAR(out.at(c, i, j), f.at(c, y0 + i, x0 + j), 1e-12);
    }
  }
}

TEST(RoiAlign, ZeroAngleMatchesHorizontal) {
  std::mt19937_64 rng(2);
  const Tensor<double> f = random_tensor<double>({3, 12, 12}, rng);
  const HorizontalBox hb{22.3, 19.1, 17.5, 9.25};
  const Tensor<double> a = roi_align(f, hb, {7, 4.0, 2});
  const Tensor<double> b = rotated_roi_align(f, OrientedBox{hb.cx, hb.cy, hb.w, hb.h, 0.0}, {7, 4.0, 2});
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(RoiAlign, QuarterTurnSamplesRotatedGrid) {
  // Channel 0 holds the x coordinate and channel 1 the y coordinate of each
  // cell; bilinear reads of a linear field are exact.
  Tensor<double> f({2, 16, 16});
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      f.at(0, y, x) = x;
      f.at(1, y, x) = y;
    }
  }
  const OrientedBox box{32, 30, 20, 12, 0.5 * kPi};
  const int out = 5;
  const Tensor<double> r = rotated_roi_align(f, box, {out, 4.0, 2});
  for (int i = 0; i < out; ++i) {
    for (int j = 0; j < out; ++j) {
      const double u = -box.w / 2 + (j + 0.5) * box.w / out;
      const double v = -box.h / 2 + (i + 0.5) * box.h / out;
      // R(pi/2) (u, v) = (-v, u).
      EXPECT_NEAR(r.at(0, i, j), (box.cx - v) / 4.0 - 0.5, 1e-9);
      EXPECT_NEAR(r.at(1, i, j), (box.cy + u) / 4.0 - 0.5, 1e-9);
    }
  }
}

TEST(RoiAlign, MatchesSupersamplingOracle) {
  Tensor<double> f({2, 24, 24});
  for (int c = 0; c < 2; ++c) {
    for (int y = 0; y < 24; ++y) {
      for (int x = 0; x < 24; ++x) f.at(c, y, x) = std::sin(0.35 * x + 0.2 * y + c) + 0.1 * c * x;
    }
  }
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(30, 66), ext(8, 30), ang(-kPi / 2, kPi / 2);
  for (int t = 0; t < 20; ++t) {
    const OrientedBox box{pos(rng), pos(rng), ext(rng), ext(rng), ang(rng)};
    const Tensor<double> got = rotated_roi_align(f, box, {7, 4.0, 8});
    const Tensor<double> ref = oracle::roi_supersample(f, box, 7, 4.0, 32);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], ref[i], 2e-2);
  }
}

TEST(RoiAlign, BackwardIsAdjoint) {
  std::mt19937_64 rng(4);
  const Tensor<double> f = random_tensor<double>({3, 12, 12}, rng);
  const RoiAlignSpec spec{5, 4.0, 2};
  for (int t = 0; t < 10; ++t) {
    // Includes boxes reaching past the border, where reads are zero padded.
    const OrientedBox box = oracle::random_box(rng, 48.0, 4.0, 40.0);
    const Tensor<double> y = rotated_roi_align(f, box, spec);
    const Tensor<double> r = random_tensor<double>(y.shape(), rng);
    Tensor<double> g(f.shape());
    rotated_roi_align_backward(box, spec, r, g);
    EXPECT_NEAR(inner(y, r), inner(f, g), 1e-10 * std::max(1.0, std::abs(inner(y, r))));
  }
}

TEST(RoiAlign, BatchParallelEqualsSerial) {
  std::mt19937_64 rng(5);
  const Tensor<double> f = random_tensor<double>({4, 16, 16}, rng);
  std::vector<OrientedBox> boxes;
  for (int i = 0; i < 64; ++i) boxes.push_back(oracle::random_box(rng, 64.0, 4.0, 40.0));
  const Tensor<double> a = rotated_roi_align_batch(f, boxes, {7, 4.0, 2});
  const Tensor<double> b = serial::rotated_roi_align_batch(f, boxes, {7, 4.0, 2});
  ASSERT_EQ(a.shape(), (std::vector<int>{64, 4 * 49}));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  // Batch rows equal single-box pooling.
  const Tensor<double> one = rotated_roi_align(f, boxes[17], {7, 4.0, 2});
  for (std::size_t i = 0; i < one.size(); ++i) EXPECT_EQ(a[17 * one.size() + i], one[i]);
}

TEST(RoiAlign, BatchBackwardMatchesPerBox) {
  std::mt19937_64 rng(6);
  const Tensor<double> f = random_tensor<double>({3, 10, 10}, rng);
  std::vector<OrientedBox> boxes;
  for (int i = 0; i < 6; ++i) boxes.push_back(oracle::random_box(rng, 40.0, 4.0, 30.0));
  const RoiAlignSpec spec{3, 4.0, 2};
  const Tensor<double> up = random_tensor<double>({6, 27}, rng);
  Tensor<double> batch(f.shape()), single(f.shape());
  rotated_roi_align_batch_backward(std::span<const OrientedBox>(boxes), spec, up, batch);
  for (int i = 0; i < 6; ++i) {
    Tensor<double> row({3, 3, 3});
    std::copy(up.data() + i * 27, up.data() + (i + 1) * 27, row.data());
    rotated_roi_align_backward(boxes[static_cast<std::size_t>(i)], spec, row, single);
  }
  for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(batch[i], single[i], 1e-12);
}

TEST(RoiAlign, RejectsBadInput) {
  Tensor<double> f({2, 8, 8});
  EXPECT_THROW(rotated_roi_align(f, OrientedBox{10, 10, 0, 5, 0}, {}), std::invalid_argument);
  EXPECT_THROW(rotated_roi_align(f, OrientedBox{10, NAN, 4, 5, 0}, {}), std::invalid_argument);
  EXPECT_THROW(rotated_roi_align(Tensor<double>({8, 8}), OrientedBox{10, 10, 4, 5, 0}, {}), ShapeError);
}

HeadsConfig small_heads() {
  HeadsConfig cfg;
  cfg.num_classes = 2;
  cfg.feature_channels = 3;
  cfg.hidden = 12;
  cfg.roi = {3, 4.0, 2};
  cfg.num_samples = 16;
  return cfg;
}

TEST(H2OHead, ZeroWeightsKeepProposalsHorizontal) {
  const HeadsConfig cfg = small_heads();
  HeadParams<double> p(cfg);
  std::mt19937_64 rng(7);
  p.init(rng);
  p.h2o_fc2.w.zero();
  p.h2o_fc2.b.zero();
  const Tensor<double> feats = random_tensor<double>({4, 27}, rng);
  const Tensor<double> d = h2o_forward(p, feats);
  for (double v : d.values()) EXPECT_EQ(v, 0.0);
  const std::vector<HorizontalBox> props{{10, 12, 20, 8}, {30, 30, 9, 9}, {5, 6, 7, 3}, {40, 8, 16, 4}};
  const std::vector<OrientedBox> boxes = h2o_decode(std::span<const HorizontalBox>(props), d, cfg.h2o_stds);
  for (std::size_t i = 0; i < props.size(); ++i) {
    EXPECT_NEAR(rotated_iou(boxes[i], to_oriented(props[i])), 1.0, 1e-12);
  }
}

TEST(H2OHead, DecodeAppliesStds) {
  const HeadsConfig cfg = small_heads();
  const std::vector<HorizontalBox> props{{10, 12, 20, 8}};
  Tensor<double> d({1, 5});
  d[0] = 1.0;  // dx of 1 std = 0.1 * w
  const std::vector<OrientedBox> boxes = h2o_decode(std::span<const HorizontalBox>(props), d, cfg.h2o_stds);
  EXPECT_NEAR(boxes[0].cx, 12.0, 1e-12);
  EXPECT_NEAR(boxes[0].cy, 12.0, 1e-12);
}

TEST(Heads, ParameterShapes) {
  const HeadsConfig cfg = small_heads();
  HeadParams<double> p(cfg);
  std::map<std::string, std::vector<int>> shapes;
  p.visit([&](const std::string& n, Tensor<double>& v, Tensor<double>& g) {
    EXPECT_EQ(v.shape(), g.shape());
    shapes[n] = v.shape();
  });
  EXPECT_EQ(shapes["h2o.fc1.weight"], (std::vector<int>{12, 27}));
  EXPECT_EQ(shapes["h2o.fc2.weight"], (std::vector<int>{5, 12}));
  EXPECT_EQ(shapes["obb.cls.weight"], (std::vector<int>{3, 12}));
  EXPECT_EQ(shapes["obb.reg.weight"], (std::vector<int>{10, 12}));
}

TEST(FinalizeDetections, ThresholdNmsAndCap) {
  HeadsConfig cfg = small_heads();
  cfg.max_detections = 3;
  std::vector<Detection> c{
      {{10, 10, 20, 8, 0.1}, 0.9, 0},  {{10.2, 10, 20, 8, 0.1}, 0.8, 0},  // duplicate
      {{10, 10, 20, 8, 0.1}, 0.7, 1},                                    // other class survives
      {{40, 40, 10, 5, 0}, 0.04, 0},                                     // below threshold
      {{60, 60, 10, 5, 0}, 0.5, 1},   {{80, 80, 5, 10, 0}, 0.6, 0},
  };
  const std::vector<Detection> out = finalize_detections(c, cfg);
  ASSERT_EQ(out.size(), 3u);
  EXPECT_DOUBLE_EQ(out[0].score, 0.9);
  EXPECT_DOUBLE_EQ(out[1].score, 0.7);
  EXPECT_EQ(out[1].class_id, 1);
  EXPECT_DOUBLE_EQ(out[2].score, 0.6);
  // Canonical long-edge form.
  EXPECT_GE(out[2].box.w, out[2].box.h);
}

TEST(Detect, EmptyProposalsGiveNoDetections) {
  const HeadsConfig cfg = small_heads();
  HeadParams<double> p(cfg);
  std::mt19937_64 rng(8);
  p.init(rng);
  EXPECT_TRUE(detect(random_tensor<double>({3, 8, 8}, rng), std::span<const Proposal>{}, cfg, p).empty());
}

TEST(Detect, DetectionsAreScoredAndSorted) {
  const HeadsConfig cfg = small_heads();
  HeadParams<double> p(cfg);
  std::mt19937_64 rng(9);
  p.init(rng);
  const Tensor<double> f = random_tensor<double>({3, 8, 8}, rng);
  std::vector<Proposal> props;
  for (int i = 0; i < 10; ++i) props.push_back({{4.0 + 2.5 * i, 16, 10, 6}, 0.5});
  const std::vector<Detection> d = detect(f, std::span<const Proposal>(props), cfg, p);
  EXPECT_LE(d.size(), static_cast<std::size_t>(cfg.max_detections));
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_GE(d[i].score, cfg.score_thr);
    EXPECT_LT(d[i].class_id, cfg.num_classes);
    if (i > 0) {
      EXPECT_GE(d[i - 1].score, d[i].score);
    }
  }
}

struct RcnnFixture {
  HeadsConfig cfg = small_heads();
  HeadParams<double> params;
  Tensor<double> feature;
  std::vector<Proposal> proposals;
  std::vector<OrientedBox> gts{{12, 14, 18, 8, 0.3}, {22, 20, 12, 6, -1.1}};
  std::vector<int> labels{0, 1};

  explicit RcnnFixture(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    params = HeadParams<double>(cfg);
    params.init(rng);
    fill_normal(params.h2o_fc2.w, 0.05, rng);
    fill_normal(params.obb_reg.w, 0.05, rng);
    fill_normal(params.obb_cls.w, 0.3, rng);
    feature = random_tensor<double>({3, 8, 8}, rng);
    std::normal_distribution<double> jitter(0.0, 1.5);
    for (const OrientedBox& g : gts) {
      const HorizontalBox r = rectangularize(g);
      for (int k = 0; k < 6; ++k) {
        proposals.push_back({{r.cx + jitter(rng), r.cy + jitter(rng), r.w + jitter(rng), r.h + jitter(rng)}, 0.5});
      }
    }
    for (int k = 0; k < 6; ++k) proposals.push_back({{4.0 + 4 * k, 28, 6, 5}, 0.1});
  }

  RcnnTrainOutput run(HeadParams<double>& p, const Tensor<double>& f, Tensor<double>& grad) const {
    return rcnn_forward_train(f, std::span<const Proposal>(proposals), std::span<const OrientedBox>(gts),
                              std::span<const int>(labels), cfg, p, 17, grad);
  }
};

TEST(RcnnTrain, LossesFiniteWithPositives) {
  RcnnFixture fx(10);
  Tensor<double> grad(fx.feature.shape());
  HeadParams<double> p = fx.params;
  const RcnnTrainOutput out = fx.run(p, fx.feature, grad);
  EXPECT_GT(out.h2o_positives, 0u);
  EXPECT_GT(out.obb_positives, 0u);
  EXPECT_GT(out.loss_h2o, 0.0);
  EXPECT_GT(out.loss_cls, 0.0);
  EXPECT_GT(out.loss_reg, 0.0);
  EXPECT_TRUE(grad.all_finite());
}

TEST(RcnnTrain, NoGroundTruthOnlyClassifies) {
  RcnnFixture fx(11);
  fx.gts.clear();
  fx.labels.clear();
  Tensor<double> grad(fx.feature.shape());
  HeadParams<double> p = fx.params;
  const RcnnTrainOutput out = fx.run(p, fx.feature, grad);
  EXPECT_EQ(out.h2o_positives, 0u);
  EXPECT_EQ(out.loss_h2o, 0.0);
  EXPECT_EQ(out.loss_reg, 0.0);
  EXPECT_GT(out.loss_cls, 0.0);
}

// The oriented stage pools at decoded boxes that are treated as constants,
// so each stage's parameters are checked against that stage's own loss.
TEST(RcnnGradients, ParametersMatchFiniteDifferences) {
  RcnnFixture fx(12);
  HeadParams<double> work = fx.params;
  Tensor<double> grad(fx.feature.shape());
  fx.run(work, fx.feature, grad);
  std::map<std::string, Tensor<double>*> analytic, values;
  work.visit([&](const std::string& n, Tensor<double>&, Tensor<double>& g) { analytic[n] = &g; });
  fx.params.visit([&](const std::string& n, Tensor<double>& v, Tensor<double>&) { values[n] = &v; });
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> pick(0, 1 << 20);
  for (const auto& [name, v] : values) {
    const bool h2o = name.rfind("h2o.", 0) == 0;
    for (int t = 0; t < 5; ++t) {
      const std::size_t i = pick(rng) % v->size();
      const double orig = (*v)[i], eps = 1e-6;
      auto loss = [&]() {
        HeadParams<double> p = fx.params;
        Tensor<double> g(fx.feature.shape());
        const RcnnTrainOutput o = fx.run(p, fx.feature, g);
        return h2o ? o.loss_h2o : o.loss_cls + o.loss_reg;
      };
      (*v)[i] = orig + eps;
      const double up = loss();
      (*v)[i] = orig - eps;
      const double down = loss();
      (*v)[i] = orig;
      const double num = (up - down) / (2 * eps);
      EXPECT_NEAR((*analytic[name])[i], num, 1e-3 * std::max(1.0, std::abs(num))) << name << "[" << i << "]";
      EXPECT_NEAR((*analytic[name])[i], num, 1e-6 * std::max(1.0, std::abs(num))) << name << "[" << i << "]";
    }
  }
}

TEST(RcnnGradients, FeatureMatchesFiniteDifferencesWithFixedOrientation) {
  // Zero h2o output weights make the decoded boxes independent of the feature.
  RcnnFixture fx(13);
  fx.params.h2o_fc2.w.zero();
  HeadParams<double> work = fx.params;
  Tensor<double> grad(fx.feature.shape());
  fx.run(work, fx.feature, grad);
  std::mt19937_64 rng(98);
  std::uniform_int_distribution<std::size_t> pick(0, 1 << 20);
  Tensor<double> f = fx.feature;
  for (int t = 0; t < 20; ++t) {
    const std::size_t i = pick(rng) % f.size();
    const double orig = f[i], eps = 1e-6;
    auto loss = [&]() {
      HeadParams<double> p = fx.params;
      Tensor<double> g(f.shape());
      const RcnnTrainOutput o = fx.run(p, f, g);
      return o.loss_h2o + o.loss_cls + o.loss_reg;
    };
    f[i] = orig + eps;
    const double up = loss();
    f[i] = orig - eps;
    const double down = loss();
    f[i] = orig;
    const double num = (up - down) / (2 * eps);
    EXPECT_NEAR(grad[i], num, 1e-6 * std::max(1.0, std::abs(num))) << i;
  }
}

TEST(RcnnTrain, DeterministicForFixedSeed) {
  RcnnFixture fx(14);
  HeadParams<double> a = fx.params, b = fx.params;
  Tensor<double> ga(fx.feature.shape()), gb(fx.feature.shape());
  const RcnnTrainOutput oa = fx.run(a, fx.feature, ga);
  const RcnnTrainOutput ob = fx.run(b, fx.feature, gb);
  EXPECT_EQ(oa.loss_h2o, ob.loss_h2o);
  EXPECT_EQ(oa.loss_cls, ob.loss_cls);
  EXPECT_EQ(oa.loss_reg, ob.loss_reg);
  for (std::size_t i = 0; i < ga.size(); ++i) EXPECT_EQ(ga[i], gb[i]);
}

}  // namespace
}  // namespace hrdet
