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

#include "hrdet/assign.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "hrdet/anchors.hpp"

namespace hrdet {
namespace {

std::vector<HorizontalBox> anchors_at(const std::vector<Point2>& centers, double size = 8.0) {
  std::vector<HorizontalBox> out;
  for (const Point2& c : centers) out.push_back({c.x, c.y, size, size});
  return out;
}

TEST(AssignRatio, RegionRule) {
  const std::vector<HorizontalBox> gts = {{0, 0, 100, 100}};
  const auto anchors = anchors_at({{0, 0}, {14, 0}, {18, 0}, {25, 0}, {200, 200}});
  const AssignResult r = assign_ratio(anchors, gts, 0.3, 0.1);
  EXPECT_EQ(r.labels, (std::vector<int>{0, 0, AssignResult::kIgnore, AssignResult::kNegative,
                                        AssignResult::kNegative}));
}

TEST(AssignRatio, SmallestGtWins) {
  const std::vector<HorizontalBox> gts = {{0, 0, 100, 100}, {2, 0, 20, 20}};
  const AssignResult r = assign_ratio(anchors_at({{0, 0}}), gts);
  EXPECT_EQ(r.labels[0], 1);
}

TEST(AssignRatio, EmptyGtsAllNegative) {
  const AssignResult r = assign_ratio(anchors_at({{0, 0}, {5, 5}}), {});
  EXPECT_EQ(r.num_negative(), 2u);
}

std::vector<HorizontalBox> random_gts(std::mt19937_64& rng, int n, double span = 128.0) {
  std::uniform_real_distribution<double> pos(0.0, span), edge(8.0, 60.0);
  std::vector<HorizontalBox> gts;
  for (int i = 0; i < n; ++i) gts.push_back({pos(rng), pos(rng), edge(rng), edge(rng)});
  return gts;
}

AnchorGrid desk_grid() {
  const std::vector<FeatureLevelSpec> levels = {{4, 32, 32}, {8, 16, 16}};
  return generate_anchors(levels, 4.0, 1.0);
}

TEST(AssignRatio, PositiveCountMonotoneInRatio) {
  std::mt19937_64 rng(5);
  const auto anchors = desk_grid().flatten();
  for (int scene = 0; scene < 20; ++scene) {
    const auto gts = random_gts(rng, 5);
    std::size_t prev = 0;
    for (double ratio = 0.05; ratio <= 1.0; ratio += 0.05) {
      const std::size_t n = assign_ratio(anchors, gts, ratio, 0.1).num_positive();
      EXPECT_GE(n, prev);
      prev = n;
    }
  }
}

TEST(AssignMaxIou, Thresholds) {
  const std::vector<HorizontalBox> gts = {{0, 0, 10, 10}};
  // IoU 1, IoU 0.5 (10x5 inside), IoU 0.
  const std::vector<HorizontalBox> anchors = {{0, 0, 10, 10}, {0, 2.5, 10, 5}, {50, 50, 10, 10}};
  const AssignResult r = assign_maxiou(anchors, gts, 0.7, 0.3);
  EXPECT_EQ(r.labels, (std::vector<int>{0, AssignResult::kIgnore, AssignResult::kNegative}));
}

TEST(AssignMaxIou, ForcedBestMatch) {
  // The GT's best anchor covers 0.4 of the union; it is promoted.
  const std::vector<HorizontalBox> gts = {{0, 0, 10, 10}};
  const std::vector<HorizontalBox> anchors = {{0, 3, 10, 4}, {100, 100, 10, 10}};
  ASSERT_NEAR(horizontal_iou(anchors[0], gts[0]), 0.4, 1e-12);
  const AssignResult r = assign_maxiou(anchors, gts, 0.7, 0.3);
  EXPECT_EQ(r.labels[0], 0);
  EXPECT_EQ(r.labels[1], AssignResult::kNegative);
}

TEST(AssignMaxIou, ForcedTieGoesToLowerIndex) {
  const std::vector<HorizontalBox> gts = {{0, 0, 10, 10}};
  const std::vector<HorizontalBox> anchors = {{100, 0, 4, 4}, {-3, 0, 4, 10}, {3, 0, 4, 10}};
  const AssignResult r = assign_maxiou(anchors, gts, 0.7, 0.3);
  EXPECT_EQ(r.labels[1], 0);
  EXPECT_EQ(r.labels[2], AssignResult::kIgnore);
}

TEST(AssignMaxIou, PartitionAndPositiveIouFloor) {
  std::mt19937_64 rng(9);
  const auto anchors = desk_grid().flatten();
  for (int scene = 0; scene < 50; ++scene) {
    const auto gts = random_gts(rng, 6);
    const AssignResult r = assign_maxiou(anchors, gts, 0.7, 0.3);
    ASSERT_EQ(r.size(), anchors.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
      const int l = r.labels[i];
      EXPECT_TRUE(l >= 0 || l == AssignResult::kNegative || l == AssignResult::kIgnore);
      if (l >= 0) {
        EXPECT_LT(static_cast<std::size_t>(l), gts.size());
        EXPECT_GE(horizontal_iou(anchors[i], gts[static_cast<std::size_t>(l)]), 0.3);
      }
    }
  }
}

TEST(AssignMaxIou, EmptyGtsAllNegative) {
  const AssignResult r = assign_maxiou(anchors_at({{0, 0}, {5, 5}}), {});
  EXPECT_EQ(r.num_negative(), 2u);
}

TEST(AssignMaxIou, RejectsBadThresholds) {
  const auto a = anchors_at({{0, 0}});
  EXPECT_THROW(assign_maxiou(a, a, 0.3, 0.7), std::invalid_argument);
}

TEST(SampleBalanced, Counts) {
  AssignResult r;
  r.labels.assign(2000, AssignResult::kNegative);
  for (int i = 0; i < 10; ++i) r.labels[static_cast<std::size_t>(i * 7)] = 0;
  for (int i = 0; i < 50; ++i) r.labels[static_cast<std::size_t>(1500 + i)] = AssignResult::kIgnore;
  const SampleResult s = sample_balanced(r, 256, 256, 1);
  EXPECT_EQ(s.pos_indices.size(), 10u);
  EXPECT_EQ(s.neg_indices.size(), 256u);
  EXPECT_EQ(std::set<std::size_t>(s.neg_indices.begin(), s.neg_indices.end()).size(), 256u);
  for (std::size_t i : s.pos_indices) EXPECT_TRUE(r.positive(i));
  for (std::size_t i : s.neg_indices) EXPECT_TRUE(r.negative(i));
  EXPECT_EQ(sampled_targets(r, s), std::vector<int>(10, 0));
}

TEST(SampleBalanced, DeterministicPerSeed) {
  AssignResult r;
  r.labels.assign(5000, AssignResult::kNegative);
  for (std::size_t i = 0; i < 5000; i += 3) r.labels[i] = 1;
  const SampleResult a = sample_balanced(r, 256, 256, 42);
  const SampleResult b = sample_balanced(r, 256, 256, 42);
  const SampleResult c = sample_balanced(r, 256, 256, 43);
  EXPECT_EQ(a.pos_indices, b.pos_indices);
  EXPECT_EQ(a.neg_indices, b.neg_indices);
  EXPECT_NE(a.neg_indices, c.neg_indices);
}

TEST(SampleBalanced, NoPositivesIsEmpty) {
  AssignResult r;
  r.labels.assign(10, AssignResult::kNegative);
  const SampleResult s = sample_balanced(r, 256, 4, 3);
  EXPECT_TRUE(s.pos_indices.empty());
  EXPECT_EQ(s.neg_indices.size(), 4u);
}

}  // namespace
}  // namespace hrdet
