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

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace hrdet {

std::size_t AssignResult::num_positive() const {
  return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l >= 0; }));
}

std::size_t AssignResult::num_negative() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kNegative));
}

namespace {

bool center_in_region(const HorizontalBox& anchor, const HorizontalBox& gt, double factor) {
  return std::abs(anchor.cx - gt.cx) <= 0.5 * factor * gt.w && std::abs(anchor.cy - gt.cy) <= 0.5 * factor * gt.h;
}

}  // namespace

AssignResult assign_ratio(std::span<const HorizontalBox> anchors, std::span<const HorizontalBox> rect_gts,
                          double pos_ratio, double ignore_margin) {
  if (pos_ratio <= 0 || ignore_margin < 0) throw std::invalid_argument("assign_ratio: bad ratios");
  AssignResult res;
  res.labels.assign(anchors.size(), AssignResult::kNegative);
  const double ignore_ratio = pos_ratio + ignore_margin;
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    int best = -1;
    bool ignored = false;
    for (std::size_t g = 0; g < rect_gts.size(); ++g) {
      if (center_in_region(anchors[a], rect_gts[g], pos_ratio)) {
        if (best < 0 || rect_gts[g].area() < rect_gts[static_cast<std::size_t>(best)].area()) best = static_cast<int>(g);
      } else if (center_in_region(anchors[a], rect_gts[g], ignore_ratio)) {
        ignored = true;
      }
    }
    if (best >= 0) {
      res.labels[a] = best;
    } else if (ignored) {
      res.labels[a] = AssignResult::kIgnore;
    }
  }
  return res;
}

AssignResult assign_maxiou(std::span<const HorizontalBox> anchors, std::span<const HorizontalBox> rect_gts,
                           double pos_thr, double neg_thr, double min_pos_iou) {
  if (!(0 <= neg_thr && neg_thr <= pos_thr && pos_thr <= 1)) throw std::invalid_argument("assign_maxiou: bad thresholds");
  if (min_pos_iou < 0) min_pos_iou = neg_thr;
  AssignResult res;
  res.labels.assign(anchors.size(), AssignResult::kNegative);
  if (rect_gts.empty()) return res;
  const std::vector<double> ious = horizontal_iou_matrix(anchors, rect_gts);
  const std::size_t ng = rect_gts.size();
  for (std::size_t a = 0; a < anchors.size(); ++a) {
    double best = -1;
    int arg = -1;
    for (std::size_t g = 0; g < ng; ++g) {
      if (ious[a * ng + g] > best) {
        best = ious[a * ng + g];
        arg = static_cast<int>(g);
      }
    }
    if (best >= pos_thr) {
      res.labels[a] = arg;
    } else if (best >= neg_thr) {
      res.labels[a] = AssignResult::kIgnore;
    }
  }
  for (std::size_t g = 0; g < ng; ++g) {
    double best = 0;
    std::size_t arg = anchors.size();
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      if (ious[a * ng + g] > best) {
        best = ious[a * ng + g];
        arg = a;
      }
    }
    if (arg < anchors.size() && best >= min_pos_iou) res.labels[arg] = static_cast<int>(g);
  }
  return res;
}

namespace {

std::vector<std::size_t> draw(std::vector<std::size_t> pool, std::size_t k, std::mt19937_64& rng) {
  if (pool.size() > k) {
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(k);
  }
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace

SampleResult sample_balanced(const AssignResult& assign, std::size_t num_pos, std::size_t num_neg,
                             std::uint64_t rng_seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < assign.size(); ++i) {
    if (assign.positive(i)) {
      pos.push_back(i);
    } else if (assign.negative(i)) {
      neg.push_back(i);
    }
  }
  std::mt19937_64 rng(rng_seed);
  SampleResult out;
  out.pos_indices = draw(std::move(pos), num_pos, rng);
  out.neg_indices = draw(std::move(neg), num_neg, rng);
  return out;
}

std::vector<int> sampled_targets(const AssignResult& assign, const SampleResult& sample) {
  std::vector<int> t;
  t.reserve(sample.pos_indices.size());
  for (std::size_t i : sample.pos_indices) t.push_back(assign.labels[i]);
  return t;
}

}  // namespace hrdet
