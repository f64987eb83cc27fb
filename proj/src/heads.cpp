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

#include "hrdet/heads.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "hrdet/assign.hpp"
#include "hrdet/seed.hpp"

namespace hrdet {

template <typename T>
HeadParams<T>::HeadParams(const HeadsConfig& cfg) {
  const int d = cfg.feature_channels * cfg.roi.out * cfg.roi.out;
  h2o_fc1 = FcLayer<T>(cfg.hidden, d);
  h2o_fc2 = FcLayer<T>(5, cfg.hidden);
  obb_fc1 = FcLayer<T>(cfg.hidden, d);
  obb_fc2 = FcLayer<T>(cfg.hidden, cfg.hidden);
  obb_cls = FcLayer<T>(cfg.num_classes + 1, cfg.hidden);
  obb_reg = FcLayer<T>(5 * cfg.num_classes, cfg.hidden);
}

template <typename T>
void HeadParams<T>::init(std::mt19937_64& rng) {
  h2o_fc1.init_kaiming(rng);
  h2o_fc2.init_normal(0.001, rng);
  obb_fc1.init_kaiming(rng);
  obb_fc2.init_kaiming(rng);
  obb_cls.init_normal(0.01, rng);
  obb_reg.init_normal(0.001, rng);
}

template <typename T>
void HeadParams<T>::visit(const ParamVisitor<T>& fn) {
  h2o_fc1.visit("h2o.fc1", fn);
  h2o_fc2.visit("h2o.fc2", fn);
  obb_fc1.visit("obb.fc1", fn);
  obb_fc2.visit("obb.fc2", fn);
  obb_cls.visit("obb.cls", fn);
  obb_reg.visit("obb.reg", fn);
}

namespace {

template <typename T>
struct H2OCache {
  Tensor<T> pre1, h1, out;
};

template <typename T>
H2OCache<T> h2o_run(const HeadParams<T>& p, const Tensor<T>& x) {
  H2OCache<T> c;
  c.pre1 = p.h2o_fc1.forward(x);
  c.h1 = relu(c.pre1);
  c.out = p.h2o_fc2.forward(c.h1);
  return c;
}

template <typename T>
struct ObbCache {
  Tensor<T> pre1, h1, pre2, h2;
  ObbOutput<T> out;
};

template <typename T>
ObbCache<T> obb_run(const HeadParams<T>& p, const Tensor<T>& x) {
  ObbCache<T> c;
  c.pre1 = p.obb_fc1.forward(x);
  c.h1 = relu(c.pre1);
  c.pre2 = p.obb_fc2.forward(c.h1);
  c.h2 = relu(c.pre2);
  c.out.logits = p.obb_cls.forward(c.h2);
  c.out.reg = p.obb_reg.forward(c.h2);
  return c;
}

// Up to num_samples * pos_fraction positives, negatives fill the rest.
SampleResult sample_rois(const AssignResult& assign, const HeadsConfig& cfg, std::uint64_t seed) {
  const auto cap = static_cast<std::size_t>(std::floor(static_cast<double>(cfg.num_samples) * cfg.pos_fraction));
  const std::size_t pos = std::min(assign.num_positive(), cap);
  return sample_balanced(assign, pos, cfg.num_samples - pos, seed);
}

Delta5 normalize(const Delta5& d, const std::array<double, 5>& s) {
  return {d.dx / s[0], d.dy / s[1], d.dw / s[2], d.dh / s[3], d.dtheta / s[4]};
}

Delta5 denormalize(const double* v, const std::array<double, 5>& s) {
  return {v[0] * s[0], v[1] * s[1], v[2] * s[2], v[3] * s[3], v[4] * s[4]};
}

template <typename T>
void put_row(Tensor<T>& t, std::size_t row, const Delta5& d) {
  T* r = t.data() + row * 5;
  r[0] = static_cast<T>(d.dx);
  r[1] = static_cast<T>(d.dy);
  r[2] = static_cast<T>(d.dw);
  r[3] = static_cast<T>(d.dh);
  r[4] = static_cast<T>(d.dtheta);
}

}  // namespace

OrientedBox horizontal_region(const HorizontalBox& b) { return {b.cx, b.cy, b.w, b.h, 0.0}; }

template <typename T>
Tensor<T> h2o_forward(const HeadParams<T>& params, const Tensor<T>& roi_feats) {
  return h2o_run(params, roi_feats).out;
}

template <typename T>
std::vector<OrientedBox> h2o_decode(std::span<const HorizontalBox> proposals, const Tensor<T>& deltas,
                                    const std::array<double, 5>& stds) {
  if (deltas.rank() != 2 || deltas.dim(1) != 5 || static_cast<std::size_t>(deltas.dim(0)) != proposals.size()) {
    throw ShapeError("h2o_decode: deltas must be (N, 5) for N proposals");
  }
  std::vector<OrientedBox> out;
  out.reserve(proposals.size());
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    double v[5];
    for (int k = 0; k < 5; ++k) v[k] = static_cast<double>(deltas[i * 5 + static_cast<std::size_t>(k)]);
    out.push_back(decode_o(proposals[i], denormalize(v, stds)));
  }
  return out;
}

template <typename T>
ObbOutput<T> obb_forward(const HeadParams<T>& params, const Tensor<T>& roi_feats) {
  return obb_run(params, roi_feats).out;
}

template <typename T>
RcnnTrainOutput rcnn_forward_train(const Tensor<T>& feature, std::span<const Proposal> proposals,
                                   std::span<const OrientedBox> gts, std::span<const int> labels,
                                   const HeadsConfig& cfg, HeadParams<T>& params, std::uint64_t seed,
                                   Tensor<T>& grad_feature) {
  if (gts.size() != labels.size()) throw std::invalid_argument("rcnn: gts/labels length mismatch");
  RcnnTrainOutput out;
  std::vector<HorizontalBox> rect_gts;
  for (const OrientedBox& g : gts) rect_gts.push_back(rectangularize(g));
  std::vector<HorizontalBox> cands;
  for (const Proposal& p : proposals) cands.push_back(p.box);
  cands.insert(cands.end(), rect_gts.begin(), rect_gts.end());
  if (cands.empty()) return out;

  // Horizontal-to-oriented stage.
  const AssignResult h_assign = assign_maxiou(cands, rect_gts, cfg.h2o_pos_iou, cfg.h2o_neg_iou);
  const SampleResult h_sample = sample_rois(h_assign, cfg, mix_seed(seed, 11));
  std::vector<std::size_t> rois(h_sample.pos_indices);
  rois.insert(rois.end(), h_sample.neg_indices.begin(), h_sample.neg_indices.end());
  if (rois.empty()) return out;
  out.h2o_positives = h_sample.pos_indices.size();
  const std::size_t n1 = rois.size(), np1 = h_sample.pos_indices.size();
  std::vector<HorizontalBox> roi_boxes;
  std::vector<OrientedBox> regions;
  for (std::size_t i : rois) {
    roi_boxes.push_back(cands[i]);
    regions.push_back(horizontal_region(cands[i]));
  }
  const Tensor<T> x1 = rotated_roi_align_batch(feature, regions, cfg.roi);
  const H2OCache<T> hc = h2o_run(params, x1);
  Tensor<T> g_d({static_cast<int>(n1), 5});
  if (np1 > 0) {
    Tensor<T> pred({static_cast<int>(np1), 5}), target({static_cast<int>(np1), 5});
    for (std::size_t k = 0; k < np1; ++k) {
      const std::size_t i = rois[k];
      std::copy(hc.out.data() + k * 5, hc.out.data() + k * 5 + 5, pred.data() + k * 5);
      put_row(target, k, normalize(encode_o(cands[i], gts[static_cast<std::size_t>(h_assign.labels[i])]), cfg.h2o_stds));
    }
    const LossGrad<T> l = smooth_l1(pred, target, static_cast<T>(cfg.smooth_l1_beta), static_cast<T>(n1));
    out.loss_h2o = static_cast<double>(l.loss);
    std::copy(l.grad.data(), l.grad.data() + np1 * 5, g_d.data());
  }
  {
    const Tensor<T> g_h1 = params.h2o_fc2.backward(hc.h1, g_d);
    const Tensor<T> g_pre1 = relu_backward(hc.pre1, g_h1);
    const Tensor<T> g_x1 = params.h2o_fc1.backward(x1, g_pre1);
    rotated_roi_align_batch_backward(std::span<const OrientedBox>(regions), cfg.roi, g_x1, grad_feature);
  }

  // Oriented stage on decoded (detached) proposals plus the GT boxes.
  std::vector<OrientedBox> ocands = h2o_decode(std::span<const HorizontalBox>(roi_boxes), hc.out, cfg.h2o_stds);
  ocands.insert(ocands.end(), gts.begin(), gts.end());
  AssignResult o_assign;
  o_assign.labels.assign(ocands.size(), AssignResult::kNegative);
  if (!gts.empty()) {
    const std::vector<double> ious = rotated_iou_matrix(ocands, gts);
    for (std::size_t i = 0; i < ocands.size(); ++i) {
      const double* row = ious.data() + i * gts.size();
      const std::size_t best = static_cast<std::size_t>(std::max_element(row, row + gts.size()) - row);
      if (row[best] >= cfg.obb_pos_iou) o_assign.labels[i] = static_cast<int>(best);
    }
  }
  const SampleResult o_sample = sample_rois(o_assign, cfg, mix_seed(seed, 12));
  std::vector<std::size_t> orois(o_sample.pos_indices);
  orois.insert(orois.end(), o_sample.neg_indices.begin(), o_sample.neg_indices.end());
  out.obb_positives = o_sample.pos_indices.size();
  const std::size_t n2 = orois.size(), np2 = o_sample.pos_indices.size();
  std::vector<OrientedBox> oboxes;
  for (std::size_t i : orois) oboxes.push_back(ocands[i]);
  const Tensor<T> x2 = rotated_roi_align_batch(feature, oboxes, cfg.roi);
  const ObbCache<T> oc = obb_run(params, x2);

  std::vector<int> cls_labels(n2, 0);
  for (std::size_t k = 0; k < np2; ++k) {
    cls_labels[k] = labels[static_cast<std::size_t>(o_assign.labels[orois[k]])] + 1;
  }
  const LossGrad<T> ce = softmax_cross_entropy(oc.out.logits, cls_labels);
  out.loss_cls = static_cast<double>(ce.loss);
  Tensor<T> g_reg(oc.out.reg.shape());
  if (np2 > 0) {
    Tensor<T> pred({static_cast<int>(np2), 5}), target({static_cast<int>(np2), 5});
    const std::size_t stride = static_cast<std::size_t>(5 * cfg.num_classes);
    for (std::size_t k = 0; k < np2; ++k) {
      const std::size_t c = static_cast<std::size_t>(cls_labels[k] - 1);
      std::copy(oc.out.reg.data() + k * stride + 5 * c, oc.out.reg.data() + k * stride + 5 * c + 5, pred.data() + k * 5);
      const OrientedBox& gt = gts[static_cast<std::size_t>(o_assign.labels[orois[k]])];
      put_row(target, k, normalize(encode_obb(oboxes[k], gt), cfg.obb_stds));
    }
    const LossGrad<T> l = smooth_l1(pred, target, static_cast<T>(cfg.smooth_l1_beta), static_cast<T>(n2));
    out.loss_reg = static_cast<double>(l.loss);
    for (std::size_t k = 0; k < np2; ++k) {
      const std::size_t c = static_cast<std::size_t>(cls_labels[k] - 1);
      std::copy(l.grad.data() + k * 5, l.grad.data() + k * 5 + 5, g_reg.data() + k * stride + 5 * c);
    }
  }
  Tensor<T> g_h2 = params.obb_cls.backward(oc.h2, ce.grad);
  g_h2 += params.obb_reg.backward(oc.h2, g_reg);
  const Tensor<T> g_pre2 = relu_backward(oc.pre2, g_h2);
  const Tensor<T> g_h1 = params.obb_fc2.backward(oc.h1, g_pre2);
  const Tensor<T> g_pre1 = relu_backward(oc.pre1, g_h1);
  const Tensor<T> g_x2 = params.obb_fc1.backward(x2, g_pre1);
  rotated_roi_align_batch_backward(std::span<const OrientedBox>(oboxes), cfg.roi, g_x2, grad_feature);
  return out;
}

std::vector<Detection> finalize_detections(std::vector<Detection> candidates, const HeadsConfig& cfg) {
  std::map<int, std::vector<std::size_t>> per_class;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    candidates[i].box = canonicalize(candidates[i].box);
    if (candidates[i].score >= cfg.score_thr) per_class[candidates[i].class_id].push_back(i);
  }
  std::vector<Detection> kept;
  for (const auto& [cls, idx] : per_class) {
    std::vector<OrientedBox> boxes;
    std::vector<double> scores;
    for (std::size_t i : idx) {
      boxes.push_back(candidates[i].box);
      scores.push_back(candidates[i].score);
    }
    for (std::size_t k : rotated_nms(boxes, scores, cfg.nms_iou)) kept.push_back(candidates[idx[k]]);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const Detection& a, const Detection& b) { return a.score > b.score; });
  if (kept.size() > static_cast<std::size_t>(cfg.max_detections)) kept.resize(static_cast<std::size_t>(cfg.max_detections));
  return kept;
}

template <typename T>
std::vector<Detection> detect(const Tensor<T>& feature, std::span<const Proposal> proposals, const HeadsConfig& cfg,
                              const HeadParams<T>& params) {
  if (proposals.empty()) return {};
  std::vector<HorizontalBox> boxes;
  std::vector<OrientedBox> regions;
  for (const Proposal& p : proposals) {
    boxes.push_back(p.box);
    regions.push_back(horizontal_region(p.box));
  }
  const Tensor<T> x1 = rotated_roi_align_batch(feature, regions, cfg.roi);
  const std::vector<OrientedBox> oriented = h2o_decode(std::span<const HorizontalBox>(boxes), h2o_forward(params, x1), cfg.h2o_stds);
  const Tensor<T> x2 = rotated_roi_align_batch(feature, oriented, cfg.roi);
  const ObbOutput<T> o = obb_forward(params, x2);
  const Tensor<T> prob = softmax(o.logits);
  const int c1 = cfg.num_classes + 1;
  std::vector<Detection> cands;
  for (std::size_t i = 0; i < oriented.size(); ++i) {
    for (int c = 0; c < cfg.num_classes; ++c) {
      const double score = static_cast<double>(prob[i * static_cast<std::size_t>(c1) + static_cast<std::size_t>(c + 1)]);
      if (score < cfg.score_thr) continue;
      double v[5];
      const T* r = o.reg.data() + i * static_cast<std::size_t>(5 * cfg.num_classes) + static_cast<std::size_t>(5 * c);
      for (int k = 0; k < 5; ++k) v[k] = static_cast<double>(r[k]);
      cands.push_back({decode_obb(oriented[i], denormalize(v, cfg.obb_stds)), score, c});
    }
  }
  return finalize_detections(std::move(cands), cfg);
}

#define HRDET_INSTANTIATE(T)                                                                                       \
  template struct HeadParams<T>;                                                                                   \
  template Tensor<T> h2o_forward<T>(const HeadParams<T>&, const Tensor<T>&);                                        \
  template std::vector<OrientedBox> h2o_decode<T>(std::span<const HorizontalBox>, const Tensor<T>&,                 \
                                                  const std::array<double, 5>&);                                   \
  template ObbOutput<T> obb_forward<T>(const HeadParams<T>&, const Tensor<T>&);                                     \
  template RcnnTrainOutput rcnn_forward_train<T>(const Tensor<T>&, std::span<const Proposal>,                       \
                                                 std::span<const OrientedBox>, std::span<const int>,               \
                                                 const HeadsConfig&, HeadParams<T>&, std::uint64_t, Tensor<T>&);   \
  template std::vector<Detection> detect<T>(const Tensor<T>&, std::span<const Proposal>, const HeadsConfig&,        \
                                            const HeadParams<T>&);

HRDET_INSTANTIATE(float)
HRDET_INSTANTIATE(double)

#undef HRDET_INSTANTIATE

}  // namespace hrdet
