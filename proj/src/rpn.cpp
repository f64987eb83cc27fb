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

#include "hrdet/rpn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "hrdet/oaware.hpp"
#include "hrdet/seed.hpp"

namespace hrdet {

IouLoss iou_loss(const HorizontalBox& pred, const HorizontalBox& target, double weight, double eps) {
  IouLoss out;
  const double x1 = pred.x1(), x2 = pred.x2(), y1 = pred.y1(), y2 = pred.y2();
  const double ix1 = std::max(x1, target.x1()), ix2 = std::min(x2, target.x2());
  const double iy1 = std::max(y1, target.y1()), iy2 = std::min(y2, target.y2());
  const double iw = ix2 - ix1, ih = iy2 - iy1;
  const double floor_loss = -weight * std::log(eps);
  if (iw <= 0 || ih <= 0) {
    out.loss = floor_loss;
    out.clamped = true;
    return out;
  }
  const double inter = iw * ih;
  const double uni = pred.area() + target.area() - inter;
  const double iou = inter / uni;
  if (!(iou >= eps)) {
    out.loss = floor_loss;
    out.clamped = true;
    return out;
  }
  out.loss = -weight * std::log(iou);
  const double dl_diou = -weight / iou;
  const double di_coef = (uni + inter) / (uni * uni);  // d IoU / d I
  const double da_coef = -inter / (uni * uni);         // d IoU / d A
  // Intersection edges follow pred where pred is the binding side; coincident
  // edges take the mean of the one-sided derivatives.
  auto side = [](double p, double t, bool p_binds_above) {
    if (p == t) return 0.5;
    return (p_binds_above ? p > t : p < t) ? 1.0 : 0.0;
  };
  const double di_dx1 = -ih * side(x1, target.x1(), true);
  const double di_dx2 = ih * side(x2, target.x2(), false);
  const double di_dy1 = -iw * side(y1, target.y1(), true);
  const double di_dy2 = iw * side(y2, target.y2(), false);
  const double di_dcx = di_dx1 + di_dx2, di_dw = 0.5 * (di_dx2 - di_dx1);
  const double di_dcy = di_dy1 + di_dy2, di_dh = 0.5 * (di_dy2 - di_dy1);
  out.grad = {dl_diou * di_coef * di_dcx, dl_diou * di_coef * di_dcy,
              dl_diou * (di_coef * di_dw + da_coef * pred.h), dl_diou * (di_coef * di_dh + da_coef * pred.w)};
  return out;
}

IouLoss iou_loss_delta(const HorizontalBox& anchor, const Delta4& delta, const HorizontalBox& target, double weight,
                       double eps) {
  const HorizontalBox pred = decode_h(anchor, delta);
  IouLoss l = iou_loss(pred, target, weight, eps);
  const bool w_clamped = std::abs(delta.dw) > kMaxLogRatio, h_clamped = std::abs(delta.dh) > kMaxLogRatio;
  l.grad = {l.grad[0] * anchor.w, l.grad[1] * anchor.h, w_clamped ? 0.0 : l.grad[2] * pred.w,
            h_clamped ? 0.0 : l.grad[3] * pred.h};
  return l;
}

namespace {

Delta4 scale_delta(const std::array<double, 4>& g, double s) { return {g[0] * s, g[1] * s, g[2] * s, g[3] * s}; }

}  // namespace

RegressionLoss af_regression_loss(std::span<const HorizontalBox> anchors, std::span<const Delta4> deltas,
                                  std::span<const HorizontalBox> rect_gts, const RpnConfig& cfg, std::uint64_t seed) {
  if (anchors.size() != deltas.size()) throw std::invalid_argument("af_regression_loss: anchors/deltas length mismatch");
  RegressionLoss out;
  out.grad.assign(anchors.size(), Delta4{});
  out.assign = assign_ratio(anchors, rect_gts, cfg.ratio_pos, cfg.ratio_ignore);
  const SampleResult sample = sample_balanced(out.assign, cfg.num_pos, cfg.num_neg, seed);
  out.num_pos = sample.pos_indices.size();
  if (out.num_pos == 0) return out;
  const double inv = 1.0 / static_cast<double>(out.num_pos);
  for (std::size_t i : sample.pos_indices) {
    const HorizontalBox& gt = rect_gts[static_cast<std::size_t>(out.assign.labels[i])];
    const IouLoss l = iou_loss_delta(anchors[i], deltas[i], gt, cfg.loss.w_af, cfg.loss.iou_eps);
    out.num_clamped += l.clamped;
    out.loss += l.loss * inv;
    out.grad[i] = scale_delta(l.grad, inv);
  }
  return out;
}

std::vector<Proposal> select_proposals(std::span<const HorizontalBox> boxes, std::span<const double> scores,
                                       const RpnConfig& cfg) {
  if (boxes.size() != scores.size()) throw std::invalid_argument("select_proposals: length mismatch");
  std::vector<HorizontalBox> clipped;
  std::vector<double> kept_scores;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const double x1 = std::clamp(boxes[i].x1(), 0.0, cfg.image_width), x2 = std::clamp(boxes[i].x2(), 0.0, cfg.image_width);
    const double y1 = std::clamp(boxes[i].y1(), 0.0, cfg.image_height), y2 = std::clamp(boxes[i].y2(), 0.0, cfg.image_height);
    if (x2 - x1 < cfg.min_proposal_size || y2 - y1 < cfg.min_proposal_size || !std::isfinite(scores[i])) continue;
    clipped.push_back(HorizontalBox::from_corners(x1, y1, x2, y2));
    kept_scores.push_back(scores[i]);
  }
  std::vector<std::size_t> order(clipped.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return kept_scores[a] > kept_scores[b]; });
  if (order.size() > static_cast<std::size_t>(cfg.pre_nms_top_k)) order.resize(static_cast<std::size_t>(cfg.pre_nms_top_k));
  std::vector<HorizontalBox> top;
  std::vector<double> top_scores;
  for (std::size_t i : order) {
    top.push_back(clipped[i]);
    top_scores.push_back(kept_scores[i]);
  }
  const std::vector<std::size_t> keep = horizontal_nms(top, top_scores, cfg.nms_iou);
  std::vector<Proposal> out;
  for (std::size_t i : keep) {
    if (out.size() >= static_cast<std::size_t>(cfg.post_nms_top_k)) break;
    out.push_back({top[i], top_scores[i]});
  }
  return out;
}

double near_axis_theta(const OrientedBox& gt) {
  double t = wrap_half_pi(gt.theta);
  if (t >= 0.25 * kPi) t -= 0.5 * kPi;
  if (t < -0.25 * kPi) t += 0.5 * kPi;
  return t;
}

template <typename T>
RpnParams<T>::RpnParams(int channels, int k)
    : af_conv(channels, channels, 3, 1, 1),
      af_reg(4, channels, 1, 1, 0),
      ab_conv(channels, channels, k, 1, k / 2),
      ab_reg(4, channels, 1, 1, 0),
      ab_obj(1, channels, 1, 1, 0) {}

template <typename T>
void RpnParams<T>::init(std::mt19937_64& rng) {
  af_conv.init_kaiming(rng);
  af_reg.init_normal(0.01, rng);
  ab_conv.init_kaiming(rng);
  ab_reg.init_normal(0.01, rng);
  ab_obj.init_normal(0.01, rng);
}

template <typename T>
void RpnParams<T>::visit(const ParamVisitor<T>& fn) {
  af_conv.visit("rpn.af_conv", fn);
  af_reg.visit("rpn.af_reg", fn);
  ab_conv.visit("rpn.ab_conv", fn);
  ab_reg.visit("rpn.ab_reg", fn);
  ab_obj.visit("rpn.ab_obj", fn);
}

namespace {

// Intermediate values of one forward pass, per level.
template <typename T>
struct RpnForward {
  std::vector<HorizontalBox> anchors;
  std::vector<std::size_t> offsets;
  std::vector<Tensor<T>> pre, act, af_out, offset, z, y, reg, obj;
  std::vector<HorizontalBox> candidates;  // decoded AF boxes (or raw anchors)
  std::vector<Delta4> af_deltas;
};

template <typename T>
void check_features(const std::vector<Tensor<T>>& features, const RpnConfig& cfg) {
  if (features.size() != cfg.levels.size()) throw ShapeError("rpn: feature level count does not match config");
  for (std::size_t l = 0; l < features.size(); ++l) {
    const Tensor<T>& f = features[l];
    if (f.rank() != 3 || f.dim(1) != cfg.levels[l].height || f.dim(2) != cfg.levels[l].width) {
      throw ShapeError("rpn: level " + std::to_string(l) + " feature shape " + shape_string(f.shape()) +
                       " does not match the anchor grid");
    }
  }
}

template <typename T>
std::vector<Delta4> gather_deltas(const std::vector<Tensor<T>>& maps, const std::vector<std::size_t>& offsets,
                                  std::size_t total) {
  std::vector<Delta4> out(total);
  for (std::size_t l = 0; l < maps.size(); ++l) {
    const Tensor<T>& m = maps[l];
    const int h = m.dim(1), w = m.dim(2);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        out[offsets[l] + static_cast<std::size_t>(i * w + j)] = {m.at(0, i, j), m.at(1, i, j), m.at(2, i, j),
                                                                   m.at(3, i, j)};
      }
    }
  }
  return out;
}

template <typename T>
std::vector<Tensor<T>> scatter_deltas(const std::vector<Delta4>& g, const std::vector<Tensor<T>>& like,
                                      const std::vector<std::size_t>& offsets) {
  std::vector<Tensor<T>> out;
  for (std::size_t l = 0; l < like.size(); ++l) {
    Tensor<T> m(like[l].shape());
    const int h = m.dim(1), w = m.dim(2);
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        const Delta4& d = g[offsets[l] + static_cast<std::size_t>(i * w + j)];
        m.at(0, i, j) = static_cast<T>(d.dx);
        m.at(1, i, j) = static_cast<T>(d.dy);
        m.at(2, i, j) = static_cast<T>(d.dw);
        m.at(3, i, j) = static_cast<T>(d.dh);
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

template <typename T>
std::vector<double> gather_scalar(const std::vector<Tensor<T>>& maps, std::size_t total) {
  std::vector<double> out;
  out.reserve(total);
  for (const Tensor<T>& m : maps) {
    for (T v : m.values()) out.push_back(static_cast<double>(v));
  }
  return out;
}

// Anchor-free trunk and regression; fills candidates.
template <typename T>
RpnForward<T> forward_af(const std::vector<Tensor<T>>& features, const RpnConfig& cfg, const RpnParams<T>& params) {
  check_features(features, cfg);
  RpnForward<T> f;
  const AnchorGrid grid = generate_anchors(cfg.levels, cfg.anchor_scale, cfg.anchor_ratio);
  f.anchors = grid.flatten();
  f.offsets = grid.level_offsets();
  for (const Tensor<T>& x : features) {
    f.pre.push_back(conv2d(x, params.af_conv.p));
    f.act.push_back(relu(f.pre.back()));
    if (cfg.use_af_head) f.af_out.push_back(conv2d(f.act.back(), params.af_reg.p));
  }
  if (cfg.use_af_head) {
    f.af_deltas = gather_deltas(f.af_out, f.offsets, f.anchors.size());
    f.candidates.resize(f.anchors.size());
    for (std::size_t i = 0; i < f.anchors.size(); ++i) f.candidates[i] = decode_h(f.anchors[i], f.af_deltas[i]);
  } else {
    f.candidates = f.anchors;
  }
  return f;
}

// Anchor-based trunk and heads given per-anchor angles.
template <typename T>
void forward_ab(RpnForward<T>& f, const std::vector<double>& thetas, const RpnConfig& cfg, const RpnParams<T>& params) {
  const int k = cfg.oaconv_kernel;
  for (std::size_t l = 0; l < cfg.levels.size(); ++l) {
    const FeatureLevelSpec& lv = cfg.levels[l];
    const std::size_t n = static_cast<std::size_t>(lv.height * lv.width);
    if (cfg.use_oaconv) {
      f.offset.push_back(offset_field<T>(std::span<const HorizontalBox>(f.candidates).subspan(f.offsets[l], n),
                                         std::span<const double>(thetas).subspan(f.offsets[l], n), lv.height, lv.width,
                                         lv.stride, k, 0.5));
      f.z.push_back(oaconv_forward(f.act[l], params.ab_conv.p, f.offset.back()));
    } else {
      f.z.push_back(conv2d(f.act[l], params.ab_conv.p));
    }
    f.y.push_back(relu(f.z.back()));
    f.reg.push_back(conv2d(f.y.back(), params.ab_reg.p));
    f.obj.push_back(conv2d(f.y.back(), params.ab_obj.p));
  }
}

template <typename T>
std::vector<Proposal> proposals_from(const RpnForward<T>& f, const RpnConfig& cfg) {
  if (!cfg.use_ab_head) {
    // No objectness: every candidate scores the same and keeps index order.
    const std::vector<double> flat(f.candidates.size(), 1.0);
    return select_proposals(f.candidates, flat, cfg);
  }
  const std::vector<Delta4> d = gather_deltas(f.reg, f.offsets, f.anchors.size());
  const std::vector<double> logits = gather_scalar(f.obj, f.anchors.size());
  std::vector<HorizontalBox> boxes(d.size());
  std::vector<double> scores(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    boxes[i] = decode_h(f.candidates[i], d[i]);
    scores[i] = sigmoid(logits[i]);
  }
  return select_proposals(boxes, scores, cfg);
}

}  // namespace

template <typename T>
RpnTrainOutput<T> rpn_forward_train(const std::vector<Tensor<T>>& features, std::span<const OrientedBox> gts,
                                    const RpnConfig& cfg, RpnParams<T>& params, std::uint64_t seed) {
  if (!cfg.use_af_head && !cfg.use_ab_head) throw std::invalid_argument("rpn: at least one head must be enabled");
  RpnForward<T> f = forward_af(features, cfg, params);
  std::vector<HorizontalBox> rect_gts;
  for (const OrientedBox& g : gts) rect_gts.push_back(rectangularize(g));

  RpnTrainOutput<T> out;
  out.anchor_maxiou_positives = assign_maxiou(f.anchors, rect_gts, cfg.maxiou_pos, cfg.maxiou_neg).num_positive();
  const std::size_t levels = cfg.levels.size();
  std::vector<Tensor<T>> g_act(levels);
  for (std::size_t l = 0; l < levels; ++l) g_act[l] = Tensor<T>(f.act[l].shape());

  if (cfg.use_af_head) {
    const RegressionLoss af = af_regression_loss(f.anchors, f.af_deltas, rect_gts, cfg, mix_seed(seed, 1));
    out.loss_af = af.loss;
    out.af_positives = af.assign.num_positive();
    out.af_clamped = af.num_clamped;
    const std::vector<Tensor<T>> g_out = scatter_deltas(af.grad, f.af_out, f.offsets);
    for (std::size_t l = 0; l < levels; ++l) {
      ConvGrads<T> g = conv2d_backward(f.act[l], params.af_reg.p, g_out[l]);
      params.af_reg.accumulate(g);
      g_act[l] += g.grad_x;
    }
  } else {
    out.af_positives = assign_ratio(f.anchors, rect_gts, cfg.ratio_pos, cfg.ratio_ignore).num_positive();
  }

  if (cfg.use_ab_head) {
    const AssignResult assign = assign_maxiou(f.candidates, rect_gts, cfg.maxiou_pos, cfg.maxiou_neg);
    out.ab_positives = assign.num_positive();
    std::vector<double> thetas(f.anchors.size(), 0.0);
    for (std::size_t i = 0; i < thetas.size(); ++i) {
      if (assign.positive(i)) thetas[i] = near_axis_theta(gts[static_cast<std::size_t>(assign.labels[i])]);
    }
    forward_ab(f, thetas, cfg, params);
    const SampleResult sample = sample_balanced(assign, cfg.num_pos, cfg.num_neg, mix_seed(seed, 2));
    const std::vector<Delta4> d = gather_deltas(f.reg, f.offsets, f.anchors.size());
    const std::vector<double> logits = gather_scalar(f.obj, f.anchors.size());

    std::vector<Delta4> g_reg(f.anchors.size());
    if (!sample.pos_indices.empty()) {
      const double inv = 1.0 / static_cast<double>(sample.pos_indices.size());
      for (std::size_t i : sample.pos_indices) {
        const HorizontalBox& gt = rect_gts[static_cast<std::size_t>(assign.labels[i])];
        const IouLoss l = iou_loss_delta(f.candidates[i], d[i], gt, cfg.loss.w_ab, cfg.loss.iou_eps);
        out.ab_clamped += l.clamped;
        out.loss_ab_reg += l.loss * inv;
        g_reg[i] = scale_delta(l.grad, inv);
      }
    }
    std::vector<std::size_t> cls_idx(sample.pos_indices);
    cls_idx.insert(cls_idx.end(), sample.neg_indices.begin(), sample.neg_indices.end());
    std::vector<double> g_logit(f.anchors.size(), 0.0);
    if (!cls_idx.empty()) {
      std::vector<T> z, y;
      for (std::size_t i : cls_idx) {
        z.push_back(static_cast<T>(logits[i]));
        y.push_back(assign.positive(i) ? T(1) : T(0));
      }
      const LossGrad<T> bce = bce_with_logits<T>(z, y);
      out.loss_ab_cls = static_cast<double>(bce.loss);
      for (std::size_t k = 0; k < cls_idx.size(); ++k) g_logit[cls_idx[k]] = static_cast<double>(bce.grad[k]);
    }

    const std::vector<Tensor<T>> g_reg_maps = scatter_deltas(g_reg, f.reg, f.offsets);
    for (std::size_t l = 0; l < levels; ++l) {
      Tensor<T> g_obj(f.obj[l].shape());
      for (std::size_t i = 0; i < g_obj.size(); ++i) g_obj[i] = static_cast<T>(g_logit[f.offsets[l] + i]);
      ConvGrads<T> gr = conv2d_backward(f.y[l], params.ab_reg.p, g_reg_maps[l]);
      ConvGrads<T> go = conv2d_backward(f.y[l], params.ab_obj.p, g_obj);
      params.ab_reg.accumulate(gr);
      params.ab_obj.accumulate(go);
      gr.grad_x += go.grad_x;
      const Tensor<T> gz = relu_backward(f.z[l], gr.grad_x);
      ConvGrads<T> gc = cfg.use_oaconv ? oaconv_backward(f.act[l], params.ab_conv.p, f.offset[l], gz)
                                       : conv2d_backward(f.act[l], params.ab_conv.p, gz);
      params.ab_conv.accumulate(gc);
      g_act[l] += gc.grad_x;
    }
  }

  for (std::size_t l = 0; l < levels; ++l) {
    const Tensor<T> g_pre = relu_backward(f.pre[l], g_act[l]);
    ConvGrads<T> g = conv2d_backward(features[l], params.af_conv.p, g_pre);
    params.af_conv.accumulate(g);
    out.grad_features.push_back(std::move(g.grad_x));
  }
  out.proposals = proposals_from(f, cfg);
  return out;
}

template <typename T>
std::vector<Proposal> rpn_forward_infer(const std::vector<Tensor<T>>& features, const RpnConfig& cfg,
                                        const RpnParams<T>& params) {
  if (!cfg.use_af_head && !cfg.use_ab_head) throw std::invalid_argument("rpn: at least one head must be enabled");
  RpnForward<T> f = forward_af(features, cfg, params);
  if (cfg.use_ab_head) forward_ab(f, std::vector<double>(f.anchors.size(), 0.0), cfg, params);
  return proposals_from(f, cfg);
}

#define HRDET_INSTANTIATE(T)                                                                                 \
  template struct RpnParams<T>;                                                                              \
  template RpnTrainOutput<T> rpn_forward_train<T>(const std::vector<Tensor<T>>&, std::span<const OrientedBox>, \
                                                  const RpnConfig&, RpnParams<T>&, std::uint64_t);           \
  template std::vector<Proposal> rpn_forward_infer<T>(const std::vector<Tensor<T>>&, const RpnConfig&,       \
                                                      const RpnParams<T>&);

HRDET_INSTANTIATE(float)
HRDET_INSTANTIATE(double)

#undef HRDET_INSTANTIATE

}  // namespace hrdet
