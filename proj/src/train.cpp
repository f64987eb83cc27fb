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

#include "hrdet/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hrdet/seed.hpp"

namespace hrdet {

std::vector<int> decay_epochs(int epochs) {
  return {static_cast<int>(std::lround(epochs * 2.0 / 3.0)), static_cast<int>(std::lround(epochs * 8.0 / 9.0))};
}

namespace {

StepLosses scaled(StepLosses s, double k) {
  s.loss_af *= k;
  s.loss_ab_reg *= k;
  s.loss_ab_cls *= k;
  s.loss_h2o *= k;
  s.loss_cls *= k;
  s.loss_reg *= k;
  return s;
}

}  // namespace

TrainState train(Detector<float>& det, const Dataset& data, const TrainConfig& cfg, Sgd<float>& opt,
                 TrainState state, const TrainCallbacks& cb) {
  if (data.samples.empty()) throw std::invalid_argument("train: empty dataset");
  if (cfg.batch_size <= 0 || cfg.epochs < 0) throw std::invalid_argument("train: bad batch size or epoch count");
  const int n = static_cast<int>(data.samples.size());
  const int iters_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  LrSchedule sched;
  sched.base_lr = cfg.sgd.lr;
  sched.warmup_iters = cfg.warmup_iters;
  sched.warmup_ratio = cfg.warmup_ratio;
  for (int e : cfg.decay_at.empty() ? decay_epochs(cfg.epochs) : cfg.decay_at) sched.milestones.push_back(e * iters_per_epoch);

  for (int epoch = state.epochs_done; epoch < cfg.epochs; ++epoch) {
    const std::uint64_t epoch_seed = mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(epoch_seed);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (int it = 0; it < iters_per_epoch; ++it) {
      det.zero_grad();
      StepLosses sum;
      const int begin = it * cfg.batch_size, end = std::min(n, begin + cfg.batch_size);
      for (int pos = begin; pos < end; ++pos) {
        const Sample& s = data.samples[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])];
        const std::uint64_t img_seed = mix_seed(epoch_seed, static_cast<std::uint64_t>(pos));
        const bool fh = cfg.flip && (img_seed & 1u), fv = cfg.flip && (img_seed & 2u);
        if (fh || fv) {
          const Scene flipped = flip_scene({s.image, s.boxes, s.labels}, fh, fv);
          sum += det.accumulate_gradients(flipped.image, flipped.boxes, flipped.labels, img_seed);
        } else {
          sum += det.accumulate_gradients(s.image, s.boxes, s.labels, img_seed);
        }
      }
      const double inv = 1.0 / (end - begin);
      det.visit([&](const std::string&, Tensor<float>&, Tensor<float>& g) {
        for (float& v : g.values()) v *= static_cast<float>(inv);
      });
      IterationRecord rec;
      rec.iteration = state.iteration;
      rec.epoch = epoch;
      rec.lr = sched.at(state.iteration);
      rec.losses = scaled(sum, inv);
      rec.grad_norm = opt.step(rec.lr);
      ++state.iteration;
      if (cb.on_iteration) cb.on_iteration(rec);
    }
    state.epochs_done = epoch + 1;
    if (cb.on_epoch_end && !cb.on_epoch_end(state, opt)) break;
  }
  return state;
}

Checkpoint make_checkpoint(Detector<float>& det, Sgd<float>* opt, const TrainState& state, nlohmann::json config) {
  Checkpoint ck;
  ck.meta = {{"format_version", 1},
             {"epochs_done", state.epochs_done},
             {"iteration", state.iteration},
             {"config", std::move(config)}};
  for (const ParamRef<float>& p : det.parameters()) ck.tensors.push_back({p.name, *p.value});
  if (opt) {
    auto& vel = opt->momentum_buffers();
    for (std::size_t i = 0; i < vel.size(); ++i) ck.tensors.push_back({"momentum." + opt->params()[i].name, vel[i]});
  }
  return ck;
}

TrainState restore_checkpoint(const Checkpoint& ck, Detector<float>& det, Sgd<float>* opt) {
  auto load = [&](const std::string& name, Tensor<float>& dst) {
    const Tensor<float>* src = ck.find(name);
    if (!src) throw CheckpointError("checkpoint: missing tensor '" + name + "'");
    if (src->shape() != dst.shape()) {
      throw CheckpointError("checkpoint: shape mismatch for '" + name + "': checkpoint " + shape_string(src->shape()) +
                            ", model " + shape_string(dst.shape()));
    }
    dst = *src;
  };
  for (const ParamRef<float>& p : det.parameters()) load(p.name, *p.value);
  if (opt) {
    auto& vel = opt->momentum_buffers();
    for (std::size_t i = 0; i < vel.size(); ++i) load("momentum." + opt->params()[i].name, vel[i]);
  }
  TrainState st;
  st.epochs_done = ck.meta.value("epochs_done", 0);
  st.iteration = ck.meta.value("iteration", 0);
  return st;
}

std::vector<GroundTruth> sample_ground_truth(const Sample& s) {
  std::vector<GroundTruth> out;
  for (std::size_t i = 0; i < s.boxes.size(); ++i) {
    out.push_back({s.boxes[i], s.labels[i], i < s.difficult.size() && s.difficult[i] != 0});
  }
  return out;
}

EvalResult evaluate(const Detector<float>& det, const Dataset& data, double iou_thr) {
  if (data.samples.empty()) throw std::invalid_argument("evaluate: empty split");
  EvalResult r;
  std::vector<std::vector<GroundTruth>> gts;
  for (const Sample& s : data.samples) {
    r.detections.push_back(det.detect(s.image));
    gts.push_back(sample_ground_truth(s));
  }
  r.voc07 = evaluate_map(r.detections, gts, data.num_classes(), iou_thr, ApMetric::kVoc07);
  r.voc12 = evaluate_map(r.detections, gts, data.num_classes(), iou_thr, ApMetric::kVoc12);
  return r;
}

}  // namespace hrdet
