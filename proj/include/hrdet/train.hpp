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
#include <functional>
#include <string>
#include <vector>

#include "hrdet/checkpoint.hpp"
#include "hrdet/data.hpp"
#include "hrdet/detector.hpp"
#include "hrdet/optim.hpp"

namespace hrdet {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 2;
  SgdConfig sgd;
  int warmup_iters = 200;
  double warmup_ratio = 1.0 / 3.0;
  /// Epochs after which the learning rate drops tenfold. Empty selects
  /// decay_epochs(epochs).
  std::vector<int> decay_at;
  /// Random horizontal and vertical flips, each with probability 0.5.
  bool flip = true;
  std::uint64_t seed = 0;
};

/// Decay epochs at 2/3 and 8/9 of the run (rounded).
std::vector<int> decay_epochs(int epochs);

struct IterationRecord {
  int iteration = 0;  // 0-based, global
  int epoch = 0;      // 0-based
  double lr = 0;
  double grad_norm = 0;
  StepLosses losses;  // mean over the batch
};

struct TrainState {
  int epochs_done = 0;
  int iteration = 0;
};

struct TrainCallbacks {
  std::function<void(const IterationRecord&)> on_iteration;
  /// Called after each epoch with the state that a resumed run would start
  /// from. Returning false stops training after this epoch.
  std::function<bool(const TrainState&, Sgd<float>&)> on_epoch_end;
};

/// Runs epochs [state.epochs_done, cfg.epochs). Image order, flips and
/// sampling seeds depend only on (cfg.seed, epoch, position), so a resumed
/// run reproduces the uninterrupted one. Images of a batch are processed in
/// order and their gradients summed before the 1/B scaling.
TrainState train(Detector<float>& det, const Dataset& data, const TrainConfig& cfg, Sgd<float>& opt,
                 TrainState state, const TrainCallbacks& cb = {});

/// Model parameters, momentum buffers and the train state in one checkpoint.
Checkpoint make_checkpoint(Detector<float>& det, Sgd<float>* opt, const TrainState& state, nlohmann::json config);
/// Restores parameters (and momentum when opt is given). Throws
/// CheckpointError on missing tensors or shape mismatches.
TrainState restore_checkpoint(const Checkpoint& ckpt, Detector<float>& det, Sgd<float>* opt);

struct EvalResult {
  std::vector<std::vector<Detection>> detections;
  MapResult voc07;
  MapResult voc12;
};

EvalResult evaluate(const Detector<float>& det, const Dataset& data, double iou_thr = 0.5);

/// Ground truths of a sample in evaluation form.
std::vector<GroundTruth> sample_ground_truth(const Sample& s);

}  // namespace hrdet
