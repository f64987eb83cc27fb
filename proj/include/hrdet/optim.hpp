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

#include <string>
#include <vector>

#include "hrdet/layers.hpp"

namespace hrdet {

struct SgdConfig {
  double lr = 0.005;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  /// Global L2 gradient-norm cap; <= 0 disables clipping.
  double grad_clip = 35.0;
};

/// Linear warmup from warmup_ratio * base_lr over warmup_iters, then a x0.1
/// step at each milestone iteration.
struct LrSchedule {
  double base_lr = 0.005;
  int warmup_iters = 100;
  double warmup_ratio = 1.0 / 3.0;
  std::vector<int> milestones;

  double at(int iter) const;
};

/// SGD with heavy-ball momentum and L2 weight decay on every parameter:
/// v = m v + (g + wd x); x -= lr v.
template <typename T>
class Sgd {
 public:
  Sgd(std::vector<ParamRef<T>> params, SgdConfig cfg);

  /// Applies one update. Returns the gradient norm before clipping.
  double step(double lr);

  const SgdConfig& config() const { return cfg_; }
  std::vector<Tensor<T>>& momentum_buffers() { return velocity_; }
  const std::vector<ParamRef<T>>& params() const { return params_; }

 private:
  std::vector<ParamRef<T>> params_;
  std::vector<Tensor<T>> velocity_;
  SgdConfig cfg_;
};

}  // namespace hrdet
