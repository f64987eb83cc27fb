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

#include "hrdet/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace hrdet {

double LrSchedule::at(int iter) const {
  double lr = base_lr;
  for (int m : milestones) {
    if (iter >= m) lr *= 0.1;
  }
  if (iter < warmup_iters) {
    const double k = static_cast<double>(iter) / warmup_iters;
    lr *= warmup_ratio + (1.0 - warmup_ratio) * k;
  }
  return lr;
}

template <typename T>
Sgd<T>::Sgd(std::vector<ParamRef<T>> params, SgdConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  velocity_.reserve(params_.size());
  for (const ParamRef<T>& p : params_) {
    if (!p.value || !p.grad || p.value->shape() != p.grad->shape()) {
      throw std::invalid_argument("sgd: parameter '" + p.name + "' has no matching gradient");
    }
    velocity_.emplace_back(p.value->shape());
  }
}

template <typename T>
double Sgd<T>::step(double lr) {
  double sq = 0;
  for (const ParamRef<T>& p : params_) {
    for (T g : p.grad->values()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw std::runtime_error("sgd: non-finite gradient norm");
  const double scale = (cfg_.grad_clip > 0 && norm > cfg_.grad_clip) ? cfg_.grad_clip / norm : 1.0;
  const T m = static_cast<T>(cfg_.momentum), wd = static_cast<T>(cfg_.weight_decay);
  const T s = static_cast<T>(scale), eta = static_cast<T>(lr);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    T* x = params_[i].value->data();
    const T* g = params_[i].grad->data();
    T* v = velocity_[i].data();
    const std::size_t n = params_[i].value->size();
    for (std::size_t j = 0; j < n; ++j) {
      v[j] = m * v[j] + (s * g[j] + wd * x[j]);
      x[j] -= eta * v[j];
    }
  }
  return norm;
}

template class Sgd<float>;
template class Sgd<double>;

}  // namespace hrdet
