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
#include <utility>
#include <vector>

#include <json.hpp>

#include "hrdet/tensor.hpp"

namespace hrdet {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Tensor<float> value;
};

struct Checkpoint {
  nlohmann::json meta;
  std::vector<NamedTensor> tensors;

  const Tensor<float>* find(const std::string& name) const;
};

/// File layout: 8-byte magic "HRDETCK1", little-endian uint64 header length,
/// UTF-8 JSON header {"meta": ..., "tensors": [{"name", "shape", "offset"}]},
/// then float32 little-endian payload. Written to a temporary file and renamed.
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace hrdet
