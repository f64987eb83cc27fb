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
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hrdet/data.hpp"
#include "hrdet/detector.hpp"
#include "hrdet/train.hpp"

namespace hrdet::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Synthetic generation parameters, or manifest directories written by
/// save_dataset. A non-empty manifest path replaces the synthetic split.
struct DataConfig {
  std::string train_manifest;
  std::string val_manifest;
  int train_size = 500;
  int val_size = 100;
  std::uint64_t data_seed = 1;
  int min_instances = 1;
  int max_instances = 6;
  bool rotation_heavy = false;
};

struct RunConfig {
  DataConfig data;
  DetectorConfig detector;
  TrainConfig train;
  std::uint64_t init_seed = 7;
  double eval_iou = 0.5;
  std::string out = "run";

  RunConfig();
};

/// One documented key. Values arrive as the string tokens of a config file
/// entry or a command-line flag.
struct ConfigField {
  std::string key;
  std::string type;
  std::string help;
  std::function<void(RunConfig&, const std::vector<std::string>&)> set;
  std::function<nlohmann::json(const RunConfig&)> get;
};

const std::vector<ConfigField>& config_schema();
const ConfigField* find_field(const std::string& key);

/// Assigns one key. Throws ConfigError naming the key for unknown keys or
/// unparsable values.
void set_value(RunConfig& cfg, const std::string& key, const std::vector<std::string>& tokens);

/// Applies a TOML-style "key = value" file. Keys are flat; sections, unknown
/// keys and malformed values are errors.
void apply_config_file(RunConfig& cfg, const std::string& path);

/// Re-derives dependent detector fields and checks ranges.
void finalize(RunConfig& cfg);

/// Every key with its effective value, one "key = value" line each, in
/// schema order. Parsing the output with apply_config_file reproduces cfg.
std::string to_toml(const RunConfig& cfg);
nlohmann::json to_json(const RunConfig& cfg);
void apply_json(RunConfig& cfg, const nlohmann::json& j);

/// Default classes with long-edge ranges scaled by image_size / 128.
SceneSpec scene_spec(const RunConfig& cfg, bool validation);

/// Training or validation split per the data section.
Dataset load_split(const RunConfig& cfg, bool validation);

}  // namespace hrdet::cli
