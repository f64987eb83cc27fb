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

#include "run_config.hpp"

#include <charconv>
#include <sstream>
#include <type_traits>

#include <CLI11.hpp>

namespace hrdet::cli {

RunConfig::RunConfig() { detector.sync(); }

namespace {

template <typename V>
V parse_scalar(const std::string& key, const std::string& tok) {
  auto fail = [&]() -> V { throw ConfigError("config key '" + key + "': cannot parse '" + tok + "'"); };
  if constexpr (std::is_same_v<V, bool>) {
    if (tok == "true" || tok == "1") return true;
    if (tok == "false" || tok == "0") return false;
    return fail();
  } else if constexpr (std::is_same_v<V, std::string>) {
    return tok;
  } else {
    V v{};
    const char* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc() || ptr != end) return fail();
    return v;
  }
}

template <typename V>
struct IsVector : std::false_type {};
template <typename V>
struct IsVector<std::vector<V>> : std::true_type {};

template <typename V>
std::string type_name() {
  if constexpr (std::is_same_v<V, bool>) return "bool";
  else if constexpr (std::is_same_v<V, std::string>) return "string";
  else if constexpr (std::is_same_v<V, double>) return "float";
  else if constexpr (IsVector<V>::value) return "int list";
  else return "int";
}

template <typename V>
ConfigField field(std::string key, std::string help, std::function<V&(RunConfig&)> ref) {
  ConfigField f;
  f.key = key;
  f.type = type_name<V>();
  f.help = std::move(help);
  f.set = [key, ref](RunConfig& c, const std::vector<std::string>& toks) {
    if constexpr (IsVector<V>::value) {
      V out;
      for (const std::string& t : toks) {
        if (!t.empty()) out.push_back(parse_scalar<typename V::value_type>(key, t));
      }
      ref(c) = std::move(out);
    } else {
      if (toks.size() != 1) throw ConfigError("config key '" + key + "': expected one value");
      ref(c) = parse_scalar<V>(key, toks[0]);
    }
  };
  f.get = [ref](const RunConfig& c) {
    RunConfig copy = c;
    return nlohmann::json(ref(copy));
  };
  return f;
}

#define HRDET_FIELD(T, key, help, expr) field<T>(key, help, [](RunConfig& c) -> T& { return expr; })

std::vector<ConfigField> build_schema() {
  return {
      // Data.
      HRDET_FIELD(std::string, "train_manifest", "training manifest directory; empty = synthetic", c.data.train_manifest),
      HRDET_FIELD(std::string, "val_manifest", "validation manifest directory; empty = synthetic", c.data.val_manifest),
      HRDET_FIELD(int, "train_size", "synthetic training images", c.data.train_size),
      HRDET_FIELD(int, "val_size", "synthetic validation images", c.data.val_size),
      HRDET_FIELD(std::uint64_t, "data_seed", "synthetic seed; validation uses data_seed + 1", c.data.data_seed),
      HRDET_FIELD(int, "image_size", "square image side in pixels (multiple of 8)", c.detector.image_size),
      HRDET_FIELD(int, "min_instances", "fewest objects per synthetic scene", c.data.min_instances),
      HRDET_FIELD(int, "max_instances", "most objects per synthetic scene", c.data.max_instances),
      HRDET_FIELD(bool, "rotation_heavy", "draw |theta| from [pi/6, pi/3]", c.data.rotation_heavy),
      // Model.
      HRDET_FIELD(std::uint64_t, "init_seed", "parameter initialization seed", c.init_seed),
      HRDET_FIELD(int, "fpn_channels", "pyramid feature channels", c.detector.backbone.fpn_channels),
      HRDET_FIELD(double, "anchor_scale", "anchor side in units of the level stride", c.detector.rpn.anchor_scale),
      HRDET_FIELD(double, "anchor_ratio", "anchor height / width", c.detector.rpn.anchor_ratio),
      HRDET_FIELD(double, "ratio_pos", "anchor-free positive center-region ratio", c.detector.rpn.ratio_pos),
      HRDET_FIELD(double, "ratio_ignore", "anchor-free ignore-region ratio", c.detector.rpn.ratio_ignore),
      HRDET_FIELD(double, "maxiou_pos", "anchor-based positive IoU", c.detector.rpn.maxiou_pos),
      HRDET_FIELD(double, "maxiou_neg", "anchor-based negative IoU", c.detector.rpn.maxiou_neg),
      HRDET_FIELD(std::size_t, "rpn_num_pos", "sampled positives per RPN stage", c.detector.rpn.num_pos),
      HRDET_FIELD(std::size_t, "rpn_num_neg", "sampled negatives per RPN stage", c.detector.rpn.num_neg),
      HRDET_FIELD(double, "w_af", "anchor-free IoU loss weight", c.detector.rpn.loss.w_af),
      HRDET_FIELD(double, "w_ab", "anchor-based IoU loss weight", c.detector.rpn.loss.w_ab),
      HRDET_FIELD(double, "iou_eps", "IoU floor inside the log", c.detector.rpn.loss.iou_eps),
      HRDET_FIELD(int, "rpn_pre_nms_top_k", "candidates kept before proposal NMS", c.detector.rpn.pre_nms_top_k),
      HRDET_FIELD(int, "rpn_post_nms_top_k", "proposals kept after NMS", c.detector.rpn.post_nms_top_k),
      HRDET_FIELD(double, "rpn_nms_iou", "proposal NMS IoU", c.detector.rpn.nms_iou),
      HRDET_FIELD(bool, "use_af_head", "enable the anchor-free stage", c.detector.rpn.use_af_head),
      HRDET_FIELD(bool, "use_ab_head", "enable the anchor-based stage", c.detector.rpn.use_ab_head),
      HRDET_FIELD(bool, "use_oaconv", "orientation-aware conv (false = standard 3x3 conv)", c.detector.rpn.use_oaconv),
      HRDET_FIELD(int, "rcnn_hidden", "fc width of the R-CNN heads", c.detector.heads.hidden),
      HRDET_FIELD(int, "roi_size", "RoIAlign output side", c.detector.heads.roi.out),
      HRDET_FIELD(std::size_t, "rcnn_num_samples", "sampled RoIs per image", c.detector.heads.num_samples),
      HRDET_FIELD(double, "score_thr", "detection score threshold", c.detector.heads.score_thr),
      HRDET_FIELD(double, "det_nms_iou", "per-class rotated NMS IoU", c.detector.heads.nms_iou),
      HRDET_FIELD(int, "max_detections", "detections kept per image", c.detector.heads.max_detections),
      // Optimization.
      HRDET_FIELD(int, "epochs", "training epochs", c.train.epochs),
      HRDET_FIELD(int, "batch_size", "images per SGD step", c.train.batch_size),
      HRDET_FIELD(double, "lr", "base learning rate", c.train.sgd.lr),
      HRDET_FIELD(double, "momentum", "SGD momentum", c.train.sgd.momentum),
      HRDET_FIELD(double, "weight_decay", "L2 weight decay", c.train.sgd.weight_decay),
      HRDET_FIELD(double, "grad_clip", "global gradient-norm clip (0 = off)", c.train.sgd.grad_clip),
      HRDET_FIELD(int, "warmup_iters", "linear warmup iterations", c.train.warmup_iters),
      HRDET_FIELD(double, "warmup_ratio", "warmup starting fraction of lr", c.train.warmup_ratio),
      HRDET_FIELD(std::vector<int>, "decay_epochs", "epochs after which lr drops tenfold; [] = 2/3 and 8/9 of epochs",
                  c.train.decay_at),
      HRDET_FIELD(bool, "flip", "random horizontal and vertical flips", c.train.flip),
      HRDET_FIELD(std::uint64_t, "seed", "shuffle, flip and sampling seed", c.train.seed),
      // Evaluation and output.
      HRDET_FIELD(double, "eval_iou", "rotated IoU for a true positive", c.eval_iou),
      HRDET_FIELD(std::string, "out", "run directory (log, checkpoints, reports)", c.out),
  };
}

#undef HRDET_FIELD

}  // namespace

const std::vector<ConfigField>& config_schema() {
  static const std::vector<ConfigField> schema = build_schema();
  return schema;
}

const ConfigField* find_field(const std::string& key) {
  for (const ConfigField& f : config_schema()) {
    if (f.key == key) return &f;
  }
  return nullptr;
}

void set_value(RunConfig& cfg, const std::string& key, const std::vector<std::string>& tokens) {
  const ConfigField* f = find_field(key);
  if (!f) throw ConfigError("unknown config key '" + key + "'");
  f->set(cfg, tokens);
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_file(path);
  } catch (const CLI::Error& e) {
    throw ConfigError("cannot read config file '" + path + "': " + e.what());
  }
  std::vector<std::string> unknown;
  for (const CLI::ConfigItem& it : items) {
    if (it.name == "++" || it.name == "--") continue;
    if (!it.parents.empty() || !find_field(it.name)) unknown.push_back(it.fullname());
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config key(s) in '" + path + "':";
    for (const std::string& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
  for (const CLI::ConfigItem& it : items) {
    if (it.name == "++" || it.name == "--") continue;
    set_value(cfg, it.name, it.inputs);
  }
}

void finalize(RunConfig& cfg) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  const DataConfig& d = cfg.data;
  require(cfg.detector.image_size >= 32 && cfg.detector.image_size % 8 == 0, "image_size must be a multiple of 8, >= 32");
  require(d.train_size >= 1 && d.val_size >= 1, "train_size and val_size must be >= 1");
  require(d.min_instances >= 1 && d.min_instances <= d.max_instances, "need 1 <= min_instances <= max_instances");
  require(cfg.train.epochs >= 1 && cfg.train.batch_size >= 1, "epochs and batch_size must be >= 1");
  require(cfg.train.sgd.lr > 0 && cfg.train.sgd.momentum >= 0 && cfg.train.sgd.weight_decay >= 0, "bad optimizer values");
  require(cfg.train.warmup_iters >= 0 && cfg.train.warmup_ratio > 0 && cfg.train.warmup_ratio <= 1, "bad warmup values");
  for (std::size_t i = 0; i < cfg.train.decay_at.size(); ++i) {
    require(cfg.train.decay_at[i] >= 1 && (i == 0 || cfg.train.decay_at[i] > cfg.train.decay_at[i - 1]),
            "decay_epochs must be increasing and >= 1");
  }
  require(cfg.detector.rpn.use_af_head || cfg.detector.rpn.use_ab_head, "use_af_head and use_ab_head are both false");
  require(cfg.eval_iou > 0 && cfg.eval_iou <= 1, "eval_iou must lie in (0, 1]");
  require(cfg.detector.backbone.fpn_channels >= 1 && cfg.detector.heads.hidden >= 1 && cfg.detector.heads.roi.out >= 1,
          "layer widths must be >= 1");
  require(!cfg.out.empty(), "out must be non-empty");
  cfg.detector.sync();
}

std::string to_toml(const RunConfig& cfg) {
  std::ostringstream os;
  for (const ConfigField& f : config_schema()) os << f.key << " = " << f.get(cfg).dump() << "\n";
  return os.str();
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const ConfigField& f : config_schema()) j[f.key] = f.get(cfg);
  return nlohmann::json::parse(j.dump());
}

void apply_json(RunConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config JSON must be an object");
  for (const auto& [key, value] : j.items()) {
    std::vector<std::string> toks;
    auto token = [](const nlohmann::json& v) {
      if (v.is_string()) return v.get<std::string>();
      return v.dump();
    };
    if (value.is_array()) {
      for (const nlohmann::json& v : value) toks.push_back(token(v));
    } else {
      toks.push_back(token(value));
    }
    set_value(cfg, key, toks);
  }
}

SceneSpec scene_spec(const RunConfig& cfg, bool validation) {
  SceneSpec s;
  s.image_size = cfg.detector.image_size;
  s.min_instances = cfg.data.min_instances;
  s.max_instances = cfg.data.max_instances;
  s.rotation_heavy = cfg.data.rotation_heavy;
  s.seed = cfg.data.data_seed + (validation ? 1 : 0);
  // Class lengths are defined for 128-pixel images.
  const double scale = cfg.detector.image_size / 128.0;
  for (ClassStyle& c : s.classes) {
    c.long_min *= scale;
    c.long_max *= scale;
  }
  return s;
}

Dataset load_split(const RunConfig& cfg, bool validation) {
  const std::string& manifest = validation ? cfg.data.val_manifest : cfg.data.train_manifest;
  if (!manifest.empty()) return load_dataset(manifest);
  return generate_dataset(scene_spec(cfg, validation), validation ? cfg.data.val_size : cfg.data.train_size,
                          validation ? "val_" : "train_");
}

}  // namespace hrdet::cli
