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
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "hrdet/train.hpp"
#include "run_config.hpp"

namespace hrdet::cli {

/// Thrown for user-facing failures; the message is printed and the process
/// exits with status 1.
class CommandError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exclusive ownership of a run directory through <dir>/train.lock.
class RunLock {
 public:
  explicit RunLock(const std::string& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::string path_;
};

std::string checkpoint_path(const std::string& out, int epoch);
/// Highest-epoch checkpoint under <out>/checkpoints, or "" when none exists.
std::string latest_checkpoint(const std::string& out);

struct TrainOutcome {
  TrainState state;
  std::string last_checkpoint;
};

/// Trains per cfg, writing <out>/run.log, <out>/config.toml, <out>/loss.csv
/// and <out>/checkpoints/epoch_NNNN.ckpt. With resume, continues from
/// resume_from (or the latest checkpoint in <out> when empty).
TrainOutcome cmd_train(const RunConfig& cfg, bool resume, const std::string& resume_from, std::ostream& out);

/// Loads a checkpoint into a detector built from its stored config with
/// cfg_overrides applied. Throws on a missing file or a shape mismatch.
struct LoadedModel {
  RunConfig cfg;
  std::vector<std::string> class_names;
  Detector<float> detector;
};
LoadedModel load_model(const std::string& checkpoint, const std::function<void(RunConfig&)>& overrides);

struct EvalReport {
  std::string split;
  std::string checkpoint;
  std::vector<std::string> class_names;
  std::size_t num_images = 0;
  double iou_thr = 0.5;
  MapResult voc07, voc12;
};

std::string format_report(const EvalReport& r);
nlohmann::ordered_json report_json(const EvalReport& r);

EvalReport evaluate_split(const Detector<float>& det, const Dataset& data, const std::string& split, double iou_thr,
                          std::vector<ImageDetection>* detections = nullptr);

struct BenchResult {
  std::size_t pairs = 0;
  double serial_seconds = 0;
  double serial_rate = 0;  // pairs per second, one thread
  double matrix_seconds = 0;
  double matrix_rate = 0;  // pairs per second, OpenMP matrix kernel
  int threads = 1;
};
BenchResult bench_iou(std::size_t pairs, std::uint64_t seed);

struct SuiteResult {
  std::string name;
  bool pass = false;
  std::string detail;
};
std::vector<SuiteResult> selfcheck();

/// Gray image with predicted boxes (per-class colors) and optionally the
/// ground truths in white.
RgbImage render_detections(const Tensor<float>& image, const std::vector<Detection>& dets,
                           const std::vector<OrientedBox>* gts);

/// Command-line entry point. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hrdet::cli
