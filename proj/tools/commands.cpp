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

#include "commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <omp.h>

#include "hrdet/anchors.hpp"
#include "hrdet/coders.hpp"
#include "hrdet/geometry.hpp"
#include "hrdet/oaware.hpp"
#include "hrdet/rpn.hpp"
#include "oracles.hpp"

namespace hrdet::cli {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void check_image_size(const Dataset& d, int size, const std::string& what) {
  for (const Sample& s : d.samples) {
    if (s.image.dim(1) != size || s.image.dim(2) != size) {
      throw CommandError(what + " image '" + s.id + "' is " + std::to_string(s.image.dim(2)) + "x" +
                         std::to_string(s.image.dim(1)) + ", config image_size is " + std::to_string(size));
    }
  }
}

// CSV columns: iteration, loss_af, loss_ab, loss_rcnn_cls, loss_rcnn_reg.
std::string csv_row(const IterationRecord& r) {
  const StepLosses& l = r.losses;
  return std::to_string(r.iteration) + "," + num(l.loss_af) + "," + num(l.loss_ab_reg + l.loss_ab_cls) + "," +
         num(l.loss_cls) + "," + num(l.loss_h2o + l.loss_reg) + "\n";
}

constexpr const char* kCsvHeader = "iteration,loss_af,loss_ab,loss_rcnn_cls,loss_rcnn_reg\n";

// Rewrites the loss log keeping rows of iterations before first_iteration.
void reset_csv(const fs::path& path, int first_iteration) {
  std::vector<std::string> kept;
  if (first_iteration > 0) {
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const std::size_t comma = line.find(',');
      if (comma == std::string::npos) continue;
      int it = -1;
      std::from_chars(line.data(), line.data() + comma, it);
      if (it >= 0 && it < first_iteration) kept.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw CommandError("cannot write " + path.string());
  out << kCsvHeader;
  for (const std::string& l : kept) out << l << "\n";
}

std::vector<std::string> config_differences(const nlohmann::json& before, const nlohmann::json& after) {
  std::vector<std::string> out;
  for (const auto& [k, v] : after.items()) {
    if (!before.contains(k)) {
      out.push_back(k + ": (absent) -> " + v.dump());
    } else if (before.at(k) != v) {
      out.push_back(k + ": " + before.at(k).dump() + " -> " + v.dump());
    }
  }
  return out;
}

}  // namespace

RunLock::RunLock(const std::string& dir) : path_((fs::path(dir) / "train.lock").string()) {
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw CommandError("run directory '" + dir + "' is locked by another training process (delete " + path_ +
                       " if that process is gone)");
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

std::string checkpoint_path(const std::string& out, int epoch) {
  char name[32];
  std::snprintf(name, sizeof(name), "epoch_%04d.ckpt", epoch);
  return (fs::path(out) / "checkpoints" / name).string();
}

std::string latest_checkpoint(const std::string& out) {
  const fs::path dir = fs::path(out) / "checkpoints";
  if (!fs::is_directory(dir)) return "";
  std::string best;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() == 15 && name.starts_with("epoch_") && name.ends_with(".ckpt") && name > fs::path(best).filename().string()) {
      best = e.path().string();
    }
  }
  return best;
}

TrainOutcome cmd_train(const RunConfig& cfg_in, bool resume, const std::string& resume_from, std::ostream& out) {
  RunConfig cfg = cfg_in;
  finalize(cfg);
  const fs::path dir(cfg.out);
  fs::create_directories(dir / "checkpoints");
  RunLock lock(cfg.out);

  const Dataset data = load_split(cfg, false);
  if (data.samples.empty()) throw CommandError("training split is empty");
  check_image_size(data, cfg.detector.image_size, "training");
  cfg.detector.heads.num_classes = data.num_classes();
  cfg.detector.sync();

  Detector<float> det(cfg.detector, cfg.init_seed);
  Sgd<float> opt(det.parameters(), cfg.train.sgd);
  TrainState state;

  std::ofstream runlog(dir / "run.log", std::ios::app);
  auto log = [&](const std::string& line) {
    out << line << "\n";
    runlog << line << "\n";
    runlog.flush();
  };
  {
    std::ofstream c(dir / "config.toml", std::ios::trunc);
    c << to_toml(cfg);
  }
  log("== hrdet train ==");
  log("effective config:");
  std::istringstream echo(to_toml(cfg));
  for (std::string line; std::getline(echo, line);) log("  " + line);
  log("classes: " + nlohmann::json(data.class_names).dump());
  log("train images: " + std::to_string(data.samples.size()) + ", parameters: " + std::to_string(det.num_parameters()));

  if (resume) {
    const std::string path = resume_from.empty() ? latest_checkpoint(cfg.out) : resume_from;
    if (path.empty()) throw CommandError("--resume: no checkpoint found under " + (dir / "checkpoints").string());
    if (!fs::exists(path)) throw CommandError("checkpoint not found: " + path);
    const Checkpoint ck = load_checkpoint(path);
    if (ck.meta.value("classes", nlohmann::json::array()) != nlohmann::json(data.class_names)) {
      throw CommandError("checkpoint classes do not match the training split: " + path);
    }
    state = restore_checkpoint(ck, det, &opt);
    log("resumed from " + path + " at epoch " + std::to_string(state.epochs_done) + ", iteration " +
        std::to_string(state.iteration));
    for (const std::string& d : config_differences(ck.meta.value("config", nlohmann::json::object()), to_json(cfg))) {
      log("  config changed since checkpoint: " + d);
    }
  }

  const fs::path csv_path = dir / "loss.csv";
  reset_csv(csv_path, state.iteration);
  std::ofstream csv(csv_path, std::ios::app);

  TrainOutcome outcome;
  StepLosses epoch_sum;
  int epoch_iters = 0;
  const auto t0 = std::chrono::steady_clock::now();
  TrainCallbacks cb;
  cb.on_iteration = [&](const IterationRecord& r) {
    csv << csv_row(r);
    for (double v : {r.losses.loss_af, r.losses.loss_ab_reg, r.losses.loss_ab_cls, r.losses.loss_cls, r.losses.loss_reg,
                     r.losses.loss_h2o}) {
      if (!std::isfinite(v)) throw CommandError("non-finite loss at iteration " + std::to_string(r.iteration));
    }
    epoch_sum += r.losses;
    ++epoch_iters;
  };
  cb.on_epoch_end = [&](const TrainState& s, Sgd<float>& o) {
    csv.flush();
    Checkpoint ck = make_checkpoint(det, &o, s, to_json(cfg));
    ck.meta["classes"] = data.class_names;
    outcome.last_checkpoint = checkpoint_path(cfg.out, s.epochs_done);
    save_checkpoint(outcome.last_checkpoint, ck);
    const double inv = epoch_iters > 0 ? 1.0 / epoch_iters : 0.0;
    log("epoch " + std::to_string(s.epochs_done) + "/" + std::to_string(cfg.train.epochs) + " iter " +
        std::to_string(s.iteration) + " loss_af " + fixed(epoch_sum.loss_af * inv, 4) + " loss_ab " +
        fixed((epoch_sum.loss_ab_reg + epoch_sum.loss_ab_cls) * inv, 4) + " loss_rcnn_cls " +
        fixed(epoch_sum.loss_cls * inv, 4) + " loss_rcnn_reg " + fixed((epoch_sum.loss_h2o + epoch_sum.loss_reg) * inv, 4) +
        " checkpoint " + outcome.last_checkpoint);
    out << "  (" << fixed(seconds_since(t0), 1) << " s)\n";
    epoch_sum = {};
    epoch_iters = 0;
    return true;
  };
  outcome.state = train(det, data, cfg.train, opt, state, cb);
  if (outcome.last_checkpoint.empty()) outcome.last_checkpoint = latest_checkpoint(cfg.out);
  log("done: epochs " + std::to_string(outcome.state.epochs_done) + ", iterations " +
      std::to_string(outcome.state.iteration));
  return outcome;
}

LoadedModel load_model(const std::string& checkpoint, const std::function<void(RunConfig&)>& overrides) {
  if (checkpoint.empty()) throw CommandError("no checkpoint given (--checkpoint)");
  if (!fs::exists(checkpoint)) throw CommandError("checkpoint not found: " + checkpoint);
  const Checkpoint ck = load_checkpoint(checkpoint);
  LoadedModel m;
  apply_json(m.cfg, ck.meta.value("config", nlohmann::json::object()));
  if (overrides) overrides(m.cfg);
  finalize(m.cfg);
  m.class_names = ck.meta.value("classes", std::vector<std::string>{});
  if (m.class_names.empty()) throw CommandError("checkpoint has no class list: " + checkpoint);
  m.cfg.detector.heads.num_classes = static_cast<int>(m.class_names.size());
  m.cfg.detector.sync();
  m.detector = Detector<float>(m.cfg.detector, m.cfg.init_seed);
  restore_checkpoint(ck, m.detector, nullptr);
  return m;
}

EvalReport evaluate_split(const Detector<float>& det, const Dataset& data, const std::string& split, double iou_thr,
                          std::vector<ImageDetection>* detections) {
  if (data.samples.empty()) throw CommandError("split '" + split + "' is empty");
  const EvalResult r = evaluate(det, data, iou_thr);
  EvalReport rep;
  rep.split = split;
  rep.class_names = data.class_names;
  rep.num_images = data.samples.size();
  rep.iou_thr = iou_thr;
  rep.voc07 = r.voc07;
  rep.voc12 = r.voc12;
  if (detections) {
    detections->clear();
    for (std::size_t i = 0; i < r.detections.size(); ++i) {
      for (const Detection& d : r.detections[i]) {
        detections->push_back({data.samples[i].id, data.class_names[static_cast<std::size_t>(d.class_id)], d});
      }
    }
  }
  return rep;
}

std::string format_report(const EvalReport& r) {
  std::size_t width = 5;
  for (const std::string& c : r.class_names) width = std::max(width, c.size());
  const int w = static_cast<int>(width);
  std::ostringstream os;
  char line[256];
  os << "split " << r.split << ", " << r.num_images << " images, rotated IoU >= " << fixed(r.iou_thr, 2) << "\n";
  std::snprintf(line, sizeof(line), "%-*s %7s %7s %8s %8s\n", w, "class", "gts", "dets", "AP07", "AP12");
  os << line;
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    const ClassAp& a = r.voc07.per_class[c];
    std::snprintf(line, sizeof(line), "%-*s %7zu %7zu %8.4f %8.4f\n", w, r.class_names[c].c_str(), a.num_gts,
                  a.num_dets, a.ap, r.voc12.per_class[c].ap);
    os << line;
  }
  std::snprintf(line, sizeof(line), "%-*s %7s %7s %8.4f %8.4f\n", w, "mAP", "", "", r.voc07.map, r.voc12.map);
  os << line;
  return os.str();
}

nlohmann::ordered_json report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["split"] = r.split;
  j["checkpoint"] = r.checkpoint;
  j["images"] = r.num_images;
  j["iou_thr"] = r.iou_thr;
  j["map_voc07"] = r.voc07.map;
  j["map_voc12"] = r.voc12.map;
  j["classes"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < r.class_names.size(); ++c) {
    nlohmann::ordered_json e;
    e["name"] = r.class_names[c];
    e["gts"] = r.voc07.per_class[c].num_gts;
    e["dets"] = r.voc07.per_class[c].num_dets;
    e["ap_voc07"] = r.voc07.per_class[c].ap;
    e["ap_voc12"] = r.voc12.per_class[c].ap;
    j["classes"].push_back(e);
  }
  return j;
}

BenchResult bench_iou(std::size_t pairs, std::uint64_t seed) {
  if (pairs == 0) throw CommandError("bench-iou: --pairs must be positive");
  std::mt19937_64 rng(seed);
  // Centers within a small span so most pairs overlap and take the clipping path.
  std::vector<OrientedBox> a(pairs), b(pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    a[i] = oracle::random_box(rng, 40.0, 4.0, 40.0);
    b[i] = oracle::random_box(rng, 40.0, 4.0, 40.0);
  }
  BenchResult r;
  r.pairs = pairs;
  volatile double sink = 0;
  auto t0 = std::chrono::steady_clock::now();
  double acc = 0;
  for (std::size_t i = 0; i < pairs; ++i) acc += rotated_iou(a[i], b[i]);
  r.serial_seconds = seconds_since(t0);
  sink = sink + acc;
  r.serial_rate = static_cast<double>(pairs) / std::max(r.serial_seconds, 1e-12);

  const std::size_t m = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(pairs))));
  const std::vector<OrientedBox> ra(a.begin(), a.begin() + static_cast<long>(std::min(m, pairs)));
  const std::vector<OrientedBox> rb(b.begin(), b.begin() + static_cast<long>(std::min(m, pairs)));
  t0 = std::chrono::steady_clock::now();
  const std::vector<double> mat = rotated_iou_matrix(ra, rb);
  r.matrix_seconds = seconds_since(t0);
  sink = sink + mat.back();
  r.matrix_rate = static_cast<double>(mat.size()) / std::max(r.matrix_seconds, 1e-12);
  r.threads = omp_get_max_threads();
  return r;
}

namespace {

SuiteResult suite(std::string name, double err, double tol, const std::string& what) {
  return {std::move(name), err <= tol, what + ": max error " + num(err) + " (tolerance " + num(tol) + ")"};
}

SuiteResult geometry_iou_suite() {
  std::mt19937_64 rng(101);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    const OrientedBox a = oracle::random_box(rng, 30.0, 4.0, 40.0), b = oracle::random_box(rng, 30.0, 4.0, 40.0);
    worst = std::max(worst, std::abs(rotated_iou(a, b) - oracle::raster_iou(a, b)));
  }
  return suite("geometry.rotated_iou", worst, 5e-3, "100 pairs vs rasterization");
}

SuiteResult geometry_nms_suite() {
  std::mt19937_64 rng(102);
  std::uniform_real_distribution<double> u(0, 1);
  int mismatches = 0;
  for (int s = 0; s < 20; ++s) {
    std::vector<OrientedBox> boxes;
    std::vector<double> scores;
    for (int i = 0; i < 40; ++i) {
      boxes.push_back(oracle::random_box(rng, 60.0, 4.0, 30.0));
      scores.push_back(u(rng));
    }
    if (rotated_nms(boxes, scores, 0.3) != oracle::nms_quadratic(boxes, scores, 0.3)) ++mismatches;
  }
  return {"geometry.rotated_nms", mismatches == 0, "20 scenes vs quadratic oracle: " + std::to_string(mismatches) + " mismatches"};
}

SuiteResult geometry_rect_suite() {
  std::mt19937_64 rng(103);
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    const OrientedBox b = oracle::random_box(rng, 50.0, 2.0, 60.0);
    const Polygon4 p = obb_to_polygon(b);
    worst = std::max(worst, 1.0 - rotated_iou(b, min_area_rect(p)));
  }
  return suite("geometry.min_area_rect", worst, 1e-9, "200 rectangles, 1 - IoU(box, rect(polygon(box)))");
}

SuiteResult coder_suite() {
  std::mt19937_64 rng(104);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const OrientedBox ao = oracle::random_box(rng, 100.0, 2.0, 60.0), to = oracle::random_box(rng, 100.0, 2.0, 60.0);
    const HorizontalBox ah = rectangularize(ao), th = rectangularize(to);
    const HorizontalBox rh = decode_h(ah, encode_h(ah, th));
    worst = std::max({worst, std::abs(rh.cx - th.cx), std::abs(rh.cy - th.cy), std::abs(rh.w - th.w), std::abs(rh.h - th.h)});
    const OrientedBox ro = decode_obb(ao, encode_obb(ao, to));
    worst = std::max({worst, std::abs(ro.cx - to.cx), std::abs(ro.cy - to.cy), std::abs(ro.w - to.w),
                      std::abs(ro.h - to.h), std::abs(std::sin(ro.theta - to.theta))});
  }
  return suite("coders.round_trip", worst, 1e-9, "1000 horizontal and oriented encode/decode pairs");
}

SuiteResult oaconv_reduction_suite() {
  std::mt19937_64 rng(105);
  const int h = 8, w = 8, k = 3;
  const std::vector<FeatureLevelSpec> levels = {{4, h, w}};
  const auto anchors = generate_anchors(levels, 3.0, 1.0).anchors[0];
  const std::vector<double> thetas(anchors.size(), 0.0);
  const auto field = offset_field<double>(anchors, thetas, h, w, 4.0, k, 0.5);
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    const auto x = oracle::random_tensor<double>({3, h, w}, rng);
    ConvParams<double> p{oracle::random_tensor<double>({4, 3, k, k}, rng), oracle::random_tensor<double>({4}, rng), 1, 1};
    const auto y = oaconv_forward(x, p, field);
    const auto want = conv2d(x, p);
    for (std::size_t i = 0; i < y.size(); ++i) worst = std::max(worst, std::abs(y[i] - want[i]));
  }
  return suite("oaconv.canonical_reduction", worst, 1e-6, "20 weight draws vs standard convolution");
}

SuiteResult oaconv_gradient_suite() {
  std::mt19937_64 rng(106);
  const auto x = oracle::random_tensor<double>({2, 6, 6}, rng);
  ConvParams<double> p{oracle::random_tensor<double>({3, 2, 3, 3}, rng), oracle::random_tensor<double>({3}, rng), 1, 1};
  const auto off = oracle::random_tensor<double>({18, 6, 6}, rng, 1.2);
  const auto r = oracle::random_tensor<double>({3, 6, 6}, rng);
  const auto g = oaconv_backward(x, p, off, r);
  auto dot = [&](const Tensor<double>& y) {
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
    return s;
  };
  const auto fx = [&](std::span<const double> v) {
    Tensor<double> t(x.shape());
    std::copy(v.begin(), v.end(), t.data());
    return dot(oaconv_forward(t, p, off));
  };
  const auto fw = [&](std::span<const double> v) {
    ConvParams<double> q = p;
    std::copy(v.begin(), v.end(), q.weight.data());
    return dot(oaconv_forward(x, q, off));
  };
  const std::vector<double> xv(x.data(), x.data() + x.size()), wv(p.weight.data(), p.weight.data() + p.weight.size());
  const std::vector<double> gx(g.grad_x.data(), g.grad_x.data() + g.grad_x.size());
  const std::vector<double> gw(g.grad_w.data(), g.grad_w.data() + g.grad_w.size());
  const double err = std::max(oracle::max_relative_error(gx, oracle::numeric_gradient(fx, xv, 1e-5)),
                              oracle::max_relative_error(gw, oracle::numeric_gradient(fw, wv, 1e-5)));
  return suite("oaconv.gradients", err, 1e-5, "input and weight gradients vs central differences");
}

SuiteResult loss_suite() {
  const HorizontalBox t{50, 50, 20, 10};
  double err = std::abs(iou_loss(t, t, 7.0).loss);
  // Same center, width scaled by e: IoU = 1/e.
  err = std::max(err, std::abs(iou_loss({50, 50, 20 * std::exp(1.0), 10}, t, 7.0).loss - 7.0));
  err = std::max(err, std::abs(iou_loss({150, 50, 20, 10}, t, 7.0).loss - 7.0 * -std::log(1e-6)));
  return suite("loss.closed_form", err, 1e-9, "IoU loss at IoU 1, 1/e and the clamp");
}

SuiteResult eval_suite() {
  std::mt19937_64 rng(107);
  std::vector<std::vector<Detection>> dets(5);
  std::vector<std::vector<GroundTruth>> gts(5);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 4; ++j) {
      const OrientedBox b{20.0 + 30 * j, 20.0 + 10 * i, 12, 6, 0.1 * j};
      gts[static_cast<std::size_t>(i)].push_back({b, j % 3, false});
      dets[static_cast<std::size_t>(i)].push_back({b, 0.9, j % 3});
    }
  }
  const double m07 = evaluate_map(dets, gts, 3, 0.5, ApMetric::kVoc07).map;
  const double m12 = evaluate_map(dets, gts, 3, 0.5, ApMetric::kVoc12).map;
  return suite("eval.perfect_detections", std::max(std::abs(m07 - 1.0), std::abs(m12 - 1.0)), 1e-12,
               "mAP of detections equal to ground truth");
}

}  // namespace

std::vector<SuiteResult> selfcheck() {
  std::vector<SuiteResult> out;
  for (auto fn : {geometry_iou_suite, geometry_nms_suite, geometry_rect_suite, coder_suite, oaconv_reduction_suite,
                  oaconv_gradient_suite, loss_suite, eval_suite}) {
    try {
      out.push_back(fn());
    } catch (const std::exception& e) {
      out.push_back({"(suite threw)", false, e.what()});
    }
  }
  return out;
}

RgbImage render_detections(const Tensor<float>& image, const std::vector<Detection>& dets,
                           const std::vector<OrientedBox>* gts) {
  static constexpr std::uint8_t kColors[][3] = {{230, 60, 60}, {60, 200, 60}, {70, 110, 240},
                                                {230, 200, 40}, {200, 70, 220}, {40, 210, 210}};
  RgbImage img = RgbImage::from_gray(image);
  if (gts) {
    for (const OrientedBox& b : *gts) img.draw_box(b, 255, 255, 255);
  }
  for (const Detection& d : dets) {
    const auto& c = kColors[static_cast<std::size_t>(d.class_id) % 6];
    img.draw_box(d.box, c[0], c[1], c[2]);
  }
  return img;
}

}  // namespace hrdet::cli
