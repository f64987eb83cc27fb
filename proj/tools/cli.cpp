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

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "commands.hpp"

namespace hrdet::cli {

namespace fs = std::filesystem;

namespace {

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

// --config plus one flag per schema key on a subcommand.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::vector<std::string>> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config_path, "config file of 'key = value' lines")->check(CLI::ExistingFile);
    for (const ConfigField& f : config_schema()) {
      CLI::Option* o = sub->add_option(dashed(f.key), values[f.key], f.help + " (" + f.type + ")");
      o->group("Config keys");
      if (f.type == "int list") {
        o->expected(0, CLI::detail::expected_max_vector_size);
      } else {
        o->expected(1);
      }
      options[f.key] = o;
    }
  }

  // File values first, then flags.
  void apply(RunConfig& cfg) const {
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) set_value(cfg, key, values.at(key));
    }
  }
};

Tensor<float> crop(const Tensor<float>& image, int x0, int y0, int size) {
  Tensor<float> out({1, size, size});
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const int sy = y0 + y, sx = x0 + x;
      if (sy < image.dim(1) && sx < image.dim(2)) out.at(0, y, x) = image.at(0, sy, sx);
    }
  }
  return out;
}

// DOTA label files <labels>/<id>.txt with PGM images <images>/<id>.pgm, cut
// into tile x tile windows.
Dataset import_dota(const std::string& labels, const std::string& images, int tile, int stride,
                    std::vector<std::string> classes, std::ostream& out) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(labels)) {
    if (e.path().extension() == ".txt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw CommandError("no .txt label files in " + labels);
  std::map<fs::path, std::vector<AnnotationRecord>> parsed;
  for (const fs::path& p : files) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      parsed[p] = parse_dota(ss.str());
    } catch (const DataError& e) {
      throw CommandError(p.string() + ": " + e.what());
    }
  }
  if (classes.empty()) {
    for (const auto& [p, recs] : parsed) {
      for (const AnnotationRecord& r : recs) classes.push_back(r.category);
    }
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  }
  Dataset ds;
  ds.class_names = classes;
  std::size_t skipped = 0;
  for (const fs::path& p : files) {
    const Tensor<float> img = read_pgm((fs::path(images) / p.stem()).string() + ".pgm");
    for (const TileWindow& w : tile_image(img.dim(2), img.dim(1), tile, stride, parsed[p])) {
      Sample s;
      s.id = p.stem().string() + "_" + std::to_string(w.x0) + "_" + std::to_string(w.y0);
      s.image = crop(img, w.x0, w.y0, tile);
      for (const AnnotationRecord& r : w.records) {
        const auto it = std::find(classes.begin(), classes.end(), r.category);
        if (it == classes.end()) {
          ++skipped;
          continue;
        }
        s.boxes.push_back(record_to_obb(r));
        s.labels.push_back(static_cast<int>(it - classes.begin()));
        s.difficult.push_back(r.difficulty != 0 ? 1 : 0);
      }
      ds.samples.push_back(std::move(s));
    }
  }
  out << "imported " << files.size() << " images as " << ds.samples.size() << " tiles";
  if (skipped) out << " (" << skipped << " objects of unlisted classes dropped)";
  out << "\n";
  return ds;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"hrdet: hybrid-anchor oriented object detector"};
  app.require_subcommand(1);

  // train
  CLI::App* train_cmd = app.add_subcommand("train", "train a detector; writes loss.csv, run.log and checkpoints");
  ConfigFlags train_flags;
  train_flags.attach(train_cmd);
  bool resume = false;
  std::string resume_from;
  train_cmd->add_flag("--resume", resume, "continue from the latest checkpoint in --out");
  train_cmd->add_option("--checkpoint", resume_from, "checkpoint to resume from (implies --resume)");

  // eval
  CLI::App* eval_cmd = app.add_subcommand("eval", "rotated mAP (VOC07 and VOC12) of a checkpoint on a split");
  ConfigFlags eval_flags;
  eval_flags.attach(eval_cmd);
  std::string eval_ckpt, split = "val", json_path, dets_path;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--split", split, "val or train")->check(CLI::IsMember({"val", "train"}));
  eval_cmd->add_option("--json", json_path, "JSON report path (default: <checkpoint>.<split>.json)");
  eval_cmd->add_option("--detections", dets_path, "write detections as JSON lines");

  // bench-iou
  CLI::App* bench_cmd = app.add_subcommand("bench-iou", "rotated IoU throughput");
  std::size_t pairs = 200000;
  std::uint64_t bench_seed = 1;
  double min_rate = 0;
  bench_cmd->add_option("--pairs", pairs, "number of box pairs");
  bench_cmd->add_option("--seed", bench_seed, "box generator seed");
  bench_cmd->add_option("--min-rate", min_rate, "exit 1 when the single-thread rate is below this (pairs/s)");

  // selfcheck
  CLI::App* self_cmd = app.add_subcommand("selfcheck", "run the oracle, gradient and round-trip suites");

  // render
  CLI::App* render_cmd = app.add_subcommand("render", "draw detections of a checkpoint onto an image (PPM)");
  ConfigFlags render_flags;
  render_flags.attach(render_cmd);
  std::string render_ckpt, image_path, output_path;
  int sample_index = -1;
  bool draw_gt = false;
  render_cmd->add_option("--checkpoint", render_ckpt, "checkpoint file")->required();
  auto* img_opt = render_cmd->add_option("--image", image_path, "PGM input image");
  auto* sample_opt = render_cmd->add_option("--sample", sample_index, "index into --split instead of --image");
  img_opt->excludes(sample_opt);
  render_cmd->add_option("--split", split, "val or train (with --sample)")->check(CLI::IsMember({"val", "train"}));
  render_cmd->add_option("--output", output_path, "PPM output path")->required();
  render_cmd->add_flag("--gt", draw_gt, "also draw ground truth in white (with --sample)");

  // make-data
  CLI::App* data_cmd = app.add_subcommand("make-data", "write dataset manifests (synthetic or DOTA import)");
  ConfigFlags data_flags;
  data_flags.attach(data_cmd);
  std::string dst, dota_labels, dota_images;
  int tile = 0, tile_stride = 0;
  std::vector<std::string> dota_classes;
  data_cmd->add_option("--dst", dst, "output directory")->required();
  auto* labels_opt = data_cmd->add_option("--dota-labels", dota_labels, "DOTA label directory (*.txt)");
  data_cmd->add_option("--dota-images", dota_images, "directory of <id>.pgm images")->needs(labels_opt);
  data_cmd->add_option("--tile", tile, "tile side for DOTA import (default: image_size)");
  data_cmd->add_option("--tile-stride", tile_stride, "tile stride for DOTA import (default: 3/4 tile)");
  data_cmd->add_option("--classes", dota_classes, "class list for DOTA import (default: sorted categories found)")
      ->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*train_cmd) {
      RunConfig cfg;
      train_flags.apply(cfg);
      cmd_train(cfg, resume || !resume_from.empty(), resume_from, out);
      return 0;
    }
    if (*eval_cmd) {
      LoadedModel m = load_model(eval_ckpt, [&](RunConfig& c) { eval_flags.apply(c); });
      const Dataset data = load_split(m.cfg, split == "val");
      if (data.class_names != m.class_names) throw CommandError("split classes do not match the checkpoint classes");
      std::vector<ImageDetection> dets;
      EvalReport rep = evaluate_split(m.detector, data, split, m.cfg.eval_iou, dets_path.empty() ? nullptr : &dets);
      rep.checkpoint = eval_ckpt;
      const std::string table = format_report(rep);
      out << table;
      if (json_path.empty()) json_path = eval_ckpt + "." + split + ".json";
      {
        std::ofstream j(json_path);
        if (!j) throw CommandError("cannot write " + json_path);
        j << report_json(rep).dump(2) << "\n";
      }
      {
        const std::string txt = fs::path(json_path).replace_extension(".txt").string();
        std::ofstream t(txt);
        if (!t) throw CommandError("cannot write " + txt);
        t << table;
      }
      out << "report: " << json_path << "\n";
      if (!dets_path.empty()) {
        std::ofstream d(dets_path);
        if (!d) throw CommandError("cannot write " + dets_path);
        write_detections_jsonl(d, dets);
        out << "detections: " << dets_path << "\n";
      }
      return 0;
    }
    if (*bench_cmd) {
      const BenchResult r = bench_iou(pairs, bench_seed);
      out << "rotated IoU, " << r.pairs << " pairs\n";
      out << "  serial:            " << static_cast<long long>(r.serial_rate) << " pairs/s (" << r.serial_seconds
          << " s)\n";
      out << "  matrix (" << r.threads << " threads): " << static_cast<long long>(r.matrix_rate) << " pairs/s ("
          << r.matrix_seconds << " s)\n";
      if (r.serial_rate < min_rate) {
        err << "error: serial rate " << r.serial_rate << " pairs/s is below --min-rate " << min_rate << "\n";
        return 1;
      }
      return 0;
    }
    if (*self_cmd) {
      const std::vector<SuiteResult> results = selfcheck();
      std::size_t passed = 0;
      for (const SuiteResult& s : results) {
        out << (s.pass ? "PASS " : "FAIL ") << s.name << "  " << s.detail << "\n";
        passed += s.pass;
      }
      out << passed << "/" << results.size() << " suites passed\n";
      return passed == results.size() ? 0 : 1;
    }
    if (*render_cmd) {
      LoadedModel m = load_model(render_ckpt, [&](RunConfig& c) { render_flags.apply(c); });
      Tensor<float> image;
      std::vector<OrientedBox> gts;
      if (!image_path.empty()) {
        image = read_pgm(image_path);
      } else if (sample_index >= 0) {
        const Dataset data = load_split(m.cfg, split == "val");
        if (static_cast<std::size_t>(sample_index) >= data.samples.size()) {
          throw CommandError("--sample " + std::to_string(sample_index) + " is out of range for split '" + split +
                             "' (" + std::to_string(data.samples.size()) + " images)");
        }
        image = data.samples[static_cast<std::size_t>(sample_index)].image;
        gts = data.samples[static_cast<std::size_t>(sample_index)].boxes;
      } else {
        throw CommandError("render needs --image or --sample");
      }
      const int size = m.cfg.detector.image_size;
      if (image.dim(1) != size || image.dim(2) != size) {
        throw CommandError("image is " + std::to_string(image.dim(2)) + "x" + std::to_string(image.dim(1)) +
                           ", the model expects " + std::to_string(size) + "x" + std::to_string(size));
      }
      const std::vector<Detection> dets = m.detector.detect(image);
      write_ppm(output_path, render_detections(image, dets, draw_gt ? &gts : nullptr));
      out << dets.size() << " detections drawn to " << output_path << "\n";
      for (const Detection& d : dets) {
        out << "  " << m.class_names[static_cast<std::size_t>(d.class_id)] << " " << d.score << " (" << d.box.cx
            << ", " << d.box.cy << ", " << d.box.w << ", " << d.box.h << ", " << d.box.theta << ")\n";
      }
      return 0;
    }
    if (*data_cmd) {
      RunConfig cfg;
      data_flags.apply(cfg);
      finalize(cfg);
      if (!dota_labels.empty()) {
        if (dota_images.empty()) throw CommandError("--dota-labels needs --dota-images");
        const int t = tile > 0 ? tile : cfg.detector.image_size;
        const int s = tile_stride > 0 ? tile_stride : std::max(1, 3 * t / 4);
        const Dataset ds = import_dota(dota_labels, dota_images, t, s, dota_classes, out);
        save_dataset(ds, dst);
        out << "wrote " << dst << "\n";
      } else {
        save_dataset(load_split(cfg, false), (fs::path(dst) / "train").string());
        save_dataset(load_split(cfg, true), (fs::path(dst) / "val").string());
        out << "wrote " << dst << "/train (" << cfg.data.train_size << " images) and " << dst << "/val ("
            << cfg.data.val_size << " images)\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace hrdet::cli
