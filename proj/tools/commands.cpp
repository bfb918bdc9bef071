/*
 * Copyright 2026 The ehoi Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>

#include "ehoi/annotations.hpp"
#include "ehoi/augval.hpp"
#include "ehoi/error.hpp"
#include "ehoi/image.hpp"
#include "ehoi/matching.hpp"
#include "ehoi/metrics.hpp"
#include "ehoi/net.hpp"
#include "ehoi/synthgen.hpp"
#include "plot.hpp"
#include "predictions.hpp"
#include "run_dir.hpp"

namespace ehoi::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

const Split& require_split(const Dataset& ds, const std::string& name, const std::string& where) {
  const Split* s = ds.find_split(name);
  if (!s) throw validation_error(where + ": dataset has no '" + name + "' split");
  return *s;
}

Dataset require_dataset(const std::string& path, const std::string& key) {
  if (path.empty()) throw validation_error("config: " + key + ": a dataset path is required for this command");
  if (!fs::exists(path)) throw io_error(key + ": no such file or directory: " + path);
  auto parsed = parse_dataset(path);
  for (const auto& w : parsed.warnings) std::cerr << "warning: " << w.image_id << ": " << w.message << "\n";
  return std::move(parsed.dataset);
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw io_error("cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

net::Model load_or_fail(const std::string& checkpoint, const std::string& key) {
  if (checkpoint.empty()) throw validation_error("config: " + key + ": a checkpoint is required for this command");
  return net::Model::load(checkpoint);
}

void print_stats(const std::vector<DatasetStats>& stats) { std::cout << format_stats_table(stats); }

json stats_json(const DatasetStats& s) {
  return {{"split", s.split},   {"n_images", s.n_images}, {"n_hands", s.n_hands},     {"n_ehois", s.n_ehois},
          {"n_left", s.n_left}, {"n_right", s.n_right},   {"n_objects", s.n_objects}, {"glove_fraction", s.glove_fraction}};
}

// ---- commands

int synth_gen(const RunConfig& cfg) {
  RunDir run(cfg.out_dir, "synth-gen", cfg);
  synth::SceneConfig scene = cfg.synth.scene;
  scene.seed = cfg.seed;
  const auto summary = synth::generate_dataset(scene, cfg.synth.n_train, cfg.synth.n_val, cfg.synth.n_test, run.path());
  for (const auto& f : summary.files) run.record(f);
  const auto parsed = parse_dataset(run.path());
  const auto stats = compute_stats(parsed.dataset);
  print_stats(stats);
  json js = json::array();
  for (const auto& s : stats) js.push_back(stats_json(s));
  run.write("stats.json", js.dump(2) + "\n");
  run.finish({{"files", summary.files.size()}, {"stats", js}});
  return 0;
}

int stats(const RunConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> sources;
  for (const auto& [key, path] : {std::pair{"synth", cfg.data.synth}, {"real", cfg.data.real}, {"eval", cfg.data.eval}})
    if (!path.empty()) sources.emplace_back(key, path);
  if (sources.empty()) throw validation_error("config: data.synth/data.real/data.eval: set at least one dataset path");
  RunDir run(cfg.out_dir, "stats", cfg);
  std::vector<DatasetStats> rows;
  json js = json::object();
  for (const auto& [key, path] : sources) {
    auto s = compute_stats(require_dataset(path, "data." + key));
    for (auto& row : s) row.split = key + "/" + row.split;
    json arr = json::array();
    for (const auto& row : s) arr.push_back(stats_json(row));
    js[key] = arr;
    rows.insert(rows.end(), s.begin(), s.end());
  }
  print_stats(rows);
  run.write("stats.json", js.dump(2) + "\n");
  run.write("stats.txt", format_stats_table(rows));
  run.finish({{"stats", js}});
  return 0;
}

int aug_validate(const RunConfig& cfg) {
  const auto& a = cfg.augval;
  if (a.original_dir.empty() || a.augmented_dir.empty() || a.annotations.empty())
    throw validation_error("config: augval.original_dir/augmented_dir/annotations: all three are required");
  const auto parsed = parse_dataset(a.annotations);
  if (parsed.dataset.splits.size() != 1)
    throw validation_error("augval.annotations: expected a single split file, got " +
                           std::to_string(parsed.dataset.splits.size()) + " splits");
  const Split& split = parsed.dataset.splits[0];
  RunDir run(cfg.out_dir, "aug-validate", cfg);

  std::vector<augval::PairInput> pairs;
  for (std::size_t i = 0; i < split.images.size(); ++i) {
    const auto& rec = split.images[i];
    augval::PairInput p;
    p.image_id = rec.image_id;
    p.original = read_rgb_png(fs::path(a.original_dir) / rec.rgb_path);
    for (const auto& h : rec.hands) p.hands.push_back(h.bbox);
    const fs::path aug_path = fs::path(a.augmented_dir) / rec.rgb_path;
    if (a.mock_augment) {
      p.augmented = augval::mock_augment(p.original, p.hands, i % 2 == 1, a.margin);
      fs::create_directories(aug_path.parent_path());
      write_png(p.augmented, aug_path);
    } else {
      p.augmented = read_rgb_png(aug_path);
    }
    pairs.push_back(std::move(p));
  }
  const auto report = augval::filter_dataset(pairs, a.threshold, a.ssim, a.margin);
  run.write("augval_report.json", report.to_json() + "\n");

  // kept records, rgb pointing at the augmented image, other assets at the originals
  const auto kept = report.kept_ids();
  Split filtered{split.name, {}};
  const fs::path out_abs = fs::absolute(run.path());
  const auto rel = [&](const fs::path& p) { return fs::absolute(p).lexically_relative(out_abs).generic_string(); };
  for (auto rec : split.images) {
    if (!std::binary_search(kept.begin(), kept.end(), rec.image_id)) continue;
    rec.rgb_path = rel(fs::path(a.augmented_dir) / rec.rgb_path);
    if (rec.depth_path) rec.depth_path = rel(parsed.dataset.root / *rec.depth_path);
    if (rec.mask_path) rec.mask_path = rel(parsed.dataset.root / *rec.mask_path);
    filtered.images.push_back(std::move(rec));
  }
  const fs::path filtered_path = run.file(split.name + ".json");
  write_split_file(parsed.dataset.categories, filtered, filtered_path);
  run.record(filtered_path);
  std::cout << "kept " << kept.size() << " of " << pairs.size() << " pairs\n";
  run.finish({{"pairs", pairs.size()}, {"kept", kept.size()}, {"keep_rate", report.keep_rate ? json(*report.keep_rate) : json(nullptr)}});
  return 0;
}

int train(const RunConfig& cfg) {
  const bool need_synth = cfg.regime != net::Regime::RealOnly, need_real = cfg.regime != net::Regime::SynthOnly;
  std::vector<net::Sample> synth, synth_val, real, real_val;
  std::vector<ImageRecord> real_records;
  const auto load = [&](const std::string& path, const std::string& key, std::vector<net::Sample>& train_out,
                        std::vector<net::Sample>& val_out) {
    const Dataset ds = require_dataset(path, key);
    train_out = net::load_samples(require_split(ds, "train", key).images, ds.root);
    if (const Split* v = ds.find_split(cfg.data.val_split)) val_out = net::load_samples(v->images, ds.root);
  };
  if (need_synth) load(cfg.data.synth, "data.synth", synth, synth_val);
  if (need_real) load(cfg.data.real, "data.real", real, real_val);

  RunDir run(cfg.out_dir, "train", cfg);
  const fs::path log_path = run.file("train_log.jsonl");
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw io_error("cannot write " + log_path.string());
  const bool det = deterministic_mode();
  const auto callback = [&](const net::EpochLog& e) {
    json j = json::parse(e.to_json());
    std::cerr << e.stage << " epoch " << e.epoch << " loss " << e.loss.total << " (" << e.seconds << " s)\n";
    if (det) j.erase("seconds");
    log << j.dump() << "\n" << std::flush;
  };
  const auto result = net::train(need_synth ? &synth : nullptr, need_real ? &real : nullptr, cfg.regime, cfg.model,
                                 cfg.train, cfg.seed, synth_val.empty() ? nullptr : &synth_val,
                                 real_val.empty() ? nullptr : &real_val, callback);
  log.close();
  run.record(log_path);

  json subset = json::array();
  for (std::size_t i : result.real_subset) subset.push_back(real[i].record.image_id);
  const json extra = {{"regime", net::to_string(cfg.regime)}, {"seed", cfg.seed}, {"real_images", subset.size()}};
  const fs::path ckpt = run.file("checkpoint.bin");
  net::Model model = result.model;
  model.save(ckpt, extra.dump());
  run.record(ckpt);
  if (need_real) run.write("real_subset.json", subset.dump() + "\n");
  json summary = extra;
  if (!result.log.empty()) summary["final_loss"] = result.log.back().loss.total;
  summary["fusion_weight"] = model.config().fusion_weight;
  run.finish(summary);
  return 0;
}

std::vector<metrics::ImagePrediction> predict_split(const net::Model& model, const std::vector<net::Sample>& samples,
                                                    net::InferMode mode) {
  std::vector<metrics::ImagePrediction> out;
  for (const auto& s : samples) out.push_back(net::predict_image(model, s, mode));
  return out;
}

int eval(const RunConfig& cfg) {
  const Dataset ds = require_dataset(cfg.data.eval, "data.eval");
  const Split& split = require_split(ds, cfg.data.eval_split, "data.eval");
  if (cfg.eval.predictions.empty() == cfg.eval.checkpoint.empty())
    throw validation_error("config: eval.checkpoint/eval.predictions: set exactly one");
  std::vector<metrics::ImagePrediction> preds;
  if (!cfg.eval.predictions.empty()) {
    preds = read_predictions(cfg.eval.predictions);
  } else {
    const auto model = net::Model::load(cfg.eval.checkpoint);
    preds = predict_split(model, net::load_samples(split.images, ds.root), cfg.eval.mode);
  }
  const auto report = metrics::evaluate(preds, split.images, cfg.eval.metrics);

  RunDir run(cfg.out_dir, "eval", cfg);
  if (!cfg.eval.checkpoint.empty()) run.write("predictions.json", predictions_to_json(preds).dump(2) + "\n");
  run.write("metrics.json", report.to_json() + "\n");
  run.write("metrics.txt", report.to_table());
  write_png(pr_curve_chart(report.hand_curve), run.file("pr_curve.png"));
  run.record(run.file("pr_curve.png"));
  std::cout << report.to_table();

  const auto values = [](const json& m) {
    return std::vector<double>{m.at("ap_hand"), m.at("ap_hand_side"), m.at("ap_hand_glove"),
                               m.at("ap_hand_state"), m.at("map_hand_obj"), m.at("map_hand_all")};
  };
  if (!cfg.eval.compare.empty()) {
    std::vector<std::vector<double>> runs{values(json::parse(report.to_json()))};
    json cmp = json::array({{{"run", run.path().generic_string()}, {"values", runs[0]}}});
    for (const auto& dir : cfg.eval.compare) {
      const json m = json::parse(read_text(fs::path(dir) / "metrics.json"));
      runs.push_back(values(m));
      cmp.push_back({{"run", dir}, {"values", runs.back()}});
    }
    const json doc = {{"metrics", {"ap_hand", "ap_hand_side", "ap_hand_glove", "ap_hand_state", "map_hand_obj", "map_hand_all"}},
                      {"runs", cmp}};
    run.write("regime_comparison.json", doc.dump(2) + "\n");
    write_png(grouped_bar_chart(runs), run.file("regime_comparison.png"));
    run.record(run.file("regime_comparison.png"));
  }
  run.finish(json::parse(report.to_json()));
  return 0;
}

int infer(const RunConfig& cfg) {
  const auto model = load_or_fail(cfg.eval.checkpoint, "eval.checkpoint");
  const Dataset ds = require_dataset(cfg.data.eval, "data.eval");
  const Split& split = require_split(ds, cfg.data.eval_split, "data.eval");
  const auto samples = net::load_samples(split.images, ds.root);
  RunDir run(cfg.out_dir, "infer", cfg);
  json images = json::array();
  std::vector<metrics::ImagePrediction> preds;
  for (const auto& s : samples) {
    const auto dets = model.infer(s.rgb, cfg.eval.mode, &s.record, s.mask ? &*s.mask : nullptr);
    std::vector<Detection> hands, objects;
    for (const auto& d : dets) (d.kind == DetectionKind::Hand ? hands : objects).push_back(d);
    const auto quads = match(hands, objects, s.rgb.width, s.rgb.height);
    images.push_back({{"image_id", s.record.image_id}, {"quadruples", json::parse(quadruples_to_json(quads, hands, objects))}});
    preds.push_back(net::predict_image(model, s, cfg.eval.mode));
  }
  run.write("quadruples.json", json{{"images", images}}.dump(2) + "\n");
  run.write("predictions.json", predictions_to_json(preds).dump(2) + "\n");
  std::cout << "wrote " << samples.size() << " images to " << run.path().string() << "\n";
  run.finish({{"images", samples.size()}, {"mode", net::to_string(cfg.eval.mode)}});
  return 0;
}

int bench(const RunConfig& cfg) {
  const net::Model model = cfg.bench.checkpoint.empty() ? net::Model(cfg.model, cfg.seed) : net::Model::load(cfg.bench.checkpoint);
  const int total = cfg.bench.warmup + cfg.bench.frames;
  std::vector<net::Sample> samples;
  if (!cfg.data.eval.empty()) {
    const Dataset ds = require_dataset(cfg.data.eval, "data.eval");
    const auto& images = require_split(ds, cfg.data.eval_split, "data.eval").images;
    if (images.empty()) throw validation_error("data.eval: split is empty");
    samples = net::load_samples(images, ds.root);
  } else {
    synth::SceneConfig scene = cfg.synth.scene;
    scene.seed = cfg.seed;
    for (int i = 0; i < std::min(total, 32); ++i) {
      auto s = synth::generate_scene(scene, i);
      samples.push_back({s.record, s.rgb, decode_depth(s.depth), s.instance_mask});
    }
  }
  std::vector<double> ms;
  for (int i = 0; i < total; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i) % samples.size()];
    const auto t0 = Clock::now();
    const auto dets = model.infer(s.rgb, cfg.bench.mode, &s.record, s.mask ? &*s.mask : nullptr);
    std::vector<Detection> hands, objects;
    for (const auto& d : dets) (d.kind == DetectionKind::Hand ? hands : objects).push_back(d);
    (void)match(hands, objects, s.rgb.width, s.rgb.height);
    const double dt = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    if (i >= cfg.bench.warmup) ms.push_back(dt);
  }
  const double mean = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
  std::vector<double> sorted = ms;
  std::sort(sorted.begin(), sorted.end());
  const auto pct = [&](double q) {
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
    return sorted[std::max<std::size_t>(rank, 1) - 1];
  };
  const json lat = {{"mode", net::to_string(cfg.bench.mode)},
                    {"warmup_frames", cfg.bench.warmup},
                    {"frames", cfg.bench.frames},
                    {"image_size", {samples[0].rgb.width, samples[0].rgb.height}},
                    {"mean_ms", mean},
                    {"p50_ms", pct(0.5)},
                    {"p90_ms", pct(0.9)},
                    {"min_ms", sorted.front()},
                    {"max_ms", sorted.back()},
                    {"fps", 1000.0 / mean}};
  RunDir run(cfg.out_dir, "bench", cfg);
  run.write("latency.json", lat.dump(2) + "\n");
  std::printf("%.2f ms per frame (p50 %.2f, p90 %.2f), %.2f FPS\n", mean, pct(0.5), pct(0.9), 1000.0 / mean);
  run.finish(lat);
  return 0;
}

}  // namespace

const std::vector<Command>& commands() {
  static const std::vector<Command> list{
      {"synth-gen", "Generate a labeled synthetic dataset into out_dir", synth_gen},
      {"aug-validate", "Filter augmented images by masked-background SSIM", aug_validate},
      {"stats", "Dataset statistics for data.synth / data.real / data.eval", stats},
      {"train", "Train a model under train.regime; writes checkpoint.bin and train_log.jsonl", train},
      {"eval", "Evaluate a checkpoint or a predictions file on data.eval", eval},
      {"infer", "Run a checkpoint on data.eval and write interaction quadruples", infer},
      {"bench", "Per-frame inference latency", bench},
  };
  return list;
}

}  // namespace ehoi::cli
