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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ehoi/augval.hpp"
#include "ehoi/metrics.hpp"
#include "ehoi/net.hpp"
#include "ehoi/synthgen.hpp"
#include "json.hpp"

namespace ehoi::cli {

using json = nlohmann::ordered_json;

struct DataPaths {
  std::string synth;  // dataset directory or split file
  std::string real;
  std::string eval;
  std::string eval_split = "test";
  std::string val_split = "val";
};

struct SynthGenConfig {
  synth::SceneConfig scene;
  int n_train = 200, n_val = 50, n_test = 50;
};

struct AugValConfig {
  std::string original_dir, augmented_dir, annotations;
  double threshold = augval::kDefaultThreshold;
  double margin = augval::kDefaultMargin;
  augval::SsimParams ssim;
  bool mock_augment = false;  // write mock augmentations into augmented_dir first
};

struct EvalSection {
  metrics::EvalConfig metrics;
  net::InferMode mode = net::InferMode::GtProposals;
  std::string checkpoint;
  std::string predictions;
  std::vector<std::string> compare;  // other run directories for the regime chart
};

struct BenchConfig {
  std::string checkpoint;  // empty: freshly initialized model
  net::InferMode mode = net::InferMode::Detector;
  int warmup = 5, frames = 50;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "runs/latest";
  DataPaths data;
  SynthGenConfig synth;
  AugValConfig augval;
  net::ModelConfig model;
  net::TrainConfig train;
  net::Regime regime = net::Regime::SynthOnly;
  EvalSection eval;
  BenchConfig bench;

  void validate() const;
};

json to_json(const RunConfig& c);

/// Defaults, then `file` (if non-empty), then `--dot.path value` overrides.
/// Unknown keys and type mismatches are validation errors naming the field.
RunConfig load_config(const std::filesystem::path& file, const std::vector<std::string>& overrides);

}  // namespace ehoi::cli
