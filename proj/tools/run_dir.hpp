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

#include <filesystem>
#include <string>
#include <vector>

#include "config.hpp"

namespace ehoi::cli {

/// EHOI_DETERMINISTIC unset or not "0": wall-clock values stay out of every
/// artifact except latency.json, so reruns are byte-identical.
bool deterministic_mode();

std::string sha256_file(const std::filesystem::path& path);

/// Output directory of one command. Holds an exclusive lock file for its
/// lifetime and writes manifest.json on finish().
class RunDir {
 public:
  RunDir(const std::filesystem::path& dir, std::string command, const RunConfig& config);
  ~RunDir();
  RunDir(const RunDir&) = delete;
  RunDir& operator=(const RunDir&) = delete;

  const std::filesystem::path& path() const { return dir_; }
  std::filesystem::path file(const std::string& name) const { return dir_ / name; }

  /// Writes `text` to dir/name and records it as an artifact.
  void write(const std::string& name, const std::string& text);
  void record(const std::filesystem::path& file);
  void finish(const json& summary = json::object());

 private:
  std::filesystem::path dir_, lock_;
  std::string command_;
  json config_;
  std::uint64_t seed_;
  std::vector<std::filesystem::path> artifacts_;
};

}  // namespace ehoi::cli
