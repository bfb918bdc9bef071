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

#include "run_dir.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>

#include "ehoi/error.hpp"

namespace ehoi::cli {

namespace fs = std::filesystem;

bool deterministic_mode() {
  const char* v = std::getenv("EHOI_DETERMINISTIC");
  return !v || std::string(v) != "0";
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) out += {hex[digest[i] >> 4], hex[digest[i] & 15]};
  return out;
}

RunDir::RunDir(const fs::path& dir, std::string command, const RunConfig& config)
    : dir_(dir), lock_(dir / ".lock"), command_(std::move(command)), config_(to_json(config)), seed_(config.seed) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw io_error("cannot create output directory " + dir_.string() + ": " + ec.message());
  const int fd = ::open(lock_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST)
      throw io_error("output directory " + dir_.string() + " is locked by another run (remove " + lock_.string() +
                     " if stale)");
    throw io_error("cannot create lock file " + lock_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  (void)!::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunDir::~RunDir() {
  std::error_code ec;
  fs::remove(lock_, ec);
}

void RunDir::write(const std::string& name, const std::string& text) {
  const fs::path p = file(name);
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw io_error("cannot write " + p.string());
  record(p);
}

void RunDir::record(const fs::path& file) {
  if (std::find(artifacts_.begin(), artifacts_.end(), file) == artifacts_.end()) artifacts_.push_back(file);
}

void RunDir::finish(const json& summary) {
  json arts = json::array();
  for (const auto& a : artifacts_) {
    const fs::path rel = a.lexically_relative(dir_);
    const bool inside = !rel.empty() && *rel.begin() != "..";
    arts.push_back({{"path", inside ? rel.generic_string() : a.generic_string()},
                    {"sha256", sha256_file(a)},
                    {"bytes", fs::file_size(a)}});
  }
  json m = {{"command", command_},     {"seed", seed_},      {"deterministic", deterministic_mode()},
            {"config", config_},       {"summary", summary}, {"artifacts", arts}};
  std::ofstream out(file("manifest.json"), std::ios::binary);
  out << m.dump(2) << "\n";
  if (!out) throw io_error("cannot write " + file("manifest.json").string());
}

}  // namespace ehoi::cli
