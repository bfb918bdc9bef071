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

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "support/fixtures.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using ehoi::fixtures::slurp;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("ehoi_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(const std::string& args) {
    const std::string cmd = "cd '" + dir_.string() + "' && '" EHOI_CLI_PATH "' " + args + " >cli.out 2>cli.err";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  json read_json(const std::string& rel) { return json::parse(slurp(dir_ / rel)); }
  std::string err() { return slurp(dir_ / "cli.err"); }

  void write_fixture_dataset() {
    fs::create_directories(dir_ / "fx");
    std::ofstream(dir_ / "fx" / "test.json") << ehoi::fixtures::annotation_fixture();
  }

  fs::path dir_;
};

std::string sha256sum(const fs::path& p) {
  const std::string cmd = "sha256sum '" + p.string() + "'";
  FILE* f = popen(cmd.c_str(), "r");
  char buf[65] = {};
  const std::size_t n = std::fread(buf, 1, 64, f);
  pclose(f);
  return std::string(buf, n);
}

}  // namespace

TEST_F(Cli, StatsReproduceFixtureCounts) {
  write_fixture_dataset();
  ASSERT_EQ(run("stats --data.eval fx --out_dir st"), 0) << err();
  const auto rows = read_json("st/stats.json")["eval"];
  const auto& total = rows.back();
  EXPECT_EQ(total["n_images"], 1);
  EXPECT_EQ(total["n_hands"], 2);
  EXPECT_EQ(total["n_ehois"], 1);
  EXPECT_EQ(total["n_left"], 1);
  EXPECT_EQ(total["n_right"], 1);
  EXPECT_EQ(total["n_objects"], 3);
  EXPECT_EQ(total["glove_fraction"], 50.0);
  const auto manifest = read_json("st/manifest.json");
  EXPECT_EQ(manifest["command"], "stats");
  bool found = false;
  for (const auto& a : manifest["artifacts"])
    if (a["path"] == "stats.json") {
      found = true;
      EXPECT_EQ(a["sha256"], sha256sum(dir_ / "st" / "stats.json"));
    }
  EXPECT_TRUE(found);
  EXPECT_FALSE(fs::exists(dir_ / "st" / ".lock"));
}

TEST_F(Cli, PerfectPredictionsScoreHundred) {
  write_fixture_dataset();
  // the fixture's ground truth restated as predictions
  const json preds = {{"images",
                       {{{"image_id", "f0"},
                         {"hands",
                          {{{"bbox", {10, 10, 30, 40}}, {"confidence", 0.9}, {"side", "left"}, {"contact", "contact"},
                            {"glove", "glove"}, {"object_bbox", {40, 20, 50, 30}}, {"object_category", 0}},
                           {{"bbox", {60, 10, 80, 40}}, {"confidence", 0.8}, {"side", "right"}, {"contact", "no_contact"},
                            {"glove", "no_glove"}, {"object_bbox", nullptr}, {"object_category", nullptr}}}}}}}};
  std::ofstream(dir_ / "preds.json") << preds.dump();
  ASSERT_EQ(run("eval --data.eval fx --eval.predictions preds.json --out_dir ev"), 0) << err();
  const auto m = read_json("ev/metrics.json");
  for (const char* k : {"ap_hand", "ap_hand_side", "ap_hand_glove", "ap_hand_state", "map_hand_obj", "map_hand_all"})
    EXPECT_DOUBLE_EQ(m[k].get<double>(), 100.0) << k;
  EXPECT_TRUE(fs::exists(dir_ / "ev" / "pr_curve.png"));
  EXPECT_TRUE(fs::exists(dir_ / "ev" / "metrics.txt"));

  ASSERT_EQ(run("eval --data.eval fx --eval.predictions preds.json --out_dir ev2 --eval.compare '[\"ev\"]'"), 0) << err();
  EXPECT_TRUE(fs::exists(dir_ / "ev2" / "regime_comparison.png"));
  EXPECT_EQ(read_json("ev2/regime_comparison.json")["runs"].size(), 2u);
}

TEST_F(Cli, SplitMismatchIsValidationError) {
  write_fixture_dataset();
  std::ofstream(dir_ / "preds.json") << R"({"images":[{"image_id":"other","hands":[]}]})";
  EXPECT_EQ(run("eval --data.eval fx --eval.predictions preds.json --out_dir ev"), 1);
}

TEST_F(Cli, ExitCodes) {
  write_fixture_dataset();
  EXPECT_EQ(run("stats --data.eval fx --model.bogus 1 --out_dir a"), 1);
  EXPECT_NE(err().find("model.bogus"), std::string::npos);
  EXPECT_EQ(run("stats --data.eval fx --train.epochs many --out_dir a"), 1);
  EXPECT_NE(err().find("train.epochs"), std::string::npos);
  EXPECT_EQ(run("stats --data.eval missing_dir --out_dir a"), 2);
  EXPECT_EQ(run("eval --data.eval fx --eval.checkpoint missing.bin --out_dir a"), 2);
  EXPECT_EQ(run("no-such-command"), 1);
  fs::create_directories(dir_ / "locked");
  std::ofstream(dir_ / "locked" / ".lock") << "1\n";
  EXPECT_EQ(run("stats --data.eval fx --out_dir locked"), 2);
  EXPECT_NE(err().find("locked"), std::string::npos);
}

TEST_F(Cli, ConfigFileWithOverrides) {
  write_fixture_dataset();
  std::ofstream(dir_ / "cfg.json") << R"({"data":{"eval":"nowhere"},"out_dir":"from_file"})";
  EXPECT_EQ(run("stats -c cfg.json --data.eval fx"), 0) << err();
  EXPECT_EQ(read_json("from_file/manifest.json")["config"]["data"]["eval"], "fx");
}

TEST_F(Cli, BenchReportsConsistentLatency) {
  ASSERT_EQ(run("bench --bench.warmup 1 --bench.frames 5 --out_dir bn --model.pyramid_dim 16"), 0) << err();
  const auto l = read_json("bn/latency.json");
  EXPECT_EQ(l["frames"], 5);
  EXPECT_NEAR(l["fps"].get<double>(), 1000.0 / l["mean_ms"].get<double>(), 1e-9);
  EXPECT_LE(l["p50_ms"].get<double>(), l["p90_ms"].get<double>());
  EXPECT_LE(l["min_ms"].get<double>(), l["mean_ms"].get<double>());
}

TEST_F(Cli, PipelineIsReproducible) {
  ASSERT_EQ(run("synth-gen --out_dir data --synth.n_train 12 --synth.n_val 4 --synth.n_test 6 --seed 4"), 0) << err();
  const std::string train = "train --data.synth data --train.epochs 1 --train.batch_size 4 --model.pyramid_dim 16 "
                            "--model.head_hidden 16 --model.crop_size 48 --out_dir ";
  ASSERT_EQ(run(train + "t1"), 0) << err();
  ASSERT_EQ(run(train + "t2"), 0) << err();
  EXPECT_EQ(slurp(dir_ / "t1" / "checkpoint.bin"), slurp(dir_ / "t2" / "checkpoint.bin"));
  EXPECT_EQ(slurp(dir_ / "t1" / "train_log.jsonl"), slurp(dir_ / "t2" / "train_log.jsonl"));
  auto m1 = read_json("t1/manifest.json"), m2 = read_json("t2/manifest.json");
  EXPECT_EQ(m1["artifacts"], m2["artifacts"]);
  EXPECT_EQ(m1["seed"], 0);

  ASSERT_EQ(run("eval --data.eval data --eval.checkpoint t1/checkpoint.bin --out_dir e1"), 0) << err();
  ASSERT_EQ(run("eval --data.eval data --eval.checkpoint t2/checkpoint.bin --out_dir e2"), 0) << err();
  EXPECT_EQ(slurp(dir_ / "e1" / "metrics.json"), slurp(dir_ / "e2" / "metrics.json"));

  ASSERT_EQ(run("infer --data.eval data --eval.checkpoint t1/checkpoint.bin --out_dir inf"), 0) << err();
  EXPECT_EQ(read_json("inf/quadruples.json")["images"].size(), 6u);
}

TEST_F(Cli, AugValidateKeepsCleanPairs) {
  ASSERT_EQ(run("synth-gen --out_dir data --synth.n_train 0 --synth.n_val 0 --synth.n_test 6 --synth.min_hands 1"), 0)
      << err();
  ASSERT_EQ(run("aug-validate --augval.original_dir data --augval.augmented_dir aug --augval.annotations data/test.json "
                "--augval.mock_augment true --out_dir av"),
            0)
      << err();
  const auto r = read_json("av/augval_report.json");
  EXPECT_DOUBLE_EQ(r["keep_rate"].get<double>(), 0.5);
  ASSERT_EQ(run("stats --data.eval av/test.json --out_dir st"), 0) << err();
  EXPECT_EQ(read_json("st/stats.json")["eval"].back()["n_images"], 3);
  ASSERT_EQ(run("bench --data.eval av/test.json --bench.frames 2 --bench.warmup 0 --out_dir bn --model.pyramid_dim 16"), 0)
      << err();
}
