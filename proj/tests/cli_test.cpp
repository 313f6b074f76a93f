// Copyright 2026 The asrlab Authors. All Rights Reserved.
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


#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "asrlab/cli.hpp"
#include "asrlab/config.hpp"
#include "asrlab/eval.hpp"
#include "json.hpp"

namespace asrlab {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "asrlab");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("asrlab_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string run_dir(const std::string& name = "run") const { return (root_ / name).string(); }

  fs::path root_;
};

TEST_F(Cli, HelpExitsZeroWithoutSideEffects) {
  for (const char* sub : {"synth-corpus", "train-tokenizer", "compute-cmvn", "pretrain", "filter", "finetune", "decode",
                          "score", "report"}) {
    const auto r = cli({sub, "--help", "--run-dir", run_dir()});
    EXPECT_EQ(r.code, 0) << sub;
    EXPECT_NE(r.out.find("Usage"), std::string::npos) << sub;
  }
  EXPECT_EQ(cli({"--help"}).code, 0);
  EXPECT_FALSE(fs::exists(run_dir()));
}

TEST_F(Cli, ExitCodes) {
  auto r = cli({});
  EXPECT_EQ(r.code, kExitUsage);
  r = cli({"score", "--refs", "a.jsonl", "--hyps", "b.jsonl", "--no-such-flag"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1) << r.err;
  EXPECT_NE(r.err.find("error[usage]"), std::string::npos);

  r = cli({"finetune", "--init", (root_ / "pretrain.ckpt").string(), "--train", "x.jsonl", "--run-dir", run_dir()});
  EXPECT_EQ(r.code, kExitMissingInput);
  EXPECT_NE(r.err.find("error[missing-input]"), std::string::npos);

  r = cli({"synth-corpus", "--set", "no.such.key=1", "--run-dir", run_dir()});
  EXPECT_EQ(r.code, kExitConfig);
  r = cli({"synth-corpus", "--set", "synth.min_words=9", "--run-dir", run_dir()});
  EXPECT_EQ(r.code, kExitConfig);
  r = cli({"synth-corpus", "--config", (root_ / "missing.cfg").string(), "--run-dir", run_dir()});
  EXPECT_EQ(r.code, kExitMissingInput);
}

TEST_F(Cli, ConfigFileSectionsAndOverrides) {
  {
    std::ofstream cfg(root_ / "a.cfg");
    cfg << "# toy settings\nseed = 5\n[pretrain]\nmax_steps = 12\n[synth]\nverified = \"3\"\n";
  }
  Config c;
  c.load_file(root_ / "a.cfg");
  EXPECT_EQ(c.get_u64("seed"), 5u);
  EXPECT_EQ(c.get_size("pretrain.max_steps"), 12u);
  EXPECT_EQ(c.get_size("synth.verified"), 3u);
  c.apply("pretrain.max_steps=20");
  EXPECT_EQ(c.train_run(train::Stage::kPretrain).max_steps, 20u);
  EXPECT_THROW(c.apply("pretrain.max_steps"), ConfigError);
  c.apply("pretrain.max_steps=abc");
  EXPECT_THROW(c.get_size("pretrain.max_steps"), ConfigError);
  {
    std::ofstream cfg(root_ / "b.cfg");
    cfg << "[pretrain]\nmax_stepz = 12\n";
  }
  try {
    c.load_file(root_ / "b.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("b.cfg:2"), std::string::npos) << e.what();
  }
  const Config defaults;
  EXPECT_EQ(defaults.train_run(train::Stage::kFinetune).schedule.stage, train::Stage::kFinetune);
  EXPECT_EQ(defaults.model().vocab_out, 129u);

  const auto r = cli({"synth-corpus", "--config", (root_ / "a.cfg").string(), "--seed", "8", "--run-dir", run_dir()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto echoed = slurp(root_ / "run" / "config.txt");
  EXPECT_NE(echoed.find("seed=8\n"), std::string::npos);
  EXPECT_NE(echoed.find("synth.verified=3\n"), std::string::npos);
  for (const char* d : {"checkpoints", "logs", "reports"}) EXPECT_TRUE(fs::is_directory(root_ / "run" / d)) << d;
}

TEST_F(Cli, RunDirFromEnvironment) {
  const auto dir = root_ / "env_run";
  ::setenv("ASRLAB_RUNDIR", dir.c_str(), 1);
  const auto r = cli({"synth-corpus", "--set", "synth.weak=0", "--set", "synth.test=0", "--set", "synth.dev=0"});
  ::unsetenv("ASRLAB_RUNDIR");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "corpus" / "verified.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "config.txt"));
}

TEST_F(Cli, ScoreIdenticalTextsIsZero) {
  const auto corpus = root_ / "c";
  ASSERT_EQ(cli({"synth-corpus", "--out", corpus.string(), "--run-dir", run_dir()}).code, 0);
  std::ofstream hyps(root_ / "hyps.jsonl");
  std::istringstream lines(slurp(corpus / "test.jsonl"));
  for (std::string line; std::getline(lines, line);) {
    const auto j = nlohmann::json::parse(line);
    hyps << nlohmann::json{{"id", j["id"]}, {"text", j["text"]}}.dump() << '\n';
  }
  hyps.close();
  const auto r = cli({"score", "--refs", (corpus / "test.jsonl").string(), "--hyps", (root_ / "hyps.jsonl").string(),
                      "--format", "csv", "--run-dir", run_dir()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("WER,0.00,0.00,0.00,0.00,0.00,0.00,0.00,0.00,0.00"), std::string::npos) << r.out;
  const auto rep = cli({"report", "--run-dir", run_dir(), "--format", "csv"});
  EXPECT_EQ(rep.out, r.out);
}

TEST_F(Cli, FilterCountsNewsSource) {
  const auto corpus = root_ / "c";
  ASSERT_EQ(cli({"synth-corpus", "--out", corpus.string(), "--run-dir", run_dir()}).code, 0);
  const auto r = cli({"filter", "--in", (corpus / "weak.jsonl").string(), "--policy", "default", "--run-dir", run_dir()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto stats = nlohmann::json::parse(slurp(root_ / "run" / "reports" / "filter_stats.json"));
  EXPECT_GE(stats["reasons"]["source"].get<int>(), 1);
  EXPECT_EQ(stats["input"].get<int>(), 40);
  EXPECT_EQ(stats["retained"].get<int>() + stats["rejected"].get<int>(), 40);
  EXPECT_TRUE(fs::exists(root_ / "run" / "reports" / "filter_stats.txt"));
}

/// synth-corpus -> train-tokenizer -> compute-cmvn -> pretrain -> filter -> finetune -> decode -> score
std::vector<Result> pipeline(const std::string& run) {
  const std::string c = run + "/corpus";
  const std::vector<std::string> fast = {
      "--set", "pretrain.max_steps=12", "--set", "pretrain.warmup_steps=4", "--set", "pretrain.eval_interval=6",
      "--set", "finetune.max_steps=4",  "--set", "finetune.warmup_steps=2", "--set", "finetune.eval_interval=2",
      "--set", "pretrain.checkpoint_interval=6", "--run-dir", run};
  auto with = [&](std::vector<std::string> args) {
    args.insert(args.end(), fast.begin(), fast.end());
    return cli(args);
  };
  std::vector<Result> out;
  for (auto args : std::vector<std::vector<std::string>>{
           {"synth-corpus", "--seed", "3"},
           {"train-tokenizer", "--manifest", c + "/verified.jsonl", "--manifest", c + "/weak.jsonl", "--manifest",
            c + "/dev.jsonl", "--manifest", c + "/test.jsonl"},
           {"compute-cmvn", "--manifest", c + "/weak.jsonl"},
           {"pretrain", "--train", c + "/weak.jsonl", "--dev", c + "/dev.jsonl"},
           {"filter", "--in", c + "/weak.jsonl", "--model", run + "/checkpoints/pretrain.ckpt"},
           {"finetune", "--init", run + "/checkpoints/pretrain.ckpt", "--train", c + "/verified.jsonl", "--weak",
            run + "/filtered.jsonl", "--dev", c + "/dev.jsonl"},
           {"decode", "--model", run + "/checkpoints/finetune.ckpt", "--manifest", c + "/test.jsonl"},
           {"score", "--refs", c + "/test.jsonl", "--hyps", run + "/reports/hyps.jsonl"},
       }) {
    out.push_back(with(args));
    if (out.back().code != 0) break;
  }
  return out;
}

TEST_F(Cli, ToyPipelineEndToEndAndDeterministic) {
  const auto a = pipeline(run_dir("a"));
  ASSERT_EQ(a.size(), 8u);
  for (const auto& r : a) ASSERT_EQ(r.code, 0) << r.err;
  const auto report = eval::parse_report_json(slurp(root_ / "a" / "reports" / "score.json"));
  EXPECT_EQ(report.dialects.size(), 8u);
  EXPECT_NE(a.back().out.find("WER (%)"), std::string::npos);
  EXPECT_TRUE(fs::exists(root_ / "a" / "logs" / "pretrain.log"));
  EXPECT_TRUE(fs::exists(root_ / "a" / "logs" / "finetune.log"));
  EXPECT_TRUE(fs::exists(root_ / "a" / "checkpoints" / "pretrain" / "step-6.ckpt"));
  EXPECT_NE(a[5].out.find("peak lr 0.0002"), std::string::npos) << a[5].out;

  const auto b = pipeline(run_dir("b"));
  ASSERT_EQ(b.size(), 8u);
  for (const char* f : {"vocab.txt", "cmvn.txt", "filtered.jsonl", "checkpoints/pretrain.ckpt",
                        "checkpoints/finetune.ckpt", "logs/pretrain.log", "logs/finetune.log", "reports/hyps.jsonl",
                        "reports/score.json", "reports/filter_stats.json", "corpus/wav/weak_007.wav"}) {
    EXPECT_EQ(slurp(root_ / "a" / f), slurp(root_ / "b" / f)) << f;
    // The briefly trained model rejects every weak entry, so only filtered.jsonl may be empty.
    if (std::string_view(f) != "filtered.jsonl") EXPECT_FALSE(slurp(root_ / "a" / f).empty()) << f;
  }

  // Resuming from the mid-run checkpoint rewrites the same final checkpoint.
  const std::string run = run_dir("a");
  const auto resumed = cli({"pretrain", "--train", run + "/corpus/weak.jsonl", "--dev", run + "/corpus/dev.jsonl",
                            "--resume", run + "/checkpoints/pretrain/step-6.ckpt", "--out", run + "/resumed.ckpt",
                            "--set", "pretrain.max_steps=12", "--set", "pretrain.warmup_steps=4", "--set",
                            "pretrain.eval_interval=6", "--run-dir", run});
  ASSERT_EQ(resumed.code, 0) << resumed.err;
  EXPECT_EQ(slurp(root_ / "a" / "resumed.ckpt"), slurp(root_ / "a" / "checkpoints" / "pretrain.ckpt"));
  EXPECT_EQ(slurp(root_ / "a" / "logs" / "pretrain.log"), slurp(root_ / "b" / "logs" / "pretrain.log"));
}

}  // namespace
}  // namespace asrlab
