// Copyright (c) 2026 The ukat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "test_util.h"
#include "ukat/audio.h"
#include "ukat/model.h"

namespace ukat::cli {
namespace {

using ::ukat::testing::TempDir;

struct Outcome {
  int code;
  std::string out, err;
};

Outcome Invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = Run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<nlohmann::json> JsonLines(const std::string& text) {
  std::vector<nlohmann::json> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) rows.push_back(nlohmann::json::parse(line));
  return rows;
}

std::string Slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// One small dataset and a two-epoch tiny model shared by the suite.
class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli");
    const auto synth = Invoke({"synth", "--out", D("ds"), "--keywords", "2", "--events", "3",
                               "--per-class", "3", "--valid-per-class", "1",
                               "--eval-per-class", "2", "--negatives", "2", "--at-seconds", "2",
                               "--seed", "4"});
    ASSERT_EQ(synth.code, 0) << synth.err;
    const auto train = Invoke({"train", "--vocab", D("ds/vocab.txt"), "--kws",
                               D("ds/train_kws.jsonl"), "--at", D("ds/train_at.jsonl"),
                               "--valid", D("ds/valid.jsonl"), "--out", D("run"), "--arch", "tiny",
                               "--epochs", "2", "--batch-size", "8", "--top-k", "1", "--seed", "3",
                               "--quiet"});
    ASSERT_EQ(train.code, 0) << train.err;
  }
  static void TearDownTestSuite() { delete dir_; }
  static std::string D(const std::string& name) { return (*dir_) / name; }

  static TempDir* dir_;
};

TempDir* CliTest::dir_ = nullptr;

TEST_F(CliTest, TrainWritesRunDirectory) {
  for (const char* f : {"run/final.ukat", "run/history.csv", "run/train_config.toml",
                        "run/ckpt/ranking.json"}) {
    EXPECT_TRUE(std::filesystem::exists(D(f))) << f;
  }
  const auto cfg = Slurp(D("run/train_config.toml"));
  EXPECT_NE(cfg.find("seed = 3"), std::string::npos);
}

TEST(CliUsageTest, UnknownFlagIsUsageError) {
  const auto r = Invoke({"eval", "--bogus"});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(Invoke({}).code, kExitUsage);
  EXPECT_EQ(Invoke({"dance"}).code, kExitUsage);
}

TEST(CliUsageTest, HelpIsSuccess) {
  const auto r = Invoke({"--help"});
  EXPECT_EQ(r.code, kExitOk);
  for (const char* cmd : {"train", "eval", "infer", "strip", "relabel", "synth", "inspect"}) {
    EXPECT_NE(r.out.find(cmd), std::string::npos) << cmd;
  }
}

TEST_F(CliTest, InferEmitsOneRecordPerChunk) {
  const auto clip = ParseManifest(D("ds/eval_neg.jsonl")).front().audio;  // 10 s
  const auto r = Invoke({"infer", "--model", D("run/final.ukat"), clip});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = JsonLines(r.out);
  ASSERT_EQ(rows.size(), 10u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i]["chunk_index"], i);
    EXPECT_DOUBLE_EQ(rows[i]["start_s"].get<double>(), static_cast<double>(i));
    const auto& d = rows[i]["decision"];
    EXPECT_TRUE(d["branch"] == "kws" || d["branch"] == "at");
    EXPECT_GE(d["score"].get<double>(), 0.0);
    EXPECT_LE(rows[i]["events"].size(), 3u);
  }
}

TEST_F(CliTest, InferOnTwoFilesNamesThem) {
  const auto kws = ParseManifest(D("ds/eval_kws.jsonl"));
  const auto r = Invoke({"infer", "--model", D("run/final.ukat"), "--threshold", "0.0",
                         kws[0].audio, kws[1].audio});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto rows = JsonLines(r.out);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1]["file"], kws[1].audio);
  EXPECT_EQ(rows[0]["events"].size(), 3u);  // every event passes threshold 0
}

TEST_F(CliTest, TruncatedModelIsDataErrorWithOffset) {
  const std::string bytes = Slurp(D("run/final.ukat"));
  std::ofstream(D("cut.ukat"), std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  const auto clip = ParseManifest(D("ds/eval_kws.jsonl")).front().audio;
  const auto r = Invoke({"infer", "--model", D("cut.ukat"), clip});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("offset"), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingAudioIsDataError) {
  const auto r = Invoke({"infer", "--model", D("run/final.ukat"), D("nope.wav")});
  EXPECT_EQ(r.code, kExitData);
  EXPECT_NE(r.err.find("nope.wav"), std::string::npos);
}

TEST_F(CliTest, BadGammaIsUsageError) {
  EXPECT_EQ(Invoke({"eval", "--model", D("run/final.ukat"), "--manifest",
                    D("ds/eval_kws.jsonl"), "--gamma", "1.5"}).code,
            kExitUsage);
  EXPECT_EQ(Invoke({"eval", "--model", D("run/final.ukat"), "--manifest", D("ds/eval_neg.jsonl"),
                    "--task", "neg", "--gamma-sweep", "0:1"}).code,
            kExitUsage);
}

TEST_F(CliTest, EvalReportsAreReproducible) {
  const std::vector<std::string> args{"eval", "--model", D("run/final.ukat"), "--manifest",
                                      D("ds/eval_kws.jsonl"), "--task", "kws", "--seed", "3"};
  const auto a = Invoke(args), b = Invoke(args);
  ASSERT_EQ(a.code, kExitOk) << a.err;
  EXPECT_EQ(a.out, b.out);
  const auto j = nlohmann::json::parse(a.out);
  EXPECT_EQ(j["task"], "kws");
  EXPECT_EQ(j["seed"], 3);
  EXPECT_EQ(j["n_samples"], 6);  // 2 keywords + unknown, 2 each
  EXPECT_TRUE(j.contains("accuracy"));
  EXPECT_EQ(j["gamma"].get<double>(), 0.4);
  EXPECT_NE(a.err.find("seed=3"), std::string::npos);
}

TEST_F(CliTest, EvalWritesReportCsvAndSweep) {
  const auto r = Invoke({"eval", "--model", D("run/final.ukat"), "--manifest",
                         D("ds/eval_neg.jsonl"), "--task", "neg", "--report", D("neg.json"),
                         "--csv", D("neg.csv"), "--gamma-sweep", "0:1:0.25", "--sweep-csv",
                         D("sweep.csv")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = nlohmann::json::parse(Slurp(D("neg.json")));
  EXPECT_EQ(j["n_samples"], 20);
  EXPECT_TRUE(j.contains("rejection_rate"));
  EXPECT_EQ(Slurp(D("neg.csv")).rfind("label,support,ap,recall", 0), 0u);
  std::istringstream sweep(Slurp(D("sweep.csv")));
  std::string line;
  int rows = 0;
  while (std::getline(sweep, line)) ++rows;
  EXPECT_EQ(rows, 6);  // header + 5 gamma values
}

TEST_F(CliTest, StripThenInferAgreesWithFullModel) {
  const auto strip = Invoke({"strip", "--model", D("run/final.ukat"), "--keep", "alpha,bravo",
                             "--out", D("kws.ukat")});
  ASSERT_EQ(strip.code, kExitOk) << strip.err;
  const auto info = nlohmann::json::parse(strip.out);
  EXPECT_EQ(info["parameters_before"].get<int>() - info["parameters_after"].get<int>(), 3 * 33);

  std::vector<std::string> clips;
  for (const auto& e : ParseManifest(D("ds/eval_kws.jsonl"))) clips.push_back(e.audio);
  for (double gamma : {0.2, 0.4, 0.6}) {
    std::vector<std::string> full_args{"infer", "--model", D("run/final.ukat"), "--gamma",
                                       std::to_string(gamma)};
    std::vector<std::string> kws_args{"infer", "--model", D("kws.ukat"), "--gamma",
                                      std::to_string(gamma)};
    full_args.insert(full_args.end(), clips.begin(), clips.end());
    kws_args.insert(kws_args.end(), clips.begin(), clips.end());
    const auto full = JsonLines(Invoke(full_args).out);
    const auto kws = JsonLines(Invoke(kws_args).out);
    ASSERT_EQ(full.size(), kws.size());
    for (std::size_t i = 0; i < full.size(); ++i) {
      EXPECT_EQ(full[i]["decision"]["branch"], kws[i]["decision"]["branch"]);
      if (full[i]["decision"]["branch"] == "kws") {
        EXPECT_EQ(full[i]["decision"]["label"], kws[i]["decision"]["label"]);
        EXPECT_EQ(full[i]["decision"]["score"], kws[i]["decision"]["score"]);
      } else {
        EXPECT_TRUE(kws[i]["decision"]["label"].is_null());
      }
      EXPECT_TRUE(kws[i]["events"].empty());
    }
  }
}

TEST_F(CliTest, StripKeepFromFile) {
  std::ofstream(D("keep.txt")) << "# keywords only\nalpha\n\nbravo\n";
  const auto r = Invoke({"strip", "--model", D("run/final.ukat"), "--keep", "@" + D("keep.txt"),
                         "--out", D("kws2.ukat")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(LoadModel(D("kws2.ukat")).vocab.kws_labels(),
            (std::vector<std::string>{"alpha", "bravo"}));
  EXPECT_EQ(Invoke({"strip", "--model", D("run/final.ukat"), "--keep", "zulu", "--out",
                    D("x.ukat")}).code,
            kExitUsage);
}

TEST_F(CliTest, RelabelWritesSoftTeacherScores) {
  const auto r = Invoke({"relabel", "--teacher", D("run/final.ukat"), "--manifest",
                         D("ds/train_at.jsonl"), "--crop", "1.0", "--out", D("psl")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto entries = ParseManifest(D("psl/psl.jsonl"));
  ASSERT_EQ(entries.size(), 2u * 3u * 2u);  // 2 textures x 3 clips x 2 one-second chunks
  const Model teacher = LoadModel(D("run/final.ukat"));
  for (const auto& e : entries) {
    EXPECT_EQ(e.soft.size(), static_cast<std::size_t>(teacher.vocab.num_at()));
    EXPECT_NEAR(ReadWav(e.audio).duration(), 1.0, 1e-9);
    for (const auto& [name, score] : e.soft) {
      EXPECT_GE(score, 0.0);
      EXPECT_LE(score, 1.0);
    }
  }
  // A second run into the same directory refuses to overwrite.
  EXPECT_EQ(Invoke({"relabel", "--teacher", D("run/final.ukat"), "--manifest",
                    D("ds/train_at.jsonl"), "--out", D("psl")}).code,
            kExitData);
}

TEST_F(CliTest, TrainOnRelabeledDataAndFromInit) {
  const auto r = Invoke({"train", "--vocab", D("ds/vocab.txt"), "--at", D("ds/train_at.jsonl"),
                         "--valid", D("ds/valid.jsonl"), "--out", D("run2"), "--init",
                         D("run/final.ukat"), "--teacher", D("run/final.ukat"), "--epochs", "1",
                         "--batch-size", "4", "--quiet"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(nlohmann::json::parse(r.out)["epochs_run"], 1);
}

TEST_F(CliTest, ConfigFileAndBadConfig) {
  std::ofstream(D("good.toml")) << "max_epochs = 1\nbatch_size = 4\nrandom_crop = off\n"
                                   "uncropped_seconds = 2.0\n";
  const auto ok = Invoke({"train", "--vocab", D("ds/vocab.txt"), "--kws", D("ds/train_kws.jsonl"),
                          "--valid", D("ds/valid.jsonl"), "--out", D("run3"), "--arch", "tiny",
                          "--config", D("good.toml"), "--quiet"});
  ASSERT_EQ(ok.code, kExitOk) << ok.err;
  EXPECT_NE(Slurp(D("run3/train_config.toml")).find("random_crop = false"), std::string::npos);

  std::ofstream(D("bad.toml")) << "max_epochs = 1\nwarmup = 3\n";
  const auto bad = Invoke({"train", "--vocab", D("ds/vocab.txt"), "--kws", D("ds/train_kws.jsonl"),
                           "--valid", D("ds/valid.jsonl"), "--out", D("run4"), "--config",
                           D("bad.toml")});
  EXPECT_EQ(bad.code, kExitUsage);
  EXPECT_NE(bad.err.find("warmup"), std::string::npos);
}

TEST_F(CliTest, DivergenceIsNumericExit) {
  const auto r = Invoke({"train", "--vocab", D("ds/vocab.txt"), "--kws", D("ds/train_kws.jsonl"),
                         "--at", D("ds/train_at.jsonl"), "--valid", D("ds/valid.jsonl"), "--out",
                         D("run5"), "--arch", "tiny", "--epochs", "3", "--lr", "1e38", "--quiet"});
  // A learning rate this large overflows the parameters within a few steps.
  EXPECT_EQ(r.code, kExitNumeric) << r.out << r.err;
}

TEST_F(CliTest, InspectReportsCounts) {
  const auto r = Invoke({"inspect", D("run/final.ukat")});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  const Model m = LoadModel(D("run/final.ukat"));
  EXPECT_EQ(j["parameters"], CountParameters(m));
  EXPECT_EQ(j["stored_elements"], CountStoredElements(m));
  EXPECT_EQ(j["file_bytes"], std::filesystem::file_size(D("run/final.ukat")));
  EXPECT_EQ(j["header"]["architecture"]["embedding_dim"], 32);
}

}  // namespace
}  // namespace ukat::cli
