// Copyright 2026 The defex Authors.
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

// Drives the command-line tool as a subprocess.

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "defex/commands.h"
#include "fixtures.h"

namespace defex {
namespace {

using testing::ErrorOf;

struct Outcome {
  int code = -1;
  std::string err;
};

std::string Slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome Run(const testing::TempDir& dir, const std::string& args) {
  const std::string err = dir / "stderr.txt";
  const std::string cmd = std::string(DEFEX_CLI_PATH) + " " + args + " -o " + dir.path().string() +
                          " > " + (dir / "stdout.txt") + " 2> " + err;
  const int status = std::system(cmd.c_str());
  return Outcome{WIFEXITED(status) ? WEXITSTATUS(status) : -1, Slurp(err)};
}

const char* kSmall =
    " --set synthetic.n_types=4 synthetic.n_distractors=6 synthetic.instances_per_definition=4"
    " synthetic.distractor_instances_per_definition=4 synthetic.mentions_per_type=4"
    " encoder.embedding_dim=16 encoder.n_heads=2 train.epochs=1 warm.epochs=1";

// Synthetic data set under dir/data.
void Synth(const testing::TempDir& dir) {
  REQUIRE(Run(dir, std::string("synth --run-name data --seed 3") + kSmall).code == 0);
}

std::string Data(const testing::TempDir& dir, const char* file) {
  return dir / (std::string("data/") + file);
}

TEST_SUITE("cli") {
  TEST_CASE("synth then pretrain, reproducibly") {
    testing::TempDir dir;
    Synth(dir);
    const std::string args = "--corpus " + Data(dir, "alignments.jsonl") + " --ontology " +
                             Data(dir, "ontology.jsonl") + " --seed 4" + kSmall;
    REQUIRE(Run(dir, "pretrain --run-name p1 " + args).code == 0);
    REQUIRE(Run(dir, "pretrain --run-name p2 " + args).code == 0);
    CHECK(HashFile(dir / "p1/model.ckpt") == HashFile(dir / "p2/model.ckpt"));
    const Json manifest = Json::parse(Slurp(dir / "p1/run_manifest.json"));
    CHECK(manifest.at("command") == "pretrain");
    CHECK(manifest.at("seed") == 4);
    CHECK(manifest.contains("inputs"));

    const Outcome again = Run(dir, "pretrain --run-name p1 " + args);
    CHECK(again.code == 1);
    CHECK(again.err.find("validation-error") != std::string::npos);
  }

  TEST_CASE("missing inputs are reported with exit code 2") {
    testing::TempDir dir;
    const Outcome r = Run(dir, "pretrain --corpus " + (dir / "nope.jsonl") + kSmall);
    CHECK(r.code == 2);
    CHECK(r.err.find("input-not-found") != std::string::npos);
    Synth(dir);
    const Outcome w = Run(dir, "warm --checkpoint " + (dir / "nope.ckpt") + " --corpus " +
                                   Data(dir, "alignments.jsonl") + " --ontology " +
                                   Data(dir, "ontology.jsonl") + kSmall);
    CHECK(w.code == 2);
    CHECK(w.err.find("input-not-found") != std::string::npos);
  }

  TEST_CASE("configuration errors") {
    testing::TempDir dir;
    Synth(dir);
    const Outcome bad_key = Run(dir, "pretrain --corpus " + Data(dir, "alignments.jsonl") +
                                         " --set train.epoch=3");
    CHECK(bad_key.code == 1);
    CHECK(bad_key.err.find("configuration-error") != std::string::npos);
    CHECK(Run(dir, "frobnicate").code != 0);
  }

  TEST_CASE("pretrain, warm, infer and eval end to end") {
    testing::TempDir dir;
    Synth(dir);
    const std::string data = " --corpus " + Data(dir, "alignments.jsonl") + " --ontology " +
                             Data(dir, "ontology.jsonl") + " --docs " + Data(dir, "docs.jsonl") +
                             " --gold-path " + Data(dir, "gold.jsonl") + kSmall;
    REQUIRE(Run(dir, "pretrain --run-name p" + data).code == 0);
    REQUIRE(Run(dir, "warm --run-name w --checkpoint " + (dir / "p/model.ckpt") + data).code == 0);
    CHECK(Json::parse(Slurp(dir / "w/warming_manifest.json")).contains("retrieved_definition_ids"));
    REQUIRE(Run(dir, "warm --gold --gold-fraction 0.5 --run-name g --checkpoint " +
                         (dir / "p/model.ckpt") + data).code == 0);
    REQUIRE(Run(dir, "infer --run-name i --threshold 0.0 --checkpoint " + (dir / "w/model.ckpt") +
                         data).code == 0);
    const Json counters = Json::parse(Slurp(dir / "i/counters.json"));
    CHECK(counters.at("definition_calls") == 4);
    REQUIRE(Run(dir, "eval --run-name e --predictions " + (dir / "i/preds.jsonl") + data).code == 0);
    const Json report = Json::parse(Slurp(dir / "e/eval_report.json"));
    CHECK(report.at("model").size() == 2);
    CHECK(report.contains("chance"));
    CHECK(report.contains("most_popular"));
  }

  TEST_CASE("eval scores the three-versus-four fixture") {
    testing::TempDir dir;
    {
      std::ofstream(dir / "ontology.jsonl") << R"({"type_name":"Attack","definition":["a","violent","act"]})"
                                            << "\n"
                                            << R"({"type_name":"Meet","definition":["people","gather"]})"
                                            << "\n";
      std::ofstream(dir / "docs.jsonl")
          << R"({"doc_id":"d0","sentences":[["w","x","y","z","v"],["w","x"],["w","x","y","z"]],)"
          << R"("candidates":[[0,1,1],[0,4,4],[1,0,1],[1,0,0],[2,3,3]]})" << "\n";
    }
    GoldMentionSet gold;
    gold.Insert({"d0", 0, 1, 1}, {"Attack"});
    gold.Insert({"d0", 0, 4, 4}, {"Meet"});
    gold.Insert({"d0", 1, 0, 1}, {"Attack"});
    gold.Insert({"d0", 2, 3, 3}, {"Meet"});
    SaveGold(gold, dir / "gold.jsonl");
    PredictionSet preds;
    preds.Insert({"d0", 0, 1, 1}, {"Attack", 0.9});
    preds.Insert({"d0", 0, 4, 4}, {"Attack", 0.8});
    preds.Insert({"d0", 1, 0, 0}, {"Attack", 0.75});
    SavePredictions(preds, dir / "preds.jsonl");
    const std::string common = " --ontology " + (dir / "ontology.jsonl") + " --docs " +
                               (dir / "docs.jsonl") + " --gold-path " + (dir / "gold.jsonl");
    const Outcome r = Run(dir, "eval --run-name e --predictions " + (dir / "preds.jsonl") + common);
    REQUIRE(r.code == 0);
    const Json report = Json::parse(Slurp(dir / "e/eval_report.json"));
    const Json& id = report.at("model")[0];
    const Json& cls = report.at("model")[1];
    CHECK(id.at("mode") == "identification");
    CHECK(std::abs(id.at("f1").get<double>() - 4.0 / 7.0) <= 1e-12);
    CHECK(std::abs(cls.at("f1").get<double>() - 2.0 / 7.0) <= 1e-12);

    PredictionSet perfect_preds;
    for (const auto& [k, v] : gold.records()) perfect_preds.Insert(k, {v.type_name, 0.9});
    SavePredictions(perfect_preds, dir / "perfect.jsonl");
    REQUIRE(Run(dir, "eval --run-name perfect --predictions " + (dir / "perfect.jsonl") + common).code == 0);
    const Json perfect = Json::parse(Slurp(dir / "perfect/eval_report.json"));
    CHECK(perfect.at("model")[1].at("f1") == 1.0);

    PredictionSet stray;
    stray.Insert({"d0", 0, 1, 1}, {"Transfer", 0.9});
    SavePredictions(stray, dir / "stray.jsonl");
    const Outcome mismatch = Run(dir, "eval --predictions " + (dir / "stray.jsonl") + common);
    CHECK(mismatch.code == 1);
    CHECK(mismatch.err.find("validation-error") != std::string::npos);
  }

  TEST_CASE("inference over an empty document file") {
    testing::TempDir dir;
    Synth(dir);
    std::ofstream(dir / "empty.jsonl").close();
    const std::string data = " --corpus " + Data(dir, "alignments.jsonl") + " --ontology " +
                             Data(dir, "ontology.jsonl") + kSmall;
    REQUIRE(Run(dir, "pretrain --run-name p" + data).code == 0);
    const Outcome r = Run(dir, "infer --run-name i --checkpoint " + (dir / "p/model.ckpt") +
                                   " --docs " + (dir / "empty.jsonl") + data);
    REQUIRE(r.code == 0);
    CHECK(Slurp(dir / "i/preds.jsonl").empty());
  }

  TEST_CASE("config overrides") {
    Json j = ToJson(RunConfig{});
    ApplyOverride(j, "train.epochs=7");
    ApplyOverride(j, "paths.corpus=some/file.jsonl");
    ApplyOverride(j, "inference.threshold=0.25");
    const RunConfig c = RunConfigFromJson(j);
    CHECK(c.train.epochs == 7);
    CHECK(c.paths.corpus == "some/file.jsonl");
    CHECK(c.inference.threshold == 0.25);
    CHECK(ErrorOf([&] { ApplyOverride(j, "no-equals-sign"); }).has_value());
    Json bad = ToJson(RunConfig{});
    bad["train"]["epoch"] = 3;
    CHECK(ErrorOf([&] { RunConfigFromJson(bad); }) == ErrorKind::kConfiguration);
    // round trip
    CHECK(ToJson(RunConfigFromJson(ToJson(c))) == ToJson(c));
  }

  TEST_CASE("exit codes by category") {
    CHECK(ExitCodeFor(ErrorKind::kInputNotFound) == 2);
    CHECK(ExitCodeFor(ErrorKind::kIo) == 2);
    CHECK(ExitCodeFor(ErrorKind::kNumerical) == 3);
    for (ErrorKind k : {ErrorKind::kParse, ErrorKind::kValidation, ErrorKind::kArgument,
                        ErrorKind::kConfiguration, ErrorKind::kFingerprint, ErrorKind::kTruncation,
                        ErrorKind::kDegenerate, ErrorKind::kInternal}) {
      CHECK(ExitCodeFor(k) == 1);
    }
    CHECK(ErrorKindName(ErrorKind::kInputNotFound) == "input-not-found");
    CHECK(ErrorOf([] { HashFile("/nonexistent/defex"); }) == ErrorKind::kInputNotFound);
  }
}

}  // namespace
}  // namespace defex
