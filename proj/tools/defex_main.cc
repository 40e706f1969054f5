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

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "defex/commands.h"

namespace {

struct Flags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string corpus, ontology, docs, gold_path, output_dir, checkpoint, predictions, index;
  std::string run_name;
  long long seed = -1;
  double threshold = -2.0;
  bool gold = false;
  double gold_fraction = 1.0;
  bool equal_updates = false;
  size_t repetitions = 3;
};

void AddCommon(CLI::App* cmd, Flags& f) {
  cmd->add_option("-c,--config", f.config_path, "JSON run config");
  cmd->add_option("--set", f.overrides, "override a config key, e.g. train.epochs=5");
  cmd->add_option("--corpus", f.corpus, "alignments.jsonl");
  cmd->add_option("--ontology", f.ontology, "ontology.jsonl");
  cmd->add_option("--docs", f.docs, "docs.jsonl");
  cmd->add_option("--gold-path", f.gold_path, "gold.jsonl");
  cmd->add_option("--checkpoint", f.checkpoint, "model checkpoint");
  cmd->add_option("--predictions", f.predictions, "preds.jsonl");
  cmd->add_option("--index", f.index, "precomputed definition index");
  cmd->add_option("-o,--output-dir", f.output_dir, "parent of the run directory");
  cmd->add_option("--run-name", f.run_name, "run directory name (default: timestamped)");
  cmd->add_option("--seed", f.seed, "global seed");
}

defex::RunConfig BuildConfig(const Flags& f) {
  defex::Json j = defex::Json::object();
  if (!f.config_path.empty()) j = defex::ReadJsonFile(f.config_path);
  auto path = [&](const char* key, const std::string& value) {
    if (!value.empty()) j["paths"][key] = value;
  };
  path("corpus", f.corpus);
  path("ontology", f.ontology);
  path("docs", f.docs);
  path("gold", f.gold_path);
  path("checkpoint", f.checkpoint);
  path("predictions", f.predictions);
  path("index", f.index);
  path("output_dir", f.output_dir);
  if (f.seed >= 0) j["seed"] = f.seed;
  if (f.threshold > -2.0) j["inference"]["threshold"] = f.threshold;
  for (const std::string& o : f.overrides) defex::ApplyOverride(j, o);
  return defex::RunConfigFromJson(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"defex: zero-shot event extraction with definition embeddings"};
  app.require_subcommand(1);
  Flags f;

  using Command = defex::CommandResult (*)(const defex::RunConfig&, const defex::CommandOptions&);
  std::vector<std::pair<CLI::App*, Command>> commands;
  auto add = [&](const char* name, const char* help, Command fn) {
    CLI::App* cmd = app.add_subcommand(name, help);
    AddCommon(cmd, f);
    commands.emplace_back(cmd, fn);
    return cmd;
  };
  add("pretrain", "train both encoders on an alignment corpus", defex::CmdPretrain);
  CLI::App* warm = add("warm", "query-specific warming of a checkpoint", defex::CmdWarm);
  warm->add_flag("--gold", f.gold, "warm on gold annotations instead of retrieved instances");
  warm->add_option("--gold-fraction", f.gold_fraction, "share of gold records to use")
      ->check(CLI::Range(0.0, 1.0));
  warm->add_flag("--equal-updates", f.equal_updates,
                 "with --gold-fraction, scale warm epochs by 1/fraction");
  CLI::App* infer = add("infer", "extract mentions from documents", defex::CmdInfer);
  infer->add_option("--threshold", f.threshold, "cosine threshold t");
  add("eval", "score predictions against gold", defex::CmdEval);
  CLI::App* bench = add("bench", "disjoint vs joint encoding speed", defex::CmdBench);
  bench->add_option("--repetitions", f.repetitions, "timed repetitions (>= 3)");
  add("synth", "generate a synthetic dataset", defex::CmdSynth);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : defex::ExitCodeFor(defex::ErrorKind::kArgument);
  }

  for (const auto& [cmd, fn] : commands) {
    if (!cmd->parsed()) continue;
    try {
      const defex::RunConfig config = BuildConfig(f);
      defex::CommandOptions options;
      options.run_name = f.run_name;
      options.gold = f.gold;
      options.gold_fraction = f.gold_fraction;
      options.equal_updates = f.equal_updates;
      options.repetitions = f.repetitions;
      const defex::CommandResult result = fn(config, options);
      std::cout << result.summary << "run directory: " << result.run_dir << '\n';
      return 0;
    } catch (const defex::Error& e) {
      std::cerr << "error [" << defex::ErrorKindName(e.kind()) << "]: " << e.what() << '\n';
      return defex::ExitCodeFor(e.kind());
    } catch (const std::exception& e) {
      std::cerr << "error [internal-error]: " << e.what() << '\n';
      return 1;
    }
  }
  return 1;
}
