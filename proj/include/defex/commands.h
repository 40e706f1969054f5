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

// Pipeline subcommands behind the command-line tool. Each command reads a
// RunConfig, writes into a fresh run directory under paths.output_dir and
// leaves a run_manifest.json there (config snapshot, seed, versions, input
// hashes).

#ifndef DEFEX_COMMANDS_H_
#define DEFEX_COMMANDS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "defex/error.h"
#include "defex/serialization.h"

namespace defex {

inline constexpr const char* kDefexVersion = "0.1.0";

struct RunPaths {
  std::string corpus;
  std::string ontology;
  std::string docs;
  std::string gold;
  std::string output_dir = "runs";
  std::string checkpoint;
  std::string predictions;
  std::string index;
};

struct RunConfig {
  RunPaths paths;
  uint64_t seed = 0;
  EncoderConfig encoder;
  TrainConfig train;
  TrainConfig warm = WarmDefaults();
  RetrievalConfig retrieval;
  InferenceConfig inference;
  SyntheticSpec synthetic;
};

// Component seeds not given explicitly (train.seed, warm.seed) are derived
// from the global seed. Throws kConfiguration on unknown keys.
RunConfig RunConfigFromJson(const Json& j);
Json ToJson(const RunConfig& config);

// Applies "a.b.c=value" to a JSON object. value is parsed as JSON when
// possible and kept as a string otherwise.
void ApplyOverride(Json& config, const std::string& assignment);

struct CommandOptions {
  std::string run_name;        // timestamp when empty
  bool gold = false;           // warm: gold-annotation warming
  double gold_fraction = 1.0;  // warm --gold: share of gold records used
  // warm --gold: scale warm.epochs by 1 / gold_fraction (EqualUpdateEpochs)
  bool equal_updates = false;
  size_t repetitions = 3;      // bench
};

struct CommandResult {
  std::string run_dir;
  std::string summary;  // human-readable, printed by the tool
};

CommandResult CmdPretrain(const RunConfig& config, const CommandOptions& options);
CommandResult CmdWarm(const RunConfig& config, const CommandOptions& options);
CommandResult CmdInfer(const RunConfig& config, const CommandOptions& options);
CommandResult CmdEval(const RunConfig& config, const CommandOptions& options);
CommandResult CmdBench(const RunConfig& config, const CommandOptions& options);
CommandResult CmdSynth(const RunConfig& config, const CommandOptions& options);

// 0 success, 1 validation, 2 I/O, 3 numerical failure.
int ExitCodeFor(ErrorKind kind);

// FNV-1a of a file's bytes. Throws kInputNotFound.
uint64_t HashFile(const std::string& path);

}  // namespace defex

#endif  // DEFEX_COMMANDS_H_
