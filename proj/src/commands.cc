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

#include "defex/commands.h"

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "defex/corpus.h"
#include "defex/eval.h"
#include "defex/inference.h"
#include "defex/synthetic.h"
#include "defex/training.h"
#include "defex/warming.h"

namespace defex {
namespace fs = std::filesystem;
namespace {

const std::set<std::string> kTopKeys = {"paths", "seed", "encoder", "train", "warm",
                                        "retrieval", "inference", "synthetic"};
const std::set<std::string> kPathKeys = {"corpus", "ontology", "docs", "gold",
                                         "output_dir", "checkpoint", "predictions", "index"};

uint64_t WarmSeed(uint64_t seed) { return Rng::Mix(seed ^ 0x77a3ULL); }

const std::string& Require(const std::string& path, const char* what) {
  if (path.empty()) {
    Fail(ErrorKind::kConfiguration, std::string("paths.") + what + " is not set");
  }
  if (!fs::exists(path)) Fail(ErrorKind::kInputNotFound, "no such file: " + path);
  return path;
}

std::string Timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", &tm);
  return buf;
}

// Fresh directory; never reuses an existing one.
std::string MakeRunDir(const RunConfig& config, const CommandOptions& options,
                       const std::string& command) {
  const fs::path root = config.paths.output_dir.empty() ? "runs" : config.paths.output_dir;
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot create " + root.string() + ": " + ec.message());
  fs::path dir;
  if (!options.run_name.empty()) {
    dir = root / options.run_name;
    if (fs::exists(dir)) {
      Fail(ErrorKind::kValidation, "run directory already exists: " + dir.string());
    }
  } else {
    const std::string base = command + "-" + Timestamp();
    dir = root / base;
    for (int i = 2; fs::exists(dir); ++i) dir = root / (base + "-" + std::to_string(i));
  }
  if (!fs::create_directory(dir, ec) || ec) {
    Fail(ErrorKind::kIo, "cannot create run directory " + dir.string());
  }
  return dir.string();
}

class Manifest {
 public:
  Manifest(std::string command, const RunConfig& config) : command_(std::move(command)) {
    json_ = Json{{"command", command_},
                 {"config", ToJson(config)},
                 {"seed", config.seed},
                 {"versions", {{"defex", kDefexVersion}, {"checkpoint_format", kCheckpointVersion}}},
                 {"inputs", Json::object()},
                 {"outputs", Json::object()}};
  }

  void Input(const std::string& role, const std::string& path) {
    json_["inputs"][role] = {{"path", path}, {"fnv1a", HexDigest(HashFile(path))}};
  }
  // Deterministic outputs only; wall-clock files are left out.
  void Output(const std::string& run_dir, const std::string& name) {
    json_["outputs"][name] = HexDigest(HashFile((fs::path(run_dir) / name).string()));
  }
  void Write(const std::string& run_dir) const {
    WriteJsonFile(json_, (fs::path(run_dir) / "run_manifest.json").string());
  }

 private:
  std::string command_;
  Json json_;
};

std::string In(const std::string& run_dir, const std::string& name) {
  return (fs::path(run_dir) / name).string();
}

Json ReportJson(const EvalReport& r) {
  return Json{{"mode", std::string(EvalModeName(r.mode))},
              {"precision", r.precision},
              {"recall", r.recall},
              {"f1", r.f1},
              {"tp", r.tp},
              {"fp", r.fp},
              {"fn", r.fn}};
}

Json PairJson(const EvalPair& p) {
  return Json::array({ReportJson(p.identification), ReportJson(p.classification)});
}

// Persists a trained model with its deterministic report and its timings.
void WriteTraining(const TrainResult& result, const std::string& run_dir, Manifest& manifest) {
  SaveCheckpoint(result.model, In(run_dir, "model.ckpt"));
  WriteJsonFile(Json{{"epoch_loss", result.report.epoch_loss}, {"checkpoint_path", "model.ckpt"}},
                In(run_dir, "train_report.json"));
  WriteJsonFile(Json{{"epoch_seconds", result.report.epoch_seconds}},
                In(run_dir, "timing.json"));
  manifest.Output(run_dir, "model.ckpt");
  manifest.Output(run_dir, "train_report.json");
}

std::string LossSummary(const TrainReport& report, const std::string& run_dir) {
  std::ostringstream out;
  for (size_t e = 0; e < report.epoch_loss.size(); ++e) {
    out << "epoch " << e + 1 << "  loss " << report.epoch_loss[e] << "  ("
        << report.epoch_seconds[e] << " s)\n";
  }
  out << "checkpoint: " << In(run_dir, "model.ckpt") << '\n';
  return out.str();
}

}  // namespace

RunConfig RunConfigFromJson(const Json& j) {
  if (!j.is_object()) Fail(ErrorKind::kConfiguration, "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kTopKeys.count(key)) Fail(ErrorKind::kConfiguration, "unknown config key: " + key);
  }
  RunConfig c;
  if (j.contains("seed")) {
    try {
      c.seed = j.at("seed").get<uint64_t>();
    } catch (const nlohmann::json::exception&) {
      Fail(ErrorKind::kConfiguration, "seed must be a non-negative integer");
    }
  }
  c.train.seed = c.seed;
  c.warm.seed = WarmSeed(c.seed);
  if (j.contains("paths")) {
    const Json& p = j.at("paths");
    if (!p.is_object()) Fail(ErrorKind::kConfiguration, "paths must be an object");
    for (const auto& [key, value] : p.items()) {
      if (!kPathKeys.count(key)) Fail(ErrorKind::kConfiguration, "unknown paths key: " + key);
      if (!value.is_string()) Fail(ErrorKind::kConfiguration, "paths." + key + " must be a string");
    }
    auto get = [&](const char* key, std::string& out) {
      if (p.contains(key)) out = p.at(key).get<std::string>();
    };
    get("corpus", c.paths.corpus);
    get("ontology", c.paths.ontology);
    get("docs", c.paths.docs);
    get("gold", c.paths.gold);
    get("output_dir", c.paths.output_dir);
    get("checkpoint", c.paths.checkpoint);
    get("predictions", c.paths.predictions);
    get("index", c.paths.index);
  }
  if (j.contains("encoder")) MergeJson(j.at("encoder"), c.encoder);
  if (j.contains("train")) MergeJson(j.at("train"), c.train);
  if (j.contains("warm")) MergeJson(j.at("warm"), c.warm);
  if (j.contains("retrieval")) MergeJson(j.at("retrieval"), c.retrieval);
  if (j.contains("inference")) MergeJson(j.at("inference"), c.inference);
  if (j.contains("synthetic")) MergeJson(j.at("synthetic"), c.synthetic);
  return c;
}

Json ToJson(const RunConfig& c) {
  return Json{{"paths",
               {{"corpus", c.paths.corpus},
                {"ontology", c.paths.ontology},
                {"docs", c.paths.docs},
                {"gold", c.paths.gold},
                {"output_dir", c.paths.output_dir},
                {"checkpoint", c.paths.checkpoint},
                {"predictions", c.paths.predictions},
                {"index", c.paths.index}}},
              {"seed", c.seed},
              {"encoder", ToJson(c.encoder)},
              {"train", ToJson(c.train)},
              {"warm", ToJson(c.warm)},
              {"retrieval", ToJson(c.retrieval)},
              {"inference", ToJson(c.inference)},
              {"synthetic", ToJson(c.synthetic)}};
}

void ApplyOverride(Json& config, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    Fail(ErrorKind::kArgument, "override must look like key.path=value: " + assignment);
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;
  Json* node = &config;
  size_t begin = 0;
  while (true) {
    const size_t dot = key.find('.', begin);
    const std::string part = key.substr(begin, dot == std::string::npos ? dot : dot - begin);
    if (part.empty()) Fail(ErrorKind::kArgument, "empty key segment in " + key);
    if (!node->is_object()) *node = Json::object();
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    begin = dot + 1;
  }
}

uint64_t HashFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kInputNotFound, "no such file: " + path);
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return Fnv1a(bytes);
}

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInputNotFound:
    case ErrorKind::kIo:
      return 2;
    case ErrorKind::kNumerical:
      return 3;
    default:
      return 1;
  }
}

CommandResult CmdPretrain(const RunConfig& config, const CommandOptions& options) {
  const std::string& corpus_path = Require(config.paths.corpus, "corpus");
  const AlignmentCorpus corpus = LoadAlignmentCorpus(corpus_path);
  std::vector<Tokens> extra;
  if (!config.paths.ontology.empty()) {
    const EventOntology ontology = LoadOntology(Require(config.paths.ontology, "ontology"));
    for (const EventType& t : ontology.types()) extra.push_back(t.definition);
  }
  config.train.Validate();
  const std::string run_dir = MakeRunDir(config, options, "pretrain");
  Manifest manifest("pretrain", config);
  manifest.Input("corpus", corpus_path);
  if (!config.paths.ontology.empty()) manifest.Input("ontology", config.paths.ontology);

  DualEncoderModel model = InitializeModel(config.encoder, corpus, extra, config.seed);
  TrainResult result = Pretrain(std::move(model), corpus, config.train);
  result.report.checkpoint_path = In(run_dir, "model.ckpt");
  WriteTraining(result, run_dir, manifest);
  manifest.Write(run_dir);
  return {run_dir, LossSummary(result.report, run_dir)};
}

CommandResult CmdWarm(const RunConfig& config, const CommandOptions& options) {
  const std::string& ckpt = Require(config.paths.checkpoint, "checkpoint");
  const std::string& onto_path = Require(config.paths.ontology, "ontology");
  DualEncoderModel model = LoadCheckpoint(ckpt);
  const EventOntology ontology = LoadOntology(onto_path);
  config.warm.Validate();

  if (options.gold) {
    const std::string& gold_path = Require(config.paths.gold, "gold");
    const std::string& docs_path = Require(config.paths.docs, "docs");
    GoldMentionSet gold = LoadGold(gold_path);
    const std::vector<Document> docs = LoadDocuments(docs_path);
    std::optional<AlignmentCorpus> corpus;
    if (!config.paths.corpus.empty()) {
      corpus = LoadAlignmentCorpus(Require(config.paths.corpus, "corpus"));
    }
    if (options.gold_fraction < 1.0) gold = SubsampleGold(gold, options.gold_fraction, config.seed);
    // validate before creating the run directory
    BuildGoldWarmingPlan(gold, docs, ontology, corpus ? &corpus->definitions : nullptr);

    const std::string run_dir = MakeRunDir(config, options, "warm-gold");
    Manifest manifest("warm --gold", config);
    manifest.Input("checkpoint", ckpt);
    manifest.Input("ontology", onto_path);
    manifest.Input("gold", gold_path);
    manifest.Input("docs", docs_path);
    if (corpus) manifest.Input("corpus", config.paths.corpus);
    TrainConfig warm = config.warm;
    if (options.equal_updates) warm.epochs = EqualUpdateEpochs(warm.epochs, options.gold_fraction);
    TrainResult result = WarmWithGold(std::move(model), gold, docs, ontology, warm,
                                      corpus ? &corpus->definitions : nullptr);
    WriteJsonFile(Json{{"gold_fraction", options.gold_fraction},
                       {"epochs", warm.epochs},
                       {"gold_records_used", gold.size()},
                       {"instance_source", "gold annotations"}},
                  In(run_dir, "warming_manifest.json"));
    manifest.Output(run_dir, "warming_manifest.json");
    WriteTraining(result, run_dir, manifest);
    manifest.Write(run_dir);
    return {run_dir, LossSummary(result.report, run_dir)};
  }

  const std::string& corpus_path = Require(config.paths.corpus, "corpus");
  const AlignmentCorpus corpus = LoadAlignmentCorpus(corpus_path);
  const WarmingSubset subset = BuildWarmingSubset(model, ontology, corpus, config.retrieval);
  const std::string run_dir = MakeRunDir(config, options, "warm");
  Manifest manifest("warm", config);
  manifest.Input("checkpoint", ckpt);
  manifest.Input("ontology", onto_path);
  manifest.Input("corpus", corpus_path);
  WriteWarmingManifest(subset, In(run_dir, "warming_manifest.json"));
  manifest.Output(run_dir, "warming_manifest.json");
  TrainResult result = Warm(std::move(model), subset, corpus.definitions, config.warm);
  WriteTraining(result, run_dir, manifest);
  manifest.Write(run_dir);
  std::ostringstream summary;
  summary << "retrieved " << subset.retrieved_ids.size() << " definitions, "
          << subset.corpus.instances.size() << " warming instances\n"
          << LossSummary(result.report, run_dir);
  return {run_dir, summary.str()};
}

CommandResult CmdInfer(const RunConfig& config, const CommandOptions& options) {
  const std::string& ckpt = Require(config.paths.checkpoint, "checkpoint");
  const std::string& onto_path = Require(config.paths.ontology, "ontology");
  const std::string& docs_path = Require(config.paths.docs, "docs");
  config.inference.Validate();
  const DualEncoderModel model = LoadCheckpoint(ckpt);
  const EventOntology ontology = LoadOntology(onto_path);
  const std::vector<Document> docs = LoadDocuments(docs_path);

  CallCounter index_calls;
  DefinitionIndex index;
  if (!config.paths.index.empty()) {
    index = LoadDefinitionIndex(Require(config.paths.index, "index"));
    if (!(index.ontology == ontology)) {
      Fail(ErrorKind::kValidation, "definition index was built for a different ontology");
    }
    CheckIndexMatches(model, index);
  } else {
    index = BuildDefinitionIndex(model, ontology, &index_calls);
  }

  const std::string run_dir = MakeRunDir(config, options, "infer");
  Manifest manifest("infer", config);
  manifest.Input("checkpoint", ckpt);
  manifest.Input("ontology", onto_path);
  manifest.Input("docs", docs_path);
  if (!config.paths.index.empty()) manifest.Input("index", config.paths.index);

  ExtractResult result = Extract(model, index, docs, config.inference);
  result.counter.Merge(index_calls);
  SavePredictions(result.predictions, In(run_dir, "preds.jsonl"));
  SaveDefinitionIndex(index, In(run_dir, "index.json"));
  const std::string counters = CounterSummaryJson(result, ontology.size());
  {
    std::ofstream out(In(run_dir, "counters.json"));
    out << counters << '\n';
    if (!out) Fail(ErrorKind::kIo, "write failed: " + In(run_dir, "counters.json"));
  }
  manifest.Output(run_dir, "preds.jsonl");
  manifest.Output(run_dir, "index.json");
  manifest.Output(run_dir, "counters.json");
  manifest.Write(run_dir);
  std::ostringstream summary;
  summary << result.predictions.size() << " predictions from " << result.candidates
          << " candidates\n"
          << counters << '\n';
  return {run_dir, summary.str()};
}

CommandResult CmdEval(const RunConfig& config, const CommandOptions& options) {
  const std::string& onto_path = Require(config.paths.ontology, "ontology");
  const std::string& gold_path = Require(config.paths.gold, "gold");
  const std::string& preds_path = Require(config.paths.predictions, "predictions");
  const EventOntology ontology = LoadOntology(onto_path);
  const GoldMentionSet gold = LoadGold(gold_path);
  const PredictionSet preds = LoadPredictions(preds_path);
  const EvalPair reports = EvaluateBothModes(preds, gold, ontology);

  Json report{{"model", PairJson(reports)}};
  std::string table = "model\n" + FormatEvalTable(reports);
  std::vector<Document> docs;
  if (!config.paths.docs.empty()) {
    docs = LoadDocuments(Require(config.paths.docs, "docs"));
    const EvalPair chance =
        EvaluateBothModes(ChanceBaseline(gold, docs, ontology, config.seed), gold, ontology);
    const EvalPair popular =
        EvaluateBothModes(MostPopularBaseline(gold, docs, ontology, config.seed), gold, ontology);
    report["chance"] = PairJson(chance);
    report["most_popular"] = PairJson(popular);
    table += "\nchance\n" + FormatEvalTable(chance) + "\nmost popular event type\n" +
             FormatEvalTable(popular);
  }

  const std::string run_dir = MakeRunDir(config, options, "eval");
  Manifest manifest("eval", config);
  manifest.Input("ontology", onto_path);
  manifest.Input("gold", gold_path);
  manifest.Input("predictions", preds_path);
  if (!config.paths.docs.empty()) manifest.Input("docs", config.paths.docs);
  WriteJsonFile(report, In(run_dir, "eval_report.json"));
  {
    std::ofstream out(In(run_dir, "eval_table.txt"));
    out << table;
    if (!out) Fail(ErrorKind::kIo, "write failed: " + In(run_dir, "eval_table.txt"));
  }
  manifest.Output(run_dir, "eval_report.json");
  manifest.Output(run_dir, "eval_table.txt");
  manifest.Write(run_dir);
  return {run_dir, table};
}

CommandResult CmdBench(const RunConfig& config, const CommandOptions& options) {
  const std::string& ckpt = Require(config.paths.checkpoint, "checkpoint");
  const std::string& onto_path = Require(config.paths.ontology, "ontology");
  const std::string& docs_path = Require(config.paths.docs, "docs");
  const DualEncoderModel model = LoadCheckpoint(ckpt);
  const EventOntology ontology = LoadOntology(onto_path);
  const std::vector<Document> docs = LoadDocuments(docs_path);
  if (CountCandidates(docs) == 0) Fail(ErrorKind::kConfiguration, "no candidates to benchmark");

  const SpeedReport speed = SpeedBenchmark(model, ontology, docs, options.repetitions);
  const JointSimulation sim = SimulateJointBaseline({}, speed.mentions, speed.types);
  const std::string run_dir = MakeRunDir(config, options, "bench");
  Manifest manifest("bench", config);
  manifest.Input("checkpoint", ckpt);
  manifest.Input("ontology", onto_path);
  manifest.Input("docs", docs_path);
  const Json calls{{"N", speed.mentions},
                   {"T", speed.types},
                   {"disjoint_calls", speed.disjoint_calls},
                   {"joint_calls", speed.joint_calls},
                   {"invocation_ratio", sim.invocation_ratio}};
  WriteJsonFile(calls, In(run_dir, "bench_calls.json"));
  WriteJsonFile(Json{{"repetitions", speed.repetitions},
                     {"batch_size", 1},
                     {"disjoint_seconds", speed.disjoint_seconds},
                     {"joint_seconds", speed.joint_seconds},
                     {"disjoint_median", speed.disjoint_median},
                     {"joint_median", speed.joint_median}},
                In(run_dir, "timing.json"));
  manifest.Output(run_dir, "bench_calls.json");
  manifest.Write(run_dir);
  std::ostringstream summary;
  summary << "N=" << speed.mentions << " T=" << speed.types << "\n"
          << "disjoint: " << speed.disjoint_calls << " encoder calls, median "
          << speed.disjoint_median << " s\n"
          << "joint:    " << speed.joint_calls << " encoder calls, median " << speed.joint_median
          << " s\n"
          << "invocation ratio " << sim.invocation_ratio << '\n';
  return {run_dir, summary.str()};
}

CommandResult CmdSynth(const RunConfig& config, const CommandOptions& options) {
  const SyntheticData data = GenerateSyntheticCorpus(config.synthetic, config.seed);
  const std::string run_dir = MakeRunDir(config, options, "synth");
  Manifest manifest("synth", config);
  SaveAlignmentCorpus(data.corpus, In(run_dir, "alignments.jsonl"));
  SaveOntology(data.ontology, In(run_dir, "ontology.jsonl"));
  SaveDocuments(data.documents, In(run_dir, "docs.jsonl"));
  SaveGold(data.gold, In(run_dir, "gold.jsonl"));
  for (const char* name : {"alignments.jsonl", "ontology.jsonl", "docs.jsonl", "gold.jsonl"}) {
    manifest.Output(run_dir, name);
  }
  manifest.Write(run_dir);
  std::ostringstream summary;
  summary << data.corpus.instances.size() << " alignment instances, "
          << data.corpus.definitions.size() << " definitions, " << data.ontology.size()
          << " types, " << data.documents.size() << " documents, " << data.gold.size()
          << " gold mentions\n";
  return {run_dir, summary.str()};
}

}  // namespace defex
