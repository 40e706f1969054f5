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

// Span-level micro precision/recall/F1 in the two scoring modes, the naive
// baselines, and the experiment drivers built on the full pipeline: the
// warming/strong-negative ablation, the instances-per-definition sweep and
// the disjoint vs joint speed benchmark.

#ifndef DEFEX_EVAL_H_
#define DEFEX_EVAL_H_

#include <cstdint>
#include <string>
#include <vector>

#include "defex/corpus.h"
#include "defex/encoder.h"
#include "defex/inference.h"
#include "defex/synthetic.h"
#include "defex/training.h"
#include "defex/warming.h"

namespace defex {

enum class EvalMode {
  kIdentification,  // span match only
  kClassification,  // span and type match
};

std::string_view EvalModeName(EvalMode mode);

struct EvalReport {
  EvalMode mode = EvalMode::kIdentification;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;
};

// Both sets are validated against the ontology first (kValidation on an
// unknown type). P is 0 when there are no predictions.
EvalReport MicroPrf(const PredictionSet& preds, const GoldMentionSet& gold, EvalMode mode,
                    const EventOntology& ontology);

struct EvalPair {
  EvalReport identification;
  EvalReport classification;
};

EvalPair EvaluateBothModes(const PredictionSet& preds, const GoldMentionSet& gold,
                           const EventOntology& ontology);

// Side-by-side text table of both modes.
std::string FormatEvalTable(const EvalPair& reports);

// Each candidate is selected independently with probability
// |gold| / |candidates| and given a uniformly random type.
PredictionSet ChanceBaseline(const GoldMentionSet& gold, const std::vector<Document>& documents,
                             const EventOntology& ontology, uint64_t seed);

// Same selection as ChanceBaseline, labeled with the most frequent gold
// type (ties go to the smaller ontology index).
PredictionSet MostPopularBaseline(const GoldMentionSet& gold,
                                  const std::vector<Document>& documents,
                                  const EventOntology& ontology, uint64_t seed);

// Everything a pipeline run consumes besides seeds.
struct PipelineData {
  AlignmentCorpus corpus;
  EventOntology ontology;
  std::vector<Document> documents;  // evaluation documents
  GoldMentionSet gold;              // gold of the evaluation documents
};

struct PipelineConfig {
  EncoderConfig encoder;
  TrainConfig pretrain;
  TrainConfig warm = WarmDefaults();
  RetrievalConfig retrieval;
  InferenceConfig inference;
};

// Fresh model with a tokenizer learned from the corpus and the ontology
// definitions, pretrained with pretrain.seed replaced by seed.
DualEncoderModel PretrainForSeed(const PipelineData& data, const PipelineConfig& config,
                                 uint64_t seed);

// Query-specific warming of a pretrained model with warm.seed derived from
// seed. strong_negatives=false forces a ratio of 0.
DualEncoderModel WarmForSeed(const DualEncoderModel& pretrained, const PipelineData& data,
                             const PipelineConfig& config, bool strong_negatives,
                             uint64_t seed);

EvalPair EvaluateModel(const DualEncoderModel& model, const PipelineData& data,
                       const InferenceConfig& config);

struct AblationSpec {
  bool warming = true;
  bool strong_negatives = true;
  std::string Name() const;
};

struct AblationRow {
  AblationSpec spec;
  EvalPair median;                  // per-mode median F1 (P, R from the same median run)
  std::vector<EvalPair> per_seed;
  double delta_identification = 0.0;  // median F1 minus the all-on median
  double delta_classification = 0.0;
};

struct AblationTable {
  std::vector<AblationRow> rows;  // first row is all-on
  std::vector<uint64_t> seeds;
};

// Runs every spec (all-on is always added first) on the same seeds.
// Pretraining is shared across specs for a given seed.
AblationTable RunAblation(const std::vector<AblationSpec>& specs, const PipelineData& data,
                          const PipelineConfig& config, const std::vector<uint64_t>& seeds);

std::string FormatAblationTable(const AblationTable& table);

double Median(std::vector<double> values);

struct SweepPoint {
  size_t k = 0;
  double f1_identification = 0.0;  // medians over seeds
  double f1_classification = 0.0;
};

// Pretrains on SubsamplePerDefinition(corpus, k) for every k and seed and
// evaluates without warming.
std::vector<SweepPoint> RunDataScaleSweep(const PipelineData& data,
                                          const PipelineConfig& config,
                                          const std::vector<size_t>& ks,
                                          const std::vector<uint64_t>& seeds);

// "k<TAB>f1" lines (identification+classification), for plotting.
std::string FormatSweepSeries(const std::vector<SweepPoint>& points);

struct SpeedReport {
  size_t mentions = 0;
  size_t types = 0;
  size_t repetitions = 0;
  uint64_t disjoint_calls = 0;  // N + T
  uint64_t joint_calls = 0;     // N * T
  std::vector<double> disjoint_seconds;
  std::vector<double> joint_seconds;
  double disjoint_median = 0.0;
  double joint_median = 0.0;
};

// Score of one (mention, type) pair by a joint scorer: a single context
// encoder pass over the sentence followed by the definition, the mention
// pooled and compared with the mean of the definition positions.
double JointPairScore(const DualEncoderModel& model, const Tokens& sentence, int start,
                      int end, const Tokens& definition);

// Times disjoint extraction (index build included) and the joint scorer at
// batch size 1. One untimed warm-up pass of each precedes the repetitions.
// Throws kArgument when repetitions < 3.
SpeedReport SpeedBenchmark(const DualEncoderModel& model, const EventOntology& ontology,
                           const std::vector<Document>& documents, size_t repetitions);

}  // namespace defex

#endif  // DEFEX_EVAL_H_
