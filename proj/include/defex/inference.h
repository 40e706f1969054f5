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

// Disjoint-encoding extraction. The T target definitions are encoded once
// into a DefinitionIndex; each sentence with candidates is encoded once by
// the context encoder, and every candidate is pooled and compared to all T
// index vectors. A candidate is labeled with its best type when that
// cosine is strictly above the threshold.

#ifndef DEFEX_INFERENCE_H_
#define DEFEX_INFERENCE_H_

#include <cstdint>
#include <string>
#include <vector>

#include "defex/corpus.h"
#include "defex/encoder.h"

namespace defex {

struct CallCounter {
  uint64_t context_encoder_calls = 0;
  uint64_t definition_encoder_calls = 0;

  void Merge(const CallCounter& other) {
    context_encoder_calls += other.context_encoder_calls;
    definition_encoder_calls += other.definition_encoder_calls;
  }
};

struct DefinitionIndex {
  EventOntology ontology;
  std::vector<Vector> vectors;  // ontology order
  uint64_t model_fingerprint = 0;
};

// Exactly T definition-encoder calls. Throws kArgument on an empty ontology.
DefinitionIndex BuildDefinitionIndex(const DualEncoderModel& model,
                                     const EventOntology& ontology,
                                     CallCounter* counter = nullptr);

// Throws kFingerprint when the index was built with different parameters.
void CheckIndexMatches(const DualEncoderModel& model, const DefinitionIndex& index);

// JSON file holding the fingerprint, ontology and vectors.
void SaveDefinitionIndex(const DefinitionIndex& index, const std::string& path);
DefinitionIndex LoadDefinitionIndex(const std::string& path);

struct TypeScore {
  std::string type_name;
  double score = 0.0;
};

// Cosine of a pooled mention against all T index vectors, ontology order.
std::vector<TypeScore> ScoreMention(const DualEncoderModel& model,
                                    const DefinitionIndex& index, const Tokens& sentence,
                                    int start, int end, CallCounter* counter = nullptr);

// Scores against precomputed vectors, no encoder calls.
std::vector<double> ScoreVector(const Vector& mention, const DefinitionIndex& index);

struct InferenceConfig {
  double threshold = 0.7;
  // Sentences handed to a worker per scheduling unit.
  size_t batch_size = 16;
  size_t threads = 1;

  void Validate() const;
};

struct ExtractResult {
  PredictionSet predictions;
  CallCounter counter;
  size_t candidates = 0;
};

// Deterministic for fixed inputs regardless of thread count.
ExtractResult Extract(const DualEncoderModel& model, const DefinitionIndex& index,
                      const std::vector<Document>& documents,
                      const InferenceConfig& config);

// Predictions at a lower threshold filtered to a higher one; equals a fresh
// Extract at that threshold.
PredictionSet FilterByThreshold(const PredictionSet& predictions, double threshold);

struct JointCostModel {
  double seconds_per_call = 1.0;
};

struct JointSimulation {
  uint64_t mentions = 0;
  uint64_t types = 0;
  uint64_t joint_pairs = 0;     // N * T encoder invocations
  uint64_t disjoint_calls = 0;  // N + T encoder invocations
  double invocation_ratio = 0.0;
  double joint_seconds = 0.0;
  double disjoint_seconds = 0.0;
};

// Throws kArgument when N or T is 0.
JointSimulation SimulateJointBaseline(const JointCostModel& cost, uint64_t mentions,
                                      uint64_t types);

// Structured call-count summary as JSON text:
// N, T, context_calls, definition_calls, joint_pair_count, ratio.
std::string CounterSummaryJson(const ExtractResult& result, size_t n_types);

}  // namespace defex

#endif  // DEFEX_INFERENCE_H_
