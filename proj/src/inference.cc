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

#include "defex/inference.h"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "defex/error.h"
#include "json.hpp"

namespace defex {
namespace {

struct SentenceWork {
  const Document* doc = nullptr;
  int sentence_idx = 0;
  std::vector<Span> candidates;
};

struct Scored {
  SpanKey key;
  size_t best = 0;
  double score = 0.0;
};

std::vector<Scored> ScoreSentence(const DualEncoderModel& model,
                                  const DefinitionIndex& index, const SentenceWork& work,
                                  CallCounter& counter) {
  const TokenVectors tokens =
      EncodeTokens(model, EncoderSide::kContext, work.doc->sentences[work.sentence_idx]);
  ++counter.context_encoder_calls;
  std::vector<Scored> out;
  out.reserve(work.candidates.size());
  for (const Span& c : work.candidates) {
    const Vector mention = PoolMention(tokens, c.start, c.end).values;
    const std::vector<double> scores = ScoreVector(mention, index);
    size_t best = 0;
    for (size_t t = 1; t < scores.size(); ++t) {
      if (scores[t] > scores[best]) best = t;
    }
    out.push_back(Scored{SpanKey{work.doc->doc_id, c.sentence_idx, c.start, c.end}, best,
                         scores[best]});
  }
  return out;
}

}  // namespace

DefinitionIndex BuildDefinitionIndex(const DualEncoderModel& model,
                                     const EventOntology& ontology, CallCounter* counter) {
  if (ontology.empty()) Fail(ErrorKind::kArgument, "cannot index an empty ontology");
  DefinitionIndex index;
  index.ontology = ontology;
  index.model_fingerprint = model.Fingerprint();
  index.vectors.reserve(ontology.size());
  for (const EventType& t : ontology.types()) {
    DefinitionVector v = EncodeDefinition(model, t.definition);
    if (counter) ++counter->definition_encoder_calls;
    index.vectors.push_back(std::move(v.values));
  }
  return index;
}

void CheckIndexMatches(const DualEncoderModel& model, const DefinitionIndex& index) {
  if (index.model_fingerprint != model.Fingerprint()) {
    Fail(ErrorKind::kFingerprint, "definition index was built with a different model (" +
                                      HexDigest(index.model_fingerprint) + " vs " +
                                      HexDigest(model.Fingerprint()) + ")");
  }
  if (index.vectors.size() != index.ontology.size()) {
    Fail(ErrorKind::kValidation, "definition index size does not match its ontology");
  }
}

void SaveDefinitionIndex(const DefinitionIndex& index, const std::string& path) {
  nlohmann::json types = nlohmann::json::array();
  nlohmann::json vectors = nlohmann::json::array();
  for (size_t t = 0; t < index.ontology.size(); ++t) {
    types.push_back({{"type_name", index.ontology[t].type_name},
                     {"definition", index.ontology[t].definition}});
    vectors.push_back(std::vector<double>(index.vectors[t].data(),
                                          index.vectors[t].data() + index.vectors[t].size()));
  }
  const nlohmann::json j{{"format", "defex-index"},
                         {"version", 1},
                         {"model_fingerprint", HexDigest(index.model_fingerprint)},
                         {"types", types},
                         {"vectors", vectors}};
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path);
  out << j.dump() << '\n';
  if (!out) Fail(ErrorKind::kIo, "write failed: " + path);
}

DefinitionIndex LoadDefinitionIndex(const std::string& path) {
  if (!std::filesystem::exists(path)) Fail(ErrorKind::kInputNotFound, "no such file: " + path);
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot read " + path);
  DefinitionIndex index;
  try {
    const nlohmann::json j = nlohmann::json::parse(in);
    if (j.at("format") != "defex-index" || j.at("version") != 1) {
      Fail(ErrorKind::kValidation, path + ": not a version 1 definition index");
    }
    index.model_fingerprint =
        std::stoull(j.at("model_fingerprint").get<std::string>(), nullptr, 16);
    std::vector<EventType> types;
    for (const auto& t : j.at("types")) {
      types.push_back(EventType{t.at("type_name").get<std::string>(),
                                t.at("definition").get<Tokens>()});
    }
    index.ontology = EventOntology(std::move(types));
    for (const auto& v : j.at("vectors")) {
      const std::vector<double> values = v.get<std::vector<double>>();
      index.vectors.push_back(Eigen::Map<const Vector>(values.data(), values.size()));
    }
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kParse, path + ": " + e.what());
  }
  if (index.vectors.size() != index.ontology.size()) {
    Fail(ErrorKind::kValidation, path + ": vector count does not match the ontology");
  }
  return index;
}

std::vector<double> ScoreVector(const Vector& mention, const DefinitionIndex& index) {
  std::vector<double> scores;
  scores.reserve(index.vectors.size());
  for (const Vector& v : index.vectors) scores.push_back(Cosine(mention, v));
  return scores;
}

std::vector<TypeScore> ScoreMention(const DualEncoderModel& model,
                                    const DefinitionIndex& index, const Tokens& sentence,
                                    int start, int end, CallCounter* counter) {
  CheckIndexMatches(model, index);
  const TokenVectors tokens = EncodeTokens(model, EncoderSide::kContext, sentence);
  if (counter) ++counter->context_encoder_calls;
  const Vector mention = PoolMention(tokens, start, end).values;
  const std::vector<double> scores = ScoreVector(mention, index);
  std::vector<TypeScore> out;
  out.reserve(scores.size());
  for (size_t t = 0; t < scores.size(); ++t) {
    out.push_back(TypeScore{index.ontology[t].type_name, scores[t]});
  }
  return out;
}

void InferenceConfig::Validate() const {
  if (!(threshold > -1.0 && threshold < 1.0)) {
    Fail(ErrorKind::kArgument, "threshold must lie in (-1, 1)");
  }
  if (batch_size < 1) Fail(ErrorKind::kArgument, "batch_size must be >= 1");
  if (threads < 1) Fail(ErrorKind::kArgument, "threads must be >= 1");
}

ExtractResult Extract(const DualEncoderModel& model, const DefinitionIndex& index,
                      const std::vector<Document>& documents,
                      const InferenceConfig& config) {
  config.Validate();
  CheckIndexMatches(model, index);

  std::vector<SentenceWork> work;
  size_t n_candidates = 0;
  for (const Document& doc : documents) {
    std::map<int, std::vector<Span>> by_sentence;
    for (const Span& c : doc.candidates) by_sentence[c.sentence_idx].push_back(c);
    for (auto& [s, spans] : by_sentence) {
      if (s < 0 || s >= static_cast<int>(doc.sentences.size())) {
        Fail(ErrorKind::kValidation, "candidate sentence out of range in doc " + doc.doc_id);
      }
      n_candidates += spans.size();
      work.push_back(SentenceWork{&doc, s, std::move(spans)});
    }
  }

  std::vector<std::vector<Scored>> results(work.size());
  const size_t chunk = config.batch_size;
  const size_t n_chunks = (work.size() + chunk - 1) / chunk;
  const size_t n_threads = std::min(config.threads, std::max<size_t>(n_chunks, 1));
  std::vector<CallCounter> counters(n_threads);
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&](size_t w) {
    try {
      for (size_t c = next++; c < n_chunks; c = next++) {
        const size_t end = std::min(work.size(), (c + 1) * chunk);
        for (size_t i = c * chunk; i < end; ++i) {
          results[i] = ScoreSentence(model, index, work[i], counters[w]);
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mu);
      if (!failure) failure = std::current_exception();
    }
  };
  if (n_threads <= 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    for (size_t w = 0; w < n_threads; ++w) pool.emplace_back(worker, w);
  }
  if (failure) std::rethrow_exception(failure);

  ExtractResult out;
  out.candidates = n_candidates;
  for (const CallCounter& c : counters) out.counter.Merge(c);
  for (const auto& sentence : results) {
    for (const Scored& s : sentence) {
      if (s.score > config.threshold) {
        out.predictions.Insert(s.key, MentionLabel{index.ontology[s.best].type_name, s.score});
      }
    }
  }
  return out;
}

PredictionSet FilterByThreshold(const PredictionSet& predictions, double threshold) {
  PredictionSet out;
  for (const auto& [key, label] : predictions.records()) {
    if (label.score > threshold) out.Insert(key, label);
  }
  return out;
}

JointSimulation SimulateJointBaseline(const JointCostModel& cost, uint64_t mentions,
                                      uint64_t types) {
  if (mentions == 0 || types == 0) {
    Fail(ErrorKind::kArgument, "joint simulation needs N >= 1 and T >= 1");
  }
  JointSimulation sim;
  sim.mentions = mentions;
  sim.types = types;
  sim.joint_pairs = mentions * types;
  sim.disjoint_calls = mentions + types;
  sim.invocation_ratio =
      static_cast<double>(sim.joint_pairs) / static_cast<double>(sim.disjoint_calls);
  sim.joint_seconds = static_cast<double>(sim.joint_pairs) * cost.seconds_per_call;
  sim.disjoint_seconds = static_cast<double>(sim.disjoint_calls) * cost.seconds_per_call;
  return sim;
}

std::string CounterSummaryJson(const ExtractResult& result, size_t n_types) {
  nlohmann::json summary{{"N", result.candidates},
                         {"T", n_types},
                         {"context_calls", result.counter.context_encoder_calls},
                         {"definition_calls", result.counter.definition_encoder_calls}};
  if (result.candidates > 0 && n_types > 0) {
    const JointSimulation sim = SimulateJointBaseline({}, result.candidates, n_types);
    summary["joint_pair_count"] = sim.joint_pairs;
    summary["ratio"] = sim.invocation_ratio;
  } else {
    summary["joint_pair_count"] = 0;
    summary["ratio"] = 0.0;
  }
  return summary.dump(2);
}

}  // namespace defex
