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

#include "defex/warming.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "defex/error.h"
#include "json.hpp"

namespace defex {

std::string_view StaticEmbedderName(StaticEmbedder e) {
  return e == StaticEmbedder::kDefinitionEncoder ? "definition_encoder" : "context_encoder";
}

StaticEmbedder ParseStaticEmbedder(std::string_view name) {
  if (name == "definition_encoder") return StaticEmbedder::kDefinitionEncoder;
  if (name == "context_encoder") return StaticEmbedder::kContextEncoder;
  Fail(ErrorKind::kArgument, "unknown static embedder: " + std::string(name));
}

void RetrievalConfig::Validate() const {
  if (retrieved_count < 1) Fail(ErrorKind::kArgument, "retrieved_count must be >= 1");
}

Vector EmbedDefinitionStatic(const DualEncoderModel& model, StaticEmbedder embedder,
                             const Tokens& definition) {
  if (definition.empty()) Fail(ErrorKind::kArgument, "empty definition");
  const EncoderSide side = embedder == StaticEmbedder::kDefinitionEncoder
                               ? EncoderSide::kDefinition
                               : EncoderSide::kContext;
  const TokenVectors tokens = EncodeTokens(model, side, definition);
  return tokens.vectors.colwise().mean().transpose();
}

StaticTable BuildStaticTable(const DualEncoderModel& model, StaticEmbedder embedder,
                             const std::map<std::string, Tokens>& definitions) {
  StaticTable table;
  table.ids.reserve(definitions.size());
  table.vectors.reserve(definitions.size());
  for (const auto& [id, def] : definitions) {
    table.ids.push_back(id);
    table.vectors.push_back(EmbedDefinitionStatic(model, embedder, def));
  }
  return table;
}

std::vector<Retrieved> RankBySimilarity(const Vector& target, const StaticTable& table,
                                        size_t count) {
  if (table.ids.empty()) Fail(ErrorKind::kArgument, "empty definition inventory");
  std::vector<Retrieved> all;
  all.reserve(table.ids.size());
  for (size_t i = 0; i < table.ids.size(); ++i) {
    all.push_back(Retrieved{table.ids[i], Cosine(target, table.vectors[i])});
  }
  const size_t k = std::min(count, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(),
                    [](const Retrieved& a, const Retrieved& b) {
                      if (a.similarity != b.similarity) return a.similarity > b.similarity;
                      return a.definition_id < b.definition_id;
                    });
  all.resize(k);
  return all;
}

std::string RetrieveNearestDefinition(const DualEncoderModel& model,
                                      const Tokens& target_definition,
                                      const std::map<std::string, Tokens>& definitions,
                                      const RetrievalConfig& config) {
  config.Validate();
  const StaticTable table = BuildStaticTable(model, config.static_embedder, definitions);
  const Vector target =
      EmbedDefinitionStatic(model, config.static_embedder, target_definition);
  return RankBySimilarity(target, table, 1).front().definition_id;
}

WarmingSubset BuildWarmingSubset(const DualEncoderModel& model,
                                 const EventOntology& ontology,
                                 const AlignmentCorpus& corpus,
                                 const RetrievalConfig& config) {
  config.Validate();
  if (ontology.empty()) Fail(ErrorKind::kArgument, "empty ontology");
  const StaticTable table =
      BuildStaticTable(model, config.static_embedder, corpus.definitions);
  WarmingSubset subset;
  for (const EventType& type : ontology.types()) {
    const Vector target =
        EmbedDefinitionStatic(model, config.static_embedder, type.definition);
    TypeRetrieval entry{type.type_name,
                        RankBySimilarity(target, table, config.retrieved_count)};
    for (const Retrieved& r : entry.retrieved) subset.retrieved_ids.insert(r.definition_id);
    subset.per_type.push_back(std::move(entry));
  }
  if (subset.retrieved_ids.empty()) {
    Fail(ErrorKind::kInternal, "warming retrieval returned no definitions");
  }
  for (const std::string& id : subset.retrieved_ids) {
    subset.corpus.definitions.emplace(id, corpus.definitions.at(id));
  }
  for (const AlignmentInstance& inst : corpus.instances) {
    if (subset.retrieved_ids.count(inst.definition_id)) {
      subset.corpus.instances.push_back(inst);
    }
  }
  return subset;
}

std::string WarmingManifestJson(const WarmingSubset& subset) {
  using json = nlohmann::json;
  json types = json::array();
  for (const TypeRetrieval& t : subset.per_type) {
    json retrieved = json::array();
    for (const Retrieved& r : t.retrieved) {
      retrieved.push_back({{"definition_id", r.definition_id}, {"similarity", r.similarity}});
    }
    types.push_back({{"type_name", t.type_name}, {"retrieved", retrieved}});
  }
  json manifest{
      {"instance_source", "alignment corpus"},
      {"retrieved_definition_ids",
       std::vector<std::string>(subset.retrieved_ids.begin(), subset.retrieved_ids.end())},
      {"warming_instances", subset.corpus.instances.size()},
      {"types", types}};
  return manifest.dump(2);
}

void WriteWarmingManifest(const WarmingSubset& subset, const std::string& path) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path);
  out << WarmingManifestJson(subset) << '\n';
  if (!out) Fail(ErrorKind::kIo, "write failed: " + path);
}

NegativeSampler MakeWarmingSampler(const WarmingSubset& subset,
                                   const std::map<std::string, Tokens>& full_definitions,
                                   const TrainConfig& config) {
  std::vector<std::string> random_pool;
  random_pool.reserve(full_definitions.size());
  for (const auto& [id, def] : full_definitions) random_pool.push_back(id);
  return NegativeSampler(std::move(random_pool),
                         {subset.retrieved_ids.begin(), subset.retrieved_ids.end()},
                         config.strong_negative_ratio, config.n_negatives);
}

TrainResult Warm(DualEncoderModel model, const WarmingSubset& subset,
                 const std::map<std::string, Tokens>& full_definitions,
                 const TrainConfig& config) {
  config.Validate();
  if (subset.corpus.instances.empty()) {
    Fail(ErrorKind::kConfiguration, "warming corpus is empty");
  }
  const NegativeSampler sampler = MakeWarmingSampler(subset, full_definitions, config);
  return RunContrastiveTraining(std::move(model), subset.corpus.instances, full_definitions,
                                sampler, config);
}

std::string OntologyDefinitionId(const std::string& type_name) {
  return "ontology:" + type_name;
}

GoldWarmingPlan BuildGoldWarmingPlan(const GoldMentionSet& gold,
                                     const std::vector<Document>& documents,
                                     const EventOntology& ontology,
                                     const std::map<std::string, Tokens>* corpus_definitions) {
  if (gold.empty()) Fail(ErrorKind::kConfiguration, "gold warming needs gold mentions");
  gold.ValidateAgainst(ontology);
  std::map<std::string, const Document*> by_id;
  for (const Document& d : documents) by_id.emplace(d.doc_id, &d);

  GoldWarmingPlan plan;
  for (const EventType& t : ontology.types()) {
    const std::string id = OntologyDefinitionId(t.type_name);
    plan.definitions.emplace(id, t.definition);
    plan.strong_pool.push_back(id);
    plan.random_pool.push_back(id);
  }
  if (corpus_definitions) {
    for (const auto& [id, def] : *corpus_definitions) {
      if (plan.definitions.emplace(id, def).second) plan.random_pool.push_back(id);
    }
  }
  for (const auto& [key, label] : gold.records()) {
    auto it = by_id.find(key.doc_id);
    if (it == by_id.end()) {
      Fail(ErrorKind::kValidation, "gold mention refers to unknown doc " + key.doc_id);
    }
    const Document& doc = *it->second;
    if (key.sentence_idx < 0 || key.sentence_idx >= static_cast<int>(doc.sentences.size())) {
      Fail(ErrorKind::kValidation, "gold sentence index out of range in doc " + key.doc_id);
    }
    const Tokens& sentence = doc.sentences[key.sentence_idx];
    if (key.start < 0 || key.end < key.start ||
        key.end >= static_cast<int>(sentence.size())) {
      Fail(ErrorKind::kValidation, "gold span out of range in doc " + key.doc_id);
    }
    const std::string id = OntologyDefinitionId(label.type_name);
    plan.instances.push_back(
        AlignmentInstance{sentence, key.start, key.end, plan.definitions.at(id), id});
  }
  return plan;
}

TrainResult WarmWithGold(DualEncoderModel model, const GoldMentionSet& gold,
                         const std::vector<Document>& documents,
                         const EventOntology& ontology, const TrainConfig& config,
                         const std::map<std::string, Tokens>* corpus_definitions) {
  config.Validate();
  GoldWarmingPlan plan = BuildGoldWarmingPlan(gold, documents, ontology, corpus_definitions);
  NegativeSampler sampler(plan.random_pool, plan.strong_pool, config.strong_negative_ratio,
                          config.n_negatives);
  return RunContrastiveTraining(std::move(model), plan.instances, plan.definitions, sampler,
                                config);
}

GoldMentionSet SubsampleGold(const GoldMentionSet& gold, double fraction, uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    Fail(ErrorKind::kArgument, "gold fraction must lie in (0, 1]");
  }
  std::vector<const std::pair<const SpanKey, MentionLabel>*> records;
  for (const auto& r : gold.records()) records.push_back(&r);
  size_t keep = static_cast<size_t>(std::lround(fraction * static_cast<double>(records.size())));
  if (!records.empty()) keep = std::max<size_t>(keep, 1);
  Rng rng(seed);
  rng.Shuffle(records);
  GoldMentionSet out;
  for (size_t i = 0; i < keep; ++i) out.Insert(records[i]->first, records[i]->second);
  return out;
}

size_t EqualUpdateEpochs(size_t epochs, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    Fail(ErrorKind::kArgument, "gold fraction must lie in (0, 1]");
  }
  const double scaled = std::round(static_cast<double>(epochs) / fraction);
  return std::max<size_t>(1, static_cast<size_t>(scaled));
}

}  // namespace defex
