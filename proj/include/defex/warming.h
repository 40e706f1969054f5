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

// Query-specific warming. For every target definition the nearest corpus
// definitions are retrieved with a frozen static embedder (mean token vector,
// no head); the alignment instances of all retrieved definitions form the
// warming corpus, which is then trained on with a mix of strong negatives
// (other retrieved definitions) and random negatives (whole inventory).
// Gold-annotation warming swaps the retrieved instances for annotated
// mentions.

#ifndef DEFEX_WARMING_H_
#define DEFEX_WARMING_H_

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "defex/corpus.h"
#include "defex/encoder.h"
#include "defex/training.h"

namespace defex {

enum class StaticEmbedder {
  kDefinitionEncoder,  // frozen definition encoder, head skipped
  kContextEncoder,
};

std::string_view StaticEmbedderName(StaticEmbedder e);
StaticEmbedder ParseStaticEmbedder(std::string_view name);

struct RetrievalConfig {
  StaticEmbedder static_embedder = StaticEmbedder::kDefinitionEncoder;
  size_t retrieved_count = 1;  // per target type

  void Validate() const;
};

// Mean of the frozen embedder's per-token vectors. Throws kArgument on an
// empty definition.
Vector EmbedDefinitionStatic(const DualEncoderModel& model, StaticEmbedder embedder,
                             const Tokens& definition);

struct Retrieved {
  std::string definition_id;
  double similarity = 0.0;
};

// Precomputed static embeddings of an inventory, ordered by definition id.
struct StaticTable {
  std::vector<std::string> ids;
  std::vector<Vector> vectors;
};

StaticTable BuildStaticTable(const DualEncoderModel& model, StaticEmbedder embedder,
                             const std::map<std::string, Tokens>& definitions);

// Top-`count` entries by cosine similarity to target, best first. Equal
// similarities order by smaller definition id. Throws kArgument on an empty
// table.
std::vector<Retrieved> RankBySimilarity(const Vector& target, const StaticTable& table,
                                        size_t count);

// argmax over the inventory of cos(static(D), static(target)).
std::string RetrieveNearestDefinition(const DualEncoderModel& model,
                                      const Tokens& target_definition,
                                      const std::map<std::string, Tokens>& definitions,
                                      const RetrievalConfig& config);

struct TypeRetrieval {
  std::string type_name;
  std::vector<Retrieved> retrieved;
};

struct WarmingSubset {
  // Instances whose definition id was retrieved, in corpus order; the
  // definitions map is restricted to the retrieved ids.
  AlignmentCorpus corpus;
  std::set<std::string> retrieved_ids;
  std::vector<TypeRetrieval> per_type;
};

// Throws kInternal if nothing was retrieved.
WarmingSubset BuildWarmingSubset(const DualEncoderModel& model,
                                 const EventOntology& ontology,
                                 const AlignmentCorpus& corpus,
                                 const RetrievalConfig& config);

// Audit record of a warming subset as JSON text.
std::string WarmingManifestJson(const WarmingSubset& subset);
void WriteWarmingManifest(const WarmingSubset& subset, const std::string& path);

// Sampler for warming: strong pool = retrieved ids, random pool = every id
// of the full inventory.
NegativeSampler MakeWarmingSampler(const WarmingSubset& subset,
                                   const std::map<std::string, Tokens>& full_definitions,
                                   const TrainConfig& config);

// Fine-tunes every parameter on the warming corpus. Throws kConfiguration
// for an empty warming corpus.
TrainResult Warm(DualEncoderModel model, const WarmingSubset& subset,
                 const std::map<std::string, Tokens>& full_definitions,
                 const TrainConfig& config);

// Training data derived from gold mentions: one instance per gold record,
// positive = its type's definition, strong pool = the other ontology
// definitions, random pool = ontology plus corpus definitions.
struct GoldWarmingPlan {
  std::vector<AlignmentInstance> instances;
  std::map<std::string, Tokens> definitions;
  std::vector<std::string> strong_pool;
  std::vector<std::string> random_pool;
};

// Definition id used for an ontology type during gold warming.
std::string OntologyDefinitionId(const std::string& type_name);

// Throws kValidation for a gold type missing from the ontology or a gold span
// that does not resolve in the documents, kConfiguration for an empty gold set.
GoldWarmingPlan BuildGoldWarmingPlan(
    const GoldMentionSet& gold, const std::vector<Document>& documents,
    const EventOntology& ontology,
    const std::map<std::string, Tokens>* corpus_definitions = nullptr);

TrainResult WarmWithGold(DualEncoderModel model, const GoldMentionSet& gold,
                         const std::vector<Document>& documents,
                         const EventOntology& ontology, const TrainConfig& config,
                         const std::map<std::string, Tokens>* corpus_definitions = nullptr);

// Uniform subsample of gold records keeping round(fraction * n) of them,
// at least one when the set is non-empty.
GoldMentionSet SubsampleGold(const GoldMentionSet& gold, double fraction, uint64_t seed);

// Epoch count that gives a fraction of the data the same number of
// per-instance updates as `epochs` passes over all of it:
// max(1, round(epochs / fraction)). Throws kArgument unless 0 < fraction <= 1.
size_t EqualUpdateEpochs(size_t epochs, double fraction);

}  // namespace defex

#endif  // DEFEX_WARMING_H_
