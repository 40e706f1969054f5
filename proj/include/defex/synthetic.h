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

// Desk-scale synthetic worlds: an alignment corpus, a target ontology, and
// held-out documents with gold mentions, all drawn from one generative story.
//
// Every sense (target event type or distractor) owns a set of trigger words
// and a definition built from its own gloss words. In the shared-vocabulary
// setting, target types are grouped; members of a group share triggers and
// most gloss words and differ only by a cue word that appears in the
// mention's context and by one distinguishing gloss word.

#ifndef DEFEX_SYNTHETIC_H_
#define DEFEX_SYNTHETIC_H_

#include <cstdint>
#include <vector>

#include "defex/corpus.h"

namespace defex {

enum class Confusability {
  kDisjoint,  // every type has its own trigger vocabulary
  kShared,    // grouped types share triggers; context cue words decide
};

struct SyntheticSpec {
  size_t n_types = 20;
  size_t triggers_per_type = 3;
  size_t mentions_per_type = 50;
  size_t instances_per_definition = 10;
  size_t n_distractors = 40;
  size_t distractor_instances_per_definition = 10;
  Confusability confusability = Confusability::kDisjoint;
  size_t group_size = 4;  // used when confusability == kShared
  size_t gloss_words_per_definition = 4;
  // When non-zero, gloss words of every definition are drawn from one
  // shared pool of this many words, so definitions overlap like dictionary
  // glosses do. 0 gives each definition its own gloss words.
  size_t gloss_vocab_size = 0;
  size_t filler_vocab_size = 80;
  size_t min_sentence_length = 6;
  size_t max_sentence_length = 12;
  size_t sentences_per_document = 4;
  // Distractor-sense words inserted into each document sentence as
  // non-event candidates.
  size_t nonevent_candidates_per_sentence = 1;
};

struct SyntheticData {
  AlignmentCorpus corpus;
  EventOntology ontology;
  std::vector<Document> documents;
  GoldMentionSet gold;
};

// Throws kArgument when n_types < 2 or any count that must be positive is 0.
SyntheticData GenerateSyntheticCorpus(const SyntheticSpec& spec, uint64_t seed);

struct LabeledDocuments {
  std::vector<Document> documents;
  GoldMentionSet gold;
};

// Splits documents (with their gold records) into two disjoint parts; the
// first receives round(fraction * n) documents chosen uniformly.
std::pair<LabeledDocuments, LabeledDocuments> SplitDocuments(
    const std::vector<Document>& docs, const GoldMentionSet& gold,
    double fraction, uint64_t seed);

// Gold records restricted to the given documents.
GoldMentionSet RestrictGold(const GoldMentionSet& gold,
                            const std::vector<Document>& docs);

}  // namespace defex

#endif  // DEFEX_SYNTHETIC_H_
