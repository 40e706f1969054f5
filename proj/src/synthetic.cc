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

#include "defex/synthetic.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <string>

#include "defex/error.h"
#include "defex/rng.h"

namespace defex {
namespace {

constexpr const char* kConsonants = "bdfgklmnprstvz";
constexpr const char* kVowels = "aeiou";

// Unique pronounceable pseudo-words.
class WordFactory {
 public:
  explicit WordFactory(Rng& rng) : rng_(rng) {}

  std::string Make() {
    for (;;) {
      const size_t syllables = 2 + rng_.UniformIndex(2);
      std::string w;
      for (size_t s = 0; s < syllables; ++s) {
        w += kConsonants[rng_.UniformIndex(14)];
        w += kVowels[rng_.UniformIndex(5)];
      }
      if (rng_.Bernoulli(0.5)) w += kConsonants[rng_.UniformIndex(14)];
      if (used_.insert(w).second) return w;
    }
  }

  std::vector<std::string> MakeMany(size_t n) {
    std::vector<std::string> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) out.push_back(Make());
    return out;
  }

 private:
  Rng& rng_;
  std::set<std::string> used_;
};

struct Sense {
  std::string id;
  std::vector<std::string> triggers;
  std::string cue;  // empty unless context decides the sense
  Tokens definition;
};

Tokens BuildDefinition(const std::vector<std::string>& gloss) {
  // "to g0 g1 of the g2 g3 ..." so every definition shares a few function
  // words with every other one.
  Tokens def{"to"};
  for (size_t i = 0; i < gloss.size(); ++i) {
    if (i == 2) {
      def.push_back("of");
      def.push_back("the");
    }
    def.push_back(gloss[i]);
  }
  return def;
}

std::string Padded(const char* prefix, size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, i);
  return buf;
}

struct Placed {
  Tokens tokens;
  int trigger_pos = 0;
  std::vector<int> free_positions;  // neither trigger nor cue
};

Placed MakeSentence(const SyntheticSpec& spec, const Sense& sense,
                    const std::vector<std::string>& fillers, Rng& rng) {
  const size_t span = spec.max_sentence_length - spec.min_sentence_length + 1;
  const size_t len = spec.min_sentence_length + rng.UniformIndex(span);
  Placed p;
  p.tokens.resize(len);
  for (auto& t : p.tokens) t = fillers[rng.UniformIndex(fillers.size())];
  std::vector<int> positions(len);
  for (size_t i = 0; i < len; ++i) positions[i] = static_cast<int>(i);
  rng.Shuffle(positions);
  p.trigger_pos = positions[0];
  p.tokens[p.trigger_pos] =
      sense.triggers[rng.UniformIndex(sense.triggers.size())];
  size_t used = 1;
  if (!sense.cue.empty()) {
    p.tokens[positions[1]] = sense.cue;
    used = 2;
  }
  p.free_positions.assign(positions.begin() + used, positions.end());
  return p;
}

}  // namespace

SyntheticData GenerateSyntheticCorpus(const SyntheticSpec& spec,
                                      uint64_t seed) {
  if (spec.n_types < 2) {
    Fail(ErrorKind::kArgument, "synthetic spec needs n_types >= 2");
  }
  if (spec.triggers_per_type == 0 || spec.mentions_per_type == 0 ||
      spec.instances_per_definition == 0 ||
      spec.gloss_words_per_definition == 0 || spec.filler_vocab_size == 0 ||
      spec.sentences_per_document == 0) {
    Fail(ErrorKind::kArgument, "synthetic spec counts must be positive");
  }
  if (spec.n_distractors == 0 && spec.nonevent_candidates_per_sentence > 0) {
    Fail(ErrorKind::kArgument,
         "non-event candidates need at least one distractor sense");
  }
  if (spec.max_sentence_length < spec.min_sentence_length ||
      spec.min_sentence_length < 2 + spec.nonevent_candidates_per_sentence) {
    Fail(ErrorKind::kArgument, "sentence length bounds too small");
  }
  if (spec.gloss_vocab_size > 0) {
    // distinct definitions available from the pool, C(pool, words), capped
    double combos = 1.0;
    for (size_t i = 0; i < spec.gloss_words_per_definition; ++i) {
      combos *= static_cast<double>(spec.gloss_vocab_size - std::min(i, spec.gloss_vocab_size)) /
                static_cast<double>(i + 1);
    }
    if (combos < 2.0 * static_cast<double>(spec.n_types + spec.n_distractors)) {
      Fail(ErrorKind::kArgument, "gloss_vocab_size too small for distinct definitions");
    }
  }
  const bool shared = spec.confusability == Confusability::kShared;
  if (shared && spec.group_size < 2) {
    Fail(ErrorKind::kArgument, "shared vocabulary needs group_size >= 2");
  }

  Rng rng = Rng::Derive(seed, 1);
  WordFactory words(rng);
  const std::vector<std::string> fillers = words.MakeMany(spec.filler_vocab_size);
  const std::vector<std::string> gloss_pool = words.MakeMany(spec.gloss_vocab_size);
  std::set<Tokens> used_definitions;
  // Fresh gloss words, from the shared pool when there is one. Pool draws
  // are distinct within a definition and repeated definitions are redrawn.
  auto gloss_words = [&](size_t n, const std::vector<std::string>& prefix) {
    if (gloss_pool.empty()) {
      auto out = prefix;
      for (const auto& w : words.MakeMany(n)) out.push_back(w);
      return out;
    }
    for (;;) {
      auto out = prefix;
      std::vector<std::string> pool = gloss_pool;
      rng.Shuffle(pool);
      for (const auto& w : pool) {
        if (out.size() == prefix.size() + n) break;
        if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
      }
      if (used_definitions.insert(BuildDefinition(out)).second) return out;
    }
  };

  std::vector<Sense> targets(spec.n_types);
  if (shared) {
    const size_t n_groups = (spec.n_types + spec.group_size - 1) / spec.group_size;
    for (size_t g = 0; g < n_groups; ++g) {
      const auto group_triggers = words.MakeMany(spec.triggers_per_type);
      const auto group_gloss = words.MakeMany(spec.gloss_words_per_definition > 1
                                                  ? spec.gloss_words_per_definition - 1
                                                  : 0);
      for (size_t k = g * spec.group_size;
           k < std::min(spec.n_types, (g + 1) * spec.group_size); ++k) {
        targets[k].triggers = group_triggers;
        targets[k].cue = words.Make();
        auto gloss = group_gloss;
        gloss.push_back(words.Make());
        targets[k].definition = BuildDefinition(gloss);
      }
    }
  } else {
    for (auto& t : targets) {
      t.triggers = words.MakeMany(spec.triggers_per_type);
      t.definition = BuildDefinition(gloss_words(spec.gloss_words_per_definition, {}));
    }
  }
  std::vector<Sense> distractors(spec.n_distractors);
  for (auto& d : distractors) {
    d.triggers = words.MakeMany(spec.triggers_per_type);
    d.definition = BuildDefinition(gloss_words(spec.gloss_words_per_definition, {}));
  }
  const int id_width = 4;
  for (size_t k = 0; k < targets.size(); ++k) {
    targets[k].id = Padded("syn:", k, id_width);
  }
  for (size_t k = 0; k < distractors.size(); ++k) {
    distractors[k].id = Padded("syn:", targets.size() + k, id_width);
  }

  SyntheticData data;

  std::vector<EventType> types;
  for (size_t k = 0; k < targets.size(); ++k) {
    types.push_back(EventType{Padded("Event", k, 2), targets[k].definition});
  }
  data.ontology = EventOntology(std::move(types));

  // Alignment corpus: instances grouped by sense, then shuffled so file
  // order carries no sense information.
  Rng corpus_rng = Rng::Derive(seed, 2);
  auto add_instances = [&](const Sense& sense, size_t count) {
    data.corpus.definitions.emplace(sense.id, sense.definition);
    for (size_t n = 0; n < count; ++n) {
      Placed p = MakeSentence(spec, sense, fillers, corpus_rng);
      data.corpus.instances.push_back(AlignmentInstance{
          std::move(p.tokens), p.trigger_pos, p.trigger_pos, sense.definition,
          sense.id});
    }
  };
  for (const auto& t : targets) add_instances(t, spec.instances_per_definition);
  for (const auto& d : distractors) {
    add_instances(d, spec.distractor_instances_per_definition);
  }
  corpus_rng.Shuffle(data.corpus.instances);

  // Documents: one event mention per sentence plus distractor-sense
  // candidates.
  Rng doc_rng = Rng::Derive(seed, 3);
  std::vector<size_t> event_types;
  for (size_t k = 0; k < targets.size(); ++k) {
    event_types.insert(event_types.end(), spec.mentions_per_type, k);
  }
  doc_rng.Shuffle(event_types);
  const size_t n_docs = (event_types.size() + spec.sentences_per_document - 1) /
                        spec.sentences_per_document;
  for (size_t d = 0; d < n_docs; ++d) {
    Document doc;
    doc.doc_id = Padded("doc", d, 5);
    const size_t begin = d * spec.sentences_per_document;
    const size_t end =
        std::min(event_types.size(), begin + spec.sentences_per_document);
    for (size_t e = begin; e < end; ++e) {
      const size_t k = event_types[e];
      Placed p = MakeSentence(spec, targets[k], fillers, doc_rng);
      const int sent_idx = static_cast<int>(doc.sentences.size());
      std::vector<Span> spans{Span{sent_idx, p.trigger_pos, p.trigger_pos}};
      data.gold.Insert(SpanKey{doc.doc_id, sent_idx, p.trigger_pos,
                               p.trigger_pos},
                       MentionLabel{data.ontology[k].type_name, 0.0});
      for (size_t c = 0; c < spec.nonevent_candidates_per_sentence; ++c) {
        const Sense& ds = distractors[doc_rng.UniformIndex(distractors.size())];
        const int pos = p.free_positions[c];
        p.tokens[pos] = ds.triggers[doc_rng.UniformIndex(ds.triggers.size())];
        spans.push_back(Span{sent_idx, pos, pos});
      }
      std::sort(spans.begin(), spans.end());
      doc.candidates.insert(doc.candidates.end(), spans.begin(), spans.end());
      doc.sentences.push_back(std::move(p.tokens));
    }
    data.documents.push_back(std::move(doc));
  }
  data.corpus.Validate();
  return data;
}

GoldMentionSet RestrictGold(const GoldMentionSet& gold,
                            const std::vector<Document>& docs) {
  std::set<std::string> ids;
  for (const auto& d : docs) ids.insert(d.doc_id);
  GoldMentionSet out;
  for (const auto& [key, label] : gold.records()) {
    if (ids.count(key.doc_id)) out.Insert(key, label);
  }
  return out;
}

std::pair<LabeledDocuments, LabeledDocuments> SplitDocuments(
    const std::vector<Document>& docs, const GoldMentionSet& gold,
    double fraction, uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    Fail(ErrorKind::kArgument, "split fraction must lie in [0, 1]");
  }
  std::vector<size_t> order(docs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.Shuffle(order);
  const size_t n_first =
      static_cast<size_t>(std::lround(fraction * static_cast<double>(docs.size())));
  std::vector<size_t> first(order.begin(), order.begin() + n_first);
  std::vector<size_t> second(order.begin() + n_first, order.end());
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  LabeledDocuments a, b;
  for (size_t i : first) a.documents.push_back(docs[i]);
  for (size_t i : second) b.documents.push_back(docs[i]);
  a.gold = RestrictGold(gold, a.documents);
  b.gold = RestrictGold(gold, b.documents);
  return {std::move(a), std::move(b)};
}

}  // namespace defex
