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

// Record types and their line-delimited JSON formats:
//
//   alignments.jsonl  {"sentence": [...], "start": i, "end": j,
//                      "definition": [...], "definition_id": "..."}
//   ontology.jsonl    {"type_name": "...", "definition": [...]}
//   docs.jsonl        {"doc_id": "...", "sentences": [[...], ...],
//                      "candidates": [[sent_idx, start, end], ...]}
//   gold.jsonl        {"doc_id", "sentence_idx", "start", "end", "type_name"}
//   preds.jsonl       gold fields plus "score"
//
// Spans are word-level with an inclusive end index.

#ifndef DEFEX_CORPUS_H_
#define DEFEX_CORPUS_H_

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace defex {

using Tokens = std::vector<std::string>;

struct AlignmentInstance {
  Tokens sentence;
  int start = 0;
  int end = 0;  // inclusive
  Tokens definition;
  std::string definition_id;

  bool operator==(const AlignmentInstance&) const = default;
};

struct AlignmentCorpus {
  std::vector<AlignmentInstance> instances;
  // Full definition inventory, ordered by id.
  std::map<std::string, Tokens> definitions;

  // Throws kValidation on any broken invariant.
  void Validate() const;
  // Number of instances per definition id (ids without instances omitted).
  std::map<std::string, size_t> CountsPerDefinition() const;

  bool operator==(const AlignmentCorpus&) const = default;
};

struct EventType {
  std::string type_name;
  Tokens definition;

  bool operator==(const EventType&) const = default;
};

// Target event types in a stable order; argmax ties resolve to the smallest
// index, so the order is part of the ontology's identity.
class EventOntology {
 public:
  EventOntology() = default;
  explicit EventOntology(std::vector<EventType> types);

  const std::vector<EventType>& types() const { return types_; }
  size_t size() const { return types_.size(); }
  bool empty() const { return types_.empty(); }
  const EventType& operator[](size_t i) const { return types_[i]; }
  std::optional<size_t> index_of(const std::string& type_name) const;

  bool operator==(const EventOntology& other) const {
    return types_ == other.types_;
  }

 private:
  std::vector<EventType> types_;
  std::unordered_map<std::string, size_t> index_;
};

struct Span {
  int sentence_idx = 0;
  int start = 0;
  int end = 0;  // inclusive

  auto operator<=>(const Span&) const = default;
};

struct Document {
  std::string doc_id;
  std::vector<Tokens> sentences;
  std::vector<Span> candidates;

  void Validate() const;
  bool operator==(const Document&) const = default;
};

struct SpanKey {
  std::string doc_id;
  int sentence_idx = 0;
  int start = 0;
  int end = 0;

  auto operator<=>(const SpanKey&) const = default;
};

struct MentionLabel {
  std::string type_name;
  double score = 0.0;  // only meaningful for predictions

  bool operator==(const MentionLabel&) const = default;
};

// Span-level mention records, unique per span key. Gold sets leave score at 0.
class MentionSet {
 public:
  // Throws kValidation if the key is already present.
  void Insert(const SpanKey& key, MentionLabel label);
  bool Contains(const SpanKey& key) const { return records_.count(key) > 0; }
  const MentionLabel* Find(const SpanKey& key) const;

  const std::map<SpanKey, MentionLabel>& records() const { return records_; }
  size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  // Throws kValidation if any type name does not resolve in the ontology.
  void ValidateAgainst(const EventOntology& ontology) const;

  bool operator==(const MentionSet&) const = default;

 private:
  std::map<SpanKey, MentionLabel> records_;
};

using GoldMentionSet = MentionSet;
using PredictionSet = MentionSet;

// Loaders throw kInputNotFound for a missing file, kParse (with the 1-based
// line number) for a malformed line and kValidation for invariant violations.
AlignmentCorpus LoadAlignmentCorpus(const std::string& path);
void SaveAlignmentCorpus(const AlignmentCorpus& corpus, const std::string& path);

EventOntology LoadOntology(const std::string& path);
void SaveOntology(const EventOntology& ontology, const std::string& path);

std::vector<Document> LoadDocuments(const std::string& path);
void SaveDocuments(const std::vector<Document>& docs, const std::string& path);

GoldMentionSet LoadGold(const std::string& path);
void SaveGold(const GoldMentionSet& gold, const std::string& path);

PredictionSet LoadPredictions(const std::string& path);
void SavePredictions(const PredictionSet& preds, const std::string& path);

// Keeps at most k instances per definition id, drawn uniformly without
// replacement. Surviving instances keep their original relative order and
// the definitions map is unchanged.
AlignmentCorpus SubsamplePerDefinition(const AlignmentCorpus& corpus, size_t k,
                                       uint64_t seed);

// Total number of candidate spans over a document collection.
size_t CountCandidates(const std::vector<Document>& docs);

}  // namespace defex

#endif  // DEFEX_CORPUS_H_
