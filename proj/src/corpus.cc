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

#include "defex/corpus.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "defex/error.h"
#include "defex/rng.h"
#include "json.hpp"

namespace defex {
namespace {

using json = nlohmann::json;

std::string Join(const Tokens& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

// Calls fn(record, line_number) for every non-blank line of a JSONL file.
void ForEachRecord(const std::string& path,
                   const std::function<void(const json&, size_t)>& fn) {
  if (!std::filesystem::exists(path)) {
    Fail(ErrorKind::kInputNotFound, "input not found: " + path);
  }
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot open " + path);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      Fail(ErrorKind::kParse, path + ":" + std::to_string(line_no) +
                                  ": malformed record: " + e.what());
    }
    if (!record.is_object()) {
      Fail(ErrorKind::kParse,
           path + ":" + std::to_string(line_no) + ": record is not an object");
    }
    try {
      fn(record, line_no);
    } catch (const json::exception& e) {
      Fail(ErrorKind::kParse, path + ":" + std::to_string(line_no) +
                                  ": bad field: " + e.what());
    }
  }
}

class LineWriter {
 public:
  explicit LineWriter(const std::string& path) : path_(path), out_(path) {
    if (!out_) Fail(ErrorKind::kIo, "cannot write " + path);
  }
  void Write(const json& record) { out_ << record.dump() << '\n'; }
  void Close() {
    out_.flush();
    if (!out_) Fail(ErrorKind::kIo, "write failed: " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

void CheckSpan(const Tokens& sentence, int start, int end,
               const std::string& where) {
  if (start < 0 || end < start || end >= static_cast<int>(sentence.size())) {
    Fail(ErrorKind::kValidation,
         where + ": span [" + std::to_string(start) + ", " +
             std::to_string(end) + "] out of bounds for sentence of length " +
             std::to_string(sentence.size()));
  }
}

SpanKey ReadKey(const json& r) {
  return SpanKey{r.at("doc_id").get<std::string>(),
                 r.at("sentence_idx").get<int>(), r.at("start").get<int>(),
                 r.at("end").get<int>()};
}

json WriteKey(const SpanKey& key, const MentionLabel& label) {
  return json{{"doc_id", key.doc_id},
              {"sentence_idx", key.sentence_idx},
              {"start", key.start},
              {"end", key.end},
              {"type_name", label.type_name}};
}

MentionSet LoadMentions(const std::string& path, bool with_score) {
  MentionSet set;
  ForEachRecord(path, [&](const json& r, size_t line_no) {
    SpanKey key = ReadKey(r);
    MentionLabel label{r.at("type_name").get<std::string>(),
                       with_score ? r.at("score").get<double>() : 0.0};
    if (set.Contains(key)) {
      Fail(ErrorKind::kValidation, path + ":" + std::to_string(line_no) +
                                       ": duplicate span key for doc " +
                                       key.doc_id);
    }
    set.Insert(key, std::move(label));
  });
  return set;
}

void SaveMentions(const MentionSet& set, const std::string& path,
                  bool with_score) {
  LineWriter writer(path);
  for (const auto& [key, label] : set.records()) {
    json r = WriteKey(key, label);
    if (with_score) r["score"] = label.score;
    writer.Write(r);
  }
  writer.Close();
}

}  // namespace

std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse-error";
    case ErrorKind::kValidation: return "validation-error";
    case ErrorKind::kArgument: return "argument-error";
    case ErrorKind::kConfiguration: return "configuration-error";
    case ErrorKind::kInputNotFound: return "input-not-found";
    case ErrorKind::kIo: return "io-error";
    case ErrorKind::kNumerical: return "numerical-failure";
    case ErrorKind::kFingerprint: return "fingerprint-mismatch";
    case ErrorKind::kTruncation: return "truncation-error";
    case ErrorKind::kDegenerate: return "degenerate-input";
    case ErrorKind::kInternal: return "internal-error";
  }
  return "unknown";
}

void AlignmentCorpus::Validate() const {
  std::map<std::string, std::string> id_of_text;
  for (const auto& [id, def] : definitions) {
    if (id.empty()) Fail(ErrorKind::kValidation, "empty definition_id");
    if (def.empty()) {
      Fail(ErrorKind::kValidation, "empty definition for id " + id);
    }
    auto [it, inserted] = id_of_text.emplace(Join(def), id);
    if (!inserted) {
      Fail(ErrorKind::kValidation, "definition ids " + it->second + " and " +
                                       id + " share identical text");
    }
  }
  for (size_t n = 0; n < instances.size(); ++n) {
    const auto& inst = instances[n];
    const std::string where = "instance " + std::to_string(n);
    if (inst.sentence.empty()) Fail(ErrorKind::kValidation, where + ": empty sentence");
    if (inst.definition.empty()) {
      Fail(ErrorKind::kValidation, where + ": empty definition");
    }
    CheckSpan(inst.sentence, inst.start, inst.end, where);
    auto it = definitions.find(inst.definition_id);
    if (it == definitions.end()) {
      Fail(ErrorKind::kValidation,
           where + ": unknown definition_id " + inst.definition_id);
    }
    if (it->second != inst.definition) {
      Fail(ErrorKind::kValidation, where + ": definition text differs from "
                                           "inventory entry for " +
                                           inst.definition_id);
    }
  }
}

std::map<std::string, size_t> AlignmentCorpus::CountsPerDefinition() const {
  std::map<std::string, size_t> counts;
  for (const auto& inst : instances) ++counts[inst.definition_id];
  return counts;
}

EventOntology::EventOntology(std::vector<EventType> types)
    : types_(std::move(types)) {
  for (size_t i = 0; i < types_.size(); ++i) {
    if (types_[i].type_name.empty()) {
      Fail(ErrorKind::kValidation, "ontology entry with empty type_name");
    }
    if (types_[i].definition.empty()) {
      Fail(ErrorKind::kValidation,
           "empty definition for type " + types_[i].type_name);
    }
    if (!index_.emplace(types_[i].type_name, i).second) {
      Fail(ErrorKind::kValidation,
           "duplicate type_name " + types_[i].type_name);
    }
  }
}

std::optional<size_t> EventOntology::index_of(
    const std::string& type_name) const {
  auto it = index_.find(type_name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void Document::Validate() const {
  std::set<Span> seen;
  for (const auto& c : candidates) {
    const std::string where = "doc " + doc_id;
    if (c.sentence_idx < 0 ||
        c.sentence_idx >= static_cast<int>(sentences.size())) {
      Fail(ErrorKind::kValidation,
           where + ": candidate sentence index " +
               std::to_string(c.sentence_idx) + " out of range");
    }
    CheckSpan(sentences[c.sentence_idx], c.start, c.end, where);
    if (!seen.insert(c).second) {
      Fail(ErrorKind::kValidation, where + ": duplicate candidate span");
    }
  }
}

void MentionSet::Insert(const SpanKey& key, MentionLabel label) {
  if (!records_.emplace(key, std::move(label)).second) {
    Fail(ErrorKind::kValidation, "duplicate span key in doc " + key.doc_id +
                                     " sentence " +
                                     std::to_string(key.sentence_idx));
  }
}

const MentionLabel* MentionSet::Find(const SpanKey& key) const {
  auto it = records_.find(key);
  return it == records_.end() ? nullptr : &it->second;
}

void MentionSet::ValidateAgainst(const EventOntology& ontology) const {
  for (const auto& [key, label] : records_) {
    if (!ontology.index_of(label.type_name)) {
      Fail(ErrorKind::kValidation, "type " + label.type_name +
                                       " (doc " + key.doc_id +
                                       ") not in ontology");
    }
  }
}

AlignmentCorpus LoadAlignmentCorpus(const std::string& path) {
  AlignmentCorpus corpus;
  ForEachRecord(path, [&](const json& r, size_t line_no) {
    AlignmentInstance inst;
    inst.sentence = r.at("sentence").get<Tokens>();
    inst.start = r.at("start").get<int>();
    inst.end = r.at("end").get<int>();
    inst.definition = r.at("definition").get<Tokens>();
    inst.definition_id = r.at("definition_id").get<std::string>();
    const std::string where = path + ":" + std::to_string(line_no);
    if (inst.sentence.empty()) Fail(ErrorKind::kValidation, where + ": empty sentence");
    if (inst.definition_id.empty()) {
      Fail(ErrorKind::kValidation, where + ": empty definition_id");
    }
    CheckSpan(inst.sentence, inst.start, inst.end, where);
    auto [it, inserted] =
        corpus.definitions.emplace(inst.definition_id, inst.definition);
    if (!inserted && it->second != inst.definition) {
      Fail(ErrorKind::kValidation, where + ": definition_id " +
                                       inst.definition_id +
                                       " reused with different text");
    }
    corpus.instances.push_back(std::move(inst));
  });
  corpus.Validate();
  return corpus;
}

void SaveAlignmentCorpus(const AlignmentCorpus& corpus,
                         const std::string& path) {
  LineWriter writer(path);
  for (const auto& inst : corpus.instances) {
    writer.Write(json{{"sentence", inst.sentence},
                      {"start", inst.start},
                      {"end", inst.end},
                      {"definition", inst.definition},
                      {"definition_id", inst.definition_id}});
  }
  writer.Close();
}

EventOntology LoadOntology(const std::string& path) {
  std::vector<EventType> types;
  ForEachRecord(path, [&](const json& r, size_t) {
    types.push_back(EventType{r.at("type_name").get<std::string>(),
                              r.at("definition").get<Tokens>()});
  });
  return EventOntology(std::move(types));
}

void SaveOntology(const EventOntology& ontology, const std::string& path) {
  LineWriter writer(path);
  for (const auto& t : ontology.types()) {
    writer.Write(json{{"type_name", t.type_name}, {"definition", t.definition}});
  }
  writer.Close();
}

std::vector<Document> LoadDocuments(const std::string& path) {
  std::vector<Document> docs;
  std::set<std::string> ids;
  ForEachRecord(path, [&](const json& r, size_t line_no) {
    Document doc;
    doc.doc_id = r.at("doc_id").get<std::string>();
    doc.sentences = r.at("sentences").get<std::vector<Tokens>>();
    for (const auto& c : r.at("candidates")) {
      if (!c.is_array() || c.size() != 3) {
        Fail(ErrorKind::kParse, path + ":" + std::to_string(line_no) +
                                    ": candidate must be [sent_idx, start, end]");
      }
      doc.candidates.push_back(
          Span{c[0].get<int>(), c[1].get<int>(), c[2].get<int>()});
    }
    if (!ids.insert(doc.doc_id).second) {
      Fail(ErrorKind::kValidation, path + ":" + std::to_string(line_no) +
                                       ": duplicate doc_id " + doc.doc_id);
    }
    doc.Validate();
    docs.push_back(std::move(doc));
  });
  return docs;
}

void SaveDocuments(const std::vector<Document>& docs, const std::string& path) {
  LineWriter writer(path);
  for (const auto& doc : docs) {
    json candidates = json::array();
    for (const auto& c : doc.candidates) {
      candidates.push_back({c.sentence_idx, c.start, c.end});
    }
    writer.Write(json{{"doc_id", doc.doc_id},
                      {"sentences", doc.sentences},
                      {"candidates", candidates}});
  }
  writer.Close();
}

GoldMentionSet LoadGold(const std::string& path) {
  return LoadMentions(path, /*with_score=*/false);
}

void SaveGold(const GoldMentionSet& gold, const std::string& path) {
  SaveMentions(gold, path, /*with_score=*/false);
}

PredictionSet LoadPredictions(const std::string& path) {
  return LoadMentions(path, /*with_score=*/true);
}

void SavePredictions(const PredictionSet& preds, const std::string& path) {
  SaveMentions(preds, path, /*with_score=*/true);
}

AlignmentCorpus SubsamplePerDefinition(const AlignmentCorpus& corpus, size_t k,
                                       uint64_t seed) {
  if (k == 0) Fail(ErrorKind::kArgument, "subsample size k must be >= 1");
  std::map<std::string, std::vector<size_t>> by_definition;
  for (size_t i = 0; i < corpus.instances.size(); ++i) {
    by_definition[corpus.instances[i].definition_id].push_back(i);
  }
  Rng rng(seed);
  std::vector<size_t> keep;
  for (auto& [id, idx] : by_definition) {
    if (idx.size() > k) {
      rng.Shuffle(idx);
      idx.resize(k);
    }
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  AlignmentCorpus out;
  out.definitions = corpus.definitions;
  out.instances.reserve(keep.size());
  for (size_t i : keep) out.instances.push_back(corpus.instances[i]);
  return out;
}

size_t CountCandidates(const std::vector<Document>& docs) {
  size_t n = 0;
  for (const auto& d : docs) n += d.candidates.size();
  return n;
}

}  // namespace defex
