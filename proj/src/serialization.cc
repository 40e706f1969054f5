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

#include "defex/serialization.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "defex/error.h"

namespace defex {
namespace {

void CheckKeys(const Json& j, const std::set<std::string>& allowed, const char* what) {
  if (!j.is_object()) Fail(ErrorKind::kConfiguration, std::string(what) + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      Fail(ErrorKind::kConfiguration, "unknown " + std::string(what) + " key: " + key);
    }
  }
}

template <typename T>
void Read(const Json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kConfiguration, std::string("bad value for ") + key + ": " + e.what());
  }
}

}  // namespace

Json ToJson(const EncoderConfig& c) {
  return Json{{"vocab_size", c.vocab_size},
              {"embedding_dim", c.embedding_dim},
              {"n_layers", c.n_layers},
              {"n_heads", c.n_heads},
              {"feedforward_dim", c.feedforward_dim},
              {"ffn_head_hidden", c.ffn_head_hidden},
              {"max_sequence_length", c.max_sequence_length},
              {"tokenizer", std::string(TokenizerKindName(c.tokenizer))},
              {"embedding_init_std", c.embedding_init_std},
              {"position_scale", c.position_scale}};
}

void MergeJson(const Json& j, EncoderConfig& c) {
  CheckKeys(j,
            {"vocab_size", "embedding_dim", "n_layers", "n_heads", "feedforward_dim",
             "ffn_head_hidden", "max_sequence_length", "tokenizer", "embedding_init_std",
             "position_scale"},
            "encoder");
  Read(j, "vocab_size", c.vocab_size);
  Read(j, "embedding_dim", c.embedding_dim);
  Read(j, "n_layers", c.n_layers);
  Read(j, "n_heads", c.n_heads);
  Read(j, "feedforward_dim", c.feedforward_dim);
  Read(j, "ffn_head_hidden", c.ffn_head_hidden);
  Read(j, "max_sequence_length", c.max_sequence_length);
  Read(j, "embedding_init_std", c.embedding_init_std);
  Read(j, "position_scale", c.position_scale);
  if (j.contains("tokenizer")) {
    std::string name;
    Read(j, "tokenizer", name);
    c.tokenizer = ParseTokenizerKind(name);
  }
}

EncoderConfig EncoderConfigFromJson(const Json& j) {
  EncoderConfig c;
  MergeJson(j, c);
  return c;
}

Json ToJson(const TrainConfig& c) {
  return Json{{"margin", c.margin},
              {"n_negatives", c.n_negatives},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"seed", c.seed},
              {"strong_negative_ratio", c.strong_negative_ratio}};
}

void MergeJson(const Json& j, TrainConfig& c) {
  CheckKeys(j,
            {"margin", "n_negatives", "epochs", "batch_size", "learning_rate", "seed",
             "strong_negative_ratio"},
            "train");
  Read(j, "margin", c.margin);
  Read(j, "n_negatives", c.n_negatives);
  Read(j, "epochs", c.epochs);
  Read(j, "batch_size", c.batch_size);
  Read(j, "learning_rate", c.learning_rate);
  Read(j, "seed", c.seed);
  Read(j, "strong_negative_ratio", c.strong_negative_ratio);
}

Json ToJson(const RetrievalConfig& c) {
  return Json{{"similarity", "cosine"},
              {"static_embedder", std::string(StaticEmbedderName(c.static_embedder))},
              {"retrieved_count", c.retrieved_count}};
}

void MergeJson(const Json& j, RetrievalConfig& c) {
  CheckKeys(j, {"similarity", "static_embedder", "retrieved_count"}, "retrieval");
  if (j.contains("similarity")) {
    std::string sim;
    Read(j, "similarity", sim);
    if (sim != "cosine") Fail(ErrorKind::kConfiguration, "unsupported similarity: " + sim);
  }
  if (j.contains("static_embedder")) {
    std::string name;
    Read(j, "static_embedder", name);
    c.static_embedder = ParseStaticEmbedder(name);
  }
  Read(j, "retrieved_count", c.retrieved_count);
}

Json ToJson(const InferenceConfig& c) {
  return Json{{"threshold", c.threshold}, {"batch_size", c.batch_size}, {"threads", c.threads}};
}

void MergeJson(const Json& j, InferenceConfig& c) {
  CheckKeys(j, {"threshold", "batch_size", "threads"}, "inference");
  Read(j, "threshold", c.threshold);
  Read(j, "batch_size", c.batch_size);
  Read(j, "threads", c.threads);
}

Json ToJson(const SyntheticSpec& s) {
  return Json{{"n_types", s.n_types},
              {"triggers_per_type", s.triggers_per_type},
              {"mentions_per_type", s.mentions_per_type},
              {"instances_per_definition", s.instances_per_definition},
              {"n_distractors", s.n_distractors},
              {"distractor_instances_per_definition", s.distractor_instances_per_definition},
              {"confusability", s.confusability == Confusability::kShared ? "shared" : "disjoint"},
              {"group_size", s.group_size},
              {"gloss_words_per_definition", s.gloss_words_per_definition},
              {"gloss_vocab_size", s.gloss_vocab_size},
              {"filler_vocab_size", s.filler_vocab_size},
              {"min_sentence_length", s.min_sentence_length},
              {"max_sentence_length", s.max_sentence_length},
              {"sentences_per_document", s.sentences_per_document},
              {"nonevent_candidates_per_sentence", s.nonevent_candidates_per_sentence}};
}

void MergeJson(const Json& j, SyntheticSpec& s) {
  CheckKeys(j,
            {"n_types", "triggers_per_type", "mentions_per_type", "instances_per_definition",
             "n_distractors", "distractor_instances_per_definition", "confusability",
             "group_size", "gloss_words_per_definition", "gloss_vocab_size", "filler_vocab_size",
             "min_sentence_length", "max_sentence_length", "sentences_per_document",
             "nonevent_candidates_per_sentence"},
            "synthetic");
  Read(j, "n_types", s.n_types);
  Read(j, "triggers_per_type", s.triggers_per_type);
  Read(j, "mentions_per_type", s.mentions_per_type);
  Read(j, "instances_per_definition", s.instances_per_definition);
  Read(j, "n_distractors", s.n_distractors);
  Read(j, "distractor_instances_per_definition", s.distractor_instances_per_definition);
  if (j.contains("confusability")) {
    std::string name;
    Read(j, "confusability", name);
    if (name == "shared") {
      s.confusability = Confusability::kShared;
    } else if (name == "disjoint") {
      s.confusability = Confusability::kDisjoint;
    } else {
      Fail(ErrorKind::kConfiguration, "confusability must be disjoint or shared");
    }
  }
  Read(j, "group_size", s.group_size);
  Read(j, "gloss_words_per_definition", s.gloss_words_per_definition);
  Read(j, "gloss_vocab_size", s.gloss_vocab_size);
  Read(j, "filler_vocab_size", s.filler_vocab_size);
  Read(j, "min_sentence_length", s.min_sentence_length);
  Read(j, "max_sentence_length", s.max_sentence_length);
  Read(j, "sentences_per_document", s.sentences_per_document);
  Read(j, "nonevent_candidates_per_sentence", s.nonevent_candidates_per_sentence);
}

Json ToJson(const TrainReport& r) {
  return Json{{"epoch_loss", r.epoch_loss},
              {"epoch_seconds", r.epoch_seconds},
              {"checkpoint_path", r.checkpoint_path}};
}

Json ReadJsonFile(const std::string& path) {
  if (!std::filesystem::exists(path)) Fail(ErrorKind::kInputNotFound, "no such file: " + path);
  std::ifstream in(path);
  if (!in) Fail(ErrorKind::kIo, "cannot read " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorKind::kParse, path + ": " + e.what());
  }
}

void WriteJsonFile(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) Fail(ErrorKind::kIo, "write failed: " + path);
}

}  // namespace defex
