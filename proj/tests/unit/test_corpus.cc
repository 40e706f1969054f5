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

#include <fstream>
#include <map>
#include <set>

#include "defex/corpus.h"
#include "defex/synthetic.h"
#include "fixtures.h"

namespace defex {
namespace {

using testing::ErrorOf;
using testing::TempDir;

void WriteLines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  for (const auto& l : lines) out << l << '\n';
}

TEST_SUITE("corpus") {
  TEST_CASE("one valid alignment record loads as one instance") {
    TempDir dir;
    WriteLines(dir / "a.jsonl",
               {R"({"sentence":["they","attack","now"],"start":1,"end":1,)"
                R"("definition":["to","assault"],"definition_id":"attack.v.01"})"});
    const AlignmentCorpus c = LoadAlignmentCorpus(dir / "a.jsonl");
    REQUIRE(c.instances.size() == 1);
    CHECK(c.instances[0].sentence == Tokens{"they", "attack", "now"});
    CHECK(c.definitions.size() == 1);
    SaveAlignmentCorpus(c, dir / "b.jsonl");
    CHECK(LoadAlignmentCorpus(dir / "b.jsonl") == c);
  }

  TEST_CASE("start after end is a validation error") {
    TempDir dir;
    WriteLines(dir / "a.jsonl",
               {R"({"sentence":["a","b","c","d"],"start":3,"end":2,)"
                R"("definition":["x"],"definition_id":"x"})"});
    CHECK(ErrorOf([&] { LoadAlignmentCorpus(dir / "a.jsonl"); }) == ErrorKind::kValidation);
  }

  TEST_CASE("span past the sentence end is a validation error") {
    AlignmentCorpus c;
    c.definitions["d"] = {"x"};
    c.instances.push_back({{"a", "b"}, 1, 2, {"x"}, "d"});
    CHECK(ErrorOf([&] { c.Validate(); }) == ErrorKind::kValidation);
  }

  TEST_CASE("three records sharing a definition id give one definition entry") {
    TempDir dir;
    std::vector<std::string> lines;
    for (int i = 0; i < 3; ++i) {
      lines.push_back(R"({"sentence":["w)" + std::to_string(i) +
                      R"(","go"],"start":1,"end":1,"definition":["to","move"],)"
                      R"("definition_id":"go.v.01"})");
    }
    WriteLines(dir / "a.jsonl", lines);
    const AlignmentCorpus c = LoadAlignmentCorpus(dir / "a.jsonl");
    CHECK(c.instances.size() == 3);
    CHECK(c.definitions.size() == 1);
    CHECK(c.CountsPerDefinition().at("go.v.01") == 3);
    SaveAlignmentCorpus(c, dir / "b.jsonl");
    CHECK(LoadAlignmentCorpus(dir / "b.jsonl") == c);
  }

  TEST_CASE("one id with two different definitions is rejected") {
    TempDir dir;
    WriteLines(dir / "a.jsonl",
               {R"({"sentence":["a"],"start":0,"end":0,"definition":["x"],"definition_id":"d"})",
                R"({"sentence":["b"],"start":0,"end":0,"definition":["y"],"definition_id":"d"})"});
    CHECK(ErrorOf([&] { LoadAlignmentCorpus(dir / "a.jsonl"); }) == ErrorKind::kValidation);
  }

  TEST_CASE("malformed line and missing file carry their categories") {
    TempDir dir;
    WriteLines(dir / "a.jsonl", {R"({"sentence":["a"],"start":0,)"});
    try {
      LoadAlignmentCorpus(dir / "a.jsonl");
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kParse);
      CHECK(std::string(e.what()).find(":1") != std::string::npos);
    }
    CHECK(ErrorOf([&] { LoadAlignmentCorpus(dir / "nope.jsonl"); }) ==
          ErrorKind::kInputNotFound);
    CHECK(ErrorOf([&] { LoadGold(dir / "nope.jsonl"); }) == ErrorKind::kInputNotFound);
  }

  TEST_CASE("subsample keeps k of 25 and all of 3") {
    AlignmentCorpus c;
    c.definitions["big"] = {"x"};
    c.definitions["small"] = {"y"};
    for (int i = 0; i < 25; ++i) c.instances.push_back({{"s" + std::to_string(i)}, 0, 0, {"x"}, "big"});
    for (int i = 0; i < 3; ++i) c.instances.push_back({{"t" + std::to_string(i)}, 0, 0, {"y"}, "small"});
    const AlignmentCorpus s = SubsamplePerDefinition(c, 10, 4);
    const auto counts = s.CountsPerDefinition();
    CHECK(counts.at("big") == 10);
    CHECK(counts.at("small") == 3);
    CHECK(s.definitions == c.definitions);
    CHECK(SubsamplePerDefinition(c, 10, 4) == s);
  }

  TEST_CASE("subsample is an order-preserving subset with min(k, n) per definition") {
    const SyntheticData data = GenerateSyntheticCorpus(testing::TinySpec(), 3);
    for (size_t k : {1u, 2u, 3u, 10u}) {
      const AlignmentCorpus s = SubsamplePerDefinition(data.corpus, k, 99 + k);
      // subset in original relative order: a single forward scan finds them all
      size_t pos = 0;
      for (const auto& inst : s.instances) {
        while (pos < data.corpus.instances.size() && !(data.corpus.instances[pos] == inst)) ++pos;
        REQUIRE(pos < data.corpus.instances.size());
        ++pos;
      }
      const auto before = data.corpus.CountsPerDefinition();
      const auto after = s.CountsPerDefinition();
      for (const auto& [id, n] : before) CHECK(after.at(id) == std::min(k, n));
    }
  }

  TEST_CASE("prediction files round-trip, including the empty set") {
    TempDir dir;
    PredictionSet empty;
    SavePredictions(empty, dir / "p0.jsonl");
    CHECK(LoadPredictions(dir / "p0.jsonl").empty());

    PredictionSet five;
    for (int i = 0; i < 5; ++i) {
      five.Insert(SpanKey{"d" + std::to_string(i % 2), i, i, i + 1},
                  MentionLabel{"T" + std::to_string(i), 0.125 * i + 0.1});
    }
    SavePredictions(five, dir / "p5.jsonl");
    std::ifstream in(dir / "p5.jsonl");
    size_t lines = 0;
    for (std::string l; std::getline(in, l);) lines += !l.empty();
    CHECK(lines == 5);
    CHECK(LoadPredictions(dir / "p5.jsonl") == five);
  }

  TEST_CASE("two records for one span key are rejected") {
    TempDir dir;
    WriteLines(dir / "g.jsonl",
               {R"({"doc_id":"d","sentence_idx":0,"start":1,"end":1,"type_name":"A"})",
                R"({"doc_id":"d","sentence_idx":0,"start":1,"end":1,"type_name":"B"})"});
    CHECK(ErrorOf([&] { LoadGold(dir / "g.jsonl"); }) == ErrorKind::kValidation);
    MentionSet s;
    s.Insert({"d", 0, 1, 1}, {"A", 0.0});
    CHECK(ErrorOf([&] { s.Insert({"d", 0, 1, 1}, {"A", 0.0}); }) == ErrorKind::kValidation);
  }

  TEST_CASE("every record type round-trips exactly") {
    TempDir dir;
    const SyntheticData data = GenerateSyntheticCorpus(testing::TinySpec(), 5);
    SaveAlignmentCorpus(data.corpus, dir / "a.jsonl");
    SaveOntology(data.ontology, dir / "o.jsonl");
    SaveDocuments(data.documents, dir / "d.jsonl");
    SaveGold(data.gold, dir / "g.jsonl");
    CHECK(LoadAlignmentCorpus(dir / "a.jsonl") == data.corpus);
    CHECK(LoadOntology(dir / "o.jsonl") == data.ontology);
    CHECK(LoadDocuments(dir / "d.jsonl") == data.documents);
    CHECK(LoadGold(dir / "g.jsonl") == data.gold);
  }

  TEST_CASE("ontology keeps file order and rejects duplicate names") {
    const EventOntology o(std::vector<EventType>{{"B", {"b"}}, {"A", {"a"}}});
    CHECK(*o.index_of("B") == 0);
    CHECK(*o.index_of("A") == 1);
    CHECK_FALSE(o.index_of("C").has_value());
    CHECK(ErrorOf([] { EventOntology(std::vector<EventType>{{"A", {"a"}}, {"A", {"b"}}}); }) ==
          ErrorKind::kValidation);
  }

  TEST_CASE("gold types must resolve in the ontology") {
    const EventOntology o(std::vector<EventType>{{"A", {"a"}}});
    GoldMentionSet g;
    g.Insert({"d", 0, 0, 0}, {"Z", 0.0});
    CHECK(ErrorOf([&] { g.ValidateAgainst(o); }) == ErrorKind::kValidation);
  }

  TEST_CASE("document candidates must lie inside their sentences") {
    Document d{"d", {{"a", "b"}}, {Span{0, 0, 2}}};
    CHECK(ErrorOf([&] { d.Validate(); }) == ErrorKind::kValidation);
    Document ok{"d", {{"a", "b"}}, {Span{0, 0, 1}}};
    ok.Validate();
    CHECK(CountCandidates({ok, ok}) == 2);
  }
}

TEST_SUITE("corpus") {
  TEST_CASE("synthetic: two disjoint types never share a trigger word") {
    SyntheticSpec spec = testing::TinySpec();
    spec.n_types = 2;
    spec.mentions_per_type = 30;
    const SyntheticData data = GenerateSyntheticCorpus(spec, 7);
    std::map<std::string, std::set<std::string>> types_of_word;
    std::map<std::string, const Document*> docs;
    for (const auto& d : data.documents) docs[d.doc_id] = &d;
    for (const auto& [key, label] : data.gold.records()) {
      const std::string& w = docs.at(key.doc_id)->sentences[key.sentence_idx][key.start];
      types_of_word[w].insert(label.type_name);
    }
    CHECK(types_of_word.size() >= 2);
    for (const auto& [w, types] : types_of_word) CHECK(types.size() == 1);
  }

  TEST_CASE("synthetic: same spec and seed give identical data") {
    TempDir dir;
    const SyntheticSpec spec = testing::TinySpec();
    const SyntheticData a = GenerateSyntheticCorpus(spec, 11);
    const SyntheticData b = GenerateSyntheticCorpus(spec, 11);
    CHECK(a.corpus == b.corpus);
    CHECK(a.documents == b.documents);
    CHECK(a.gold == b.gold);
    SaveAlignmentCorpus(a.corpus, dir / "a.jsonl");
    SaveAlignmentCorpus(b.corpus, dir / "b.jsonl");
    std::ifstream fa(dir / "a.jsonl"), fb(dir / "b.jsonl");
    CHECK(std::string(std::istreambuf_iterator<char>(fa), {}) ==
          std::string(std::istreambuf_iterator<char>(fb), {}));
  }

  TEST_CASE("synthetic: 20 types with 50 mentions each give 1000 gold records") {
    SyntheticSpec spec;
    spec.instances_per_definition = 1;
    spec.distractor_instances_per_definition = 1;
    const SyntheticData data = GenerateSyntheticCorpus(spec, 2);
    CHECK(data.gold.size() == 1000);
    CHECK(data.ontology.size() == 20);
  }

  TEST_CASE("synthetic: gold mentions are candidate spans, in both settings") {
    for (Confusability conf : {Confusability::kDisjoint, Confusability::kShared}) {
      SyntheticSpec spec = testing::TinySpec();
      spec.confusability = conf;
      const SyntheticData data = GenerateSyntheticCorpus(spec, 21);
      std::set<SpanKey> candidates;
      for (const auto& d : data.documents) {
        for (const auto& c : d.candidates) candidates.insert({d.doc_id, c.sentence_idx, c.start, c.end});
      }
      for (const auto& [key, label] : data.gold.records()) CHECK(candidates.count(key) == 1);
      data.gold.ValidateAgainst(data.ontology);
    }
  }

  TEST_CASE("synthetic: shared setting groups types behind one trigger set") {
    SyntheticSpec spec = testing::TinySpec();
    spec.confusability = Confusability::kShared;
    spec.group_size = 2;
    spec.mentions_per_type = 20;
    const SyntheticData data = GenerateSyntheticCorpus(spec, 8);
    std::map<std::string, std::set<std::string>> types_of_word;
    std::map<std::string, const Document*> docs;
    for (const auto& d : data.documents) docs[d.doc_id] = &d;
    for (const auto& [key, label] : data.gold.records()) {
      types_of_word[docs.at(key.doc_id)->sentences[key.sentence_idx][key.start]].insert(
          label.type_name);
    }
    size_t shared = 0;
    for (const auto& [w, types] : types_of_word) shared += types.size() > 1;
    CHECK(shared > 0);
  }

  TEST_CASE("synthetic: bad specs are argument errors") {
    SyntheticSpec spec = testing::TinySpec();
    spec.n_types = 1;
    CHECK(ErrorOf([&] { GenerateSyntheticCorpus(spec, 1); }) == ErrorKind::kArgument);
    spec = testing::TinySpec();
    spec.gloss_vocab_size = 3;
    CHECK(ErrorOf([&] { GenerateSyntheticCorpus(spec, 1); }) == ErrorKind::kArgument);
  }

  TEST_CASE("synthetic: document split is a partition") {
    const SyntheticData data = GenerateSyntheticCorpus(testing::TinySpec(), 4);
    const auto [a, b] = SplitDocuments(data.documents, data.gold, 0.5, 3);
    CHECK(a.documents.size() + b.documents.size() == data.documents.size());
    CHECK(a.gold.size() + b.gold.size() == data.gold.size());
    std::set<std::string> ids;
    for (const auto& d : a.documents) ids.insert(d.doc_id);
    for (const auto& d : b.documents) CHECK(ids.count(d.doc_id) == 0);
  }
}

}  // namespace
}  // namespace defex
