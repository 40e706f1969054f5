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

#include <cmath>
#include <set>

#include "defex/inference.h"
#include "fixtures.h"

namespace defex {
namespace {

using testing::ErrorOf;

struct World {
  SyntheticData data = GenerateSyntheticCorpus(testing::TinySpec(), 3);
  DualEncoderModel model = testing::TinyModel(data, 2);
  DefinitionIndex index = BuildDefinitionIndex(model, data.ontology);
};

// Index whose first vector is the pooled vector of the given span and whose
// second is orthogonal to it.
DefinitionIndex PlantedIndex(const World& w, const Tokens& sentence, int start, int end) {
  const Vector m =
      PoolMention(EncodeTokens(w.model, EncoderSide::kContext, sentence), start, end).values;
  Rng rng(5);
  Vector o = testing::RandomVector(rng, static_cast<size_t>(m.size()));
  o -= (o.dot(m) / m.squaredNorm()) * m;
  DefinitionIndex idx;
  idx.ontology = EventOntology(std::vector<EventType>{w.data.ontology[0], w.data.ontology[1]});
  idx.vectors = {m, o};
  idx.model_fingerprint = w.model.Fingerprint();
  return idx;
}

TEST_SUITE("inference") {
  TEST_CASE("index: one call per type, deterministic, fingerprinted") {
    const World w;
    CallCounter counter;
    const EventOntology one(std::vector<EventType>{w.data.ontology[0]});
    const DefinitionIndex i1 = BuildDefinitionIndex(w.model, one, &counter);
    CHECK(counter.definition_encoder_calls == 1);
    CHECK(counter.context_encoder_calls == 0);
    REQUIRE(i1.vectors.size() == 1);
    CHECK((i1.vectors[0] - EncodeDefinition(w.model, one[0].definition).values).norm() == 0.0);

    const DefinitionIndex again = BuildDefinitionIndex(w.model, w.data.ontology);
    REQUIRE(again.vectors.size() == w.index.vectors.size());
    for (size_t i = 0; i < again.vectors.size(); ++i) CHECK(again.vectors[i] == w.index.vectors[i]);
    CHECK(w.index.model_fingerprint == w.model.Fingerprint());

    std::vector<EventType> many;
    for (int i = 0; i < 168; ++i) many.push_back({"T" + std::to_string(i), w.data.ontology[i % 4].definition});
    CallCounter c168;
    BuildDefinitionIndex(w.model, EventOntology(std::move(many)), &c168);
    CHECK(c168.definition_encoder_calls == 168);
    CHECK(ErrorOf([&] { BuildDefinitionIndex(w.model, EventOntology{}); }) == ErrorKind::kArgument);
  }

  TEST_CASE("index: fingerprint mismatch and file round trip") {
    const World w;
    const DualEncoderModel other = testing::TinyModel(w.data, 99);
    CHECK(ErrorOf([&] { CheckIndexMatches(other, w.index); }) == ErrorKind::kFingerprint);
    CHECK(ErrorOf([&] { Extract(other, w.index, w.data.documents, InferenceConfig{}); }) ==
          ErrorKind::kFingerprint);
    CheckIndexMatches(w.model, w.index);

    testing::TempDir dir;
    SaveDefinitionIndex(w.index, dir / "index.json");
    const DefinitionIndex back = LoadDefinitionIndex(dir / "index.json");
    CHECK(back.model_fingerprint == w.index.model_fingerprint);
    CHECK(back.ontology == w.index.ontology);
    REQUIRE(back.vectors.size() == w.index.vectors.size());
    for (size_t i = 0; i < back.vectors.size(); ++i) {
      CHECK((back.vectors[i] - w.index.vectors[i]).norm() == 0.0);
    }
    CHECK(ErrorOf([&] { LoadDefinitionIndex(dir / "missing.json"); }) == ErrorKind::kInputNotFound);
  }

  TEST_CASE("scoring: planted self-match and orthogonal vector") {
    const World w;
    const Document& doc = w.data.documents.front();
    const Span& c = doc.candidates.front();
    const DefinitionIndex idx = PlantedIndex(w, doc.sentences[c.sentence_idx], c.start, c.end);
    CallCounter counter;
    const auto scores = ScoreMention(w.model, idx, doc.sentences[c.sentence_idx], c.start, c.end,
                                     &counter);
    REQUIRE(scores.size() == 2);
    CHECK(std::abs(scores[0].score - 1.0) <= 1e-12);
    CHECK(std::abs(scores[1].score) <= 1e-12);
    CHECK(scores[0].type_name == idx.ontology[0].type_name);
    CHECK(counter.context_encoder_calls == 1);
  }

  TEST_CASE("scoring matches a hand cosine over random indices") {
    const World w;
    Rng rng(6);
    const Document& doc = w.data.documents.front();
    const Span& c = doc.candidates.front();
    const Tokens& s = doc.sentences[c.sentence_idx];
    const Vector m = PoolMention(EncodeTokens(w.model, EncoderSide::kContext, s), c.start, c.end).values;
    for (int trial = 0; trial < 20; ++trial) {
      DefinitionIndex idx = w.index;
      for (auto& v : idx.vectors) v = testing::RandomVector(rng, static_cast<size_t>(m.size()));
      const auto scores = ScoreMention(w.model, idx, s, c.start, c.end);
      const auto direct = ScoreVector(m, idx);
      for (size_t i = 0; i < idx.vectors.size(); ++i) {
        const double hand = m.dot(idx.vectors[i]) / (m.norm() * idx.vectors[i].norm());
        CHECK(std::abs(scores[i].score - hand) <= 1e-12);
        CHECK(std::abs(direct[i] - hand) <= 1e-12);
      }
      // positive rescaling of an index vector leaves every score unchanged
      DefinitionIndex scaled = idx;
      for (auto& v : scaled.vectors) v *= 4.0;
      const auto again = ScoreVector(m, scaled);
      for (size_t i = 0; i < again.size(); ++i) CHECK(std::abs(again[i] - direct[i]) <= 1e-12);
    }
  }

  TEST_CASE("extraction: planted prediction, near-one threshold, empty input") {
    const World w;
    const Document& doc = w.data.documents.front();
    const Span& c = doc.candidates.front();
    const DefinitionIndex idx = PlantedIndex(w, doc.sentences[c.sentence_idx], c.start, c.end);
    InferenceConfig cfg;
    cfg.threshold = 0.999;
    const ExtractResult r = Extract(w.model, idx, w.data.documents, cfg);
    const MentionLabel* got = r.predictions.Find(SpanKey{doc.doc_id, c.sentence_idx, c.start, c.end});
    REQUIRE(got != nullptr);
    CHECK(got->type_name == idx.ontology[0].type_name);
    CHECK(std::abs(got->score - 1.0) <= 1e-12);

    CHECK(Extract(w.model, w.index, w.data.documents, cfg).predictions.empty());
    const ExtractResult none = Extract(w.model, w.index, {}, cfg);
    CHECK(none.predictions.empty());
    CHECK(none.counter.context_encoder_calls == 0);
    CHECK(none.candidates == 0);
  }

  TEST_CASE("extraction: one context pass per sentence with candidates") {
    const World w;
    InferenceConfig cfg;
    cfg.threshold = -0.999;
    const ExtractResult r = Extract(w.model, w.index, w.data.documents, cfg);
    size_t sentences = 0;
    for (const Document& d : w.data.documents) {
      std::set<int> with;
      for (const Span& s : d.candidates) with.insert(s.sentence_idx);
      sentences += with.size();
    }
    CHECK(r.counter.context_encoder_calls == sentences);
    CHECK(r.counter.definition_encoder_calls == 0);
    CHECK(r.candidates == CountCandidates(w.data.documents));
    // every candidate clears -0.999: the best of four cosines is never that low here
    CHECK(r.predictions.size() == r.candidates);
    const auto json = CounterSummaryJson(r, w.data.ontology.size());
    CHECK(json.find("joint_pair_count") != std::string::npos);
  }

  TEST_CASE("extraction: score is the best cosine and the label its argmax") {
    const World w;
    InferenceConfig cfg;
    cfg.threshold = -0.999;
    const ExtractResult r = Extract(w.model, w.index, w.data.documents, cfg);
    for (const Document& d : w.data.documents) {
      for (const Span& c : d.candidates) {
        const auto scores = ScoreMention(w.model, w.index, d.sentences[c.sentence_idx], c.start, c.end);
        size_t best = 0;
        for (size_t i = 1; i < scores.size(); ++i) {
          if (scores[i].score > scores[best].score) best = i;
        }
        const MentionLabel* got = r.predictions.Find(SpanKey{d.doc_id, c.sentence_idx, c.start, c.end});
        REQUIRE(got != nullptr);
        CHECK(got->type_name == scores[best].type_name);
        CHECK(std::abs(got->score - scores[best].score) <= 1e-12);
      }
    }
  }

  TEST_CASE("threshold is strict and filtering equals re-extraction") {
    const World w;
    InferenceConfig low;
    low.threshold = -0.999;
    const PredictionSet all = Extract(w.model, w.index, w.data.documents, low).predictions;
    REQUIRE(!all.empty());
    const double s = all.records().begin()->second.score;
    const PredictionSet at = FilterByThreshold(all, s);
    CHECK(!at.Contains(all.records().begin()->first));
    for (const auto& [k, v] : at.records()) CHECK(v.score > s);
    for (double t : {-0.5, 0.0, 0.2, 0.4, 0.6}) {
      InferenceConfig cfg;
      cfg.threshold = t;
      CHECK(FilterByThreshold(all, t) == Extract(w.model, w.index, w.data.documents, cfg).predictions);
    }
  }

  TEST_CASE("extraction is independent of thread count and batch size") {
    const World w;
    InferenceConfig one;
    one.threshold = 0.0;
    const PredictionSet base = Extract(w.model, w.index, w.data.documents, one).predictions;
    for (size_t threads : {2, 4}) {
      for (size_t batch : {1, 3, 64}) {
        InferenceConfig cfg = one;
        cfg.threads = threads;
        cfg.batch_size = batch;
        CHECK(Extract(w.model, w.index, w.data.documents, cfg).predictions == base);
      }
    }
    InferenceConfig bad;
    bad.threads = 0;
    CHECK(ErrorOf([&] { bad.Validate(); }) == ErrorKind::kArgument);
  }

  TEST_CASE("joint baseline simulation") {
    const JointCostModel unit;
    const JointSimulation tiny = SimulateJointBaseline(unit, 1, 1);
    CHECK(tiny.joint_pairs == 1);
    CHECK(tiny.disjoint_calls == 2);
    CHECK(tiny.invocation_ratio == 0.5);
    const JointSimulation big = SimulateJointBaseline(unit, 1000, 168);
    CHECK(big.joint_pairs == 168000);
    CHECK(big.disjoint_calls == 1168);
    CHECK(big.invocation_ratio == 168000.0 / 1168.0);
    CHECK(big.joint_seconds == 168000.0);
    double prev = 0.0;
    for (uint64_t t = 1; t <= 200; t += 7) {
      const double ratio = SimulateJointBaseline(unit, 1000, t).invocation_ratio;
      CHECK(ratio > prev);
      prev = ratio;
    }
    CHECK(ErrorOf([&] { SimulateJointBaseline(unit, 0, 5); }) == ErrorKind::kArgument);
    CHECK(ErrorOf([&] { SimulateJointBaseline(unit, 5, 0); }) == ErrorKind::kArgument);
  }
}

}  // namespace
}  // namespace defex
