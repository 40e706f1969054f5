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

#include "defex/eval.h"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <map>
#include <sstream>

#include "defex/error.h"
#include "defex/rng.h"

namespace defex {
namespace {

double SafeDiv(double num, double den) { return den > 0.0 ? num / den : 0.0; }

std::vector<SpanKey> CandidateKeys(const std::vector<Document>& documents) {
  std::vector<SpanKey> keys;
  for (const Document& doc : documents) {
    for (const Span& c : doc.candidates) {
      keys.push_back(SpanKey{doc.doc_id, c.sentence_idx, c.start, c.end});
    }
  }
  return keys;
}

// Selection shared by both naive baselines; the label callback receives the
// type rng.
template <typename Label>
PredictionSet SelectAtGoldRate(const GoldMentionSet& gold,
                               const std::vector<Document>& documents, uint64_t seed,
                               Label label) {
  const std::vector<SpanKey> keys = CandidateKeys(documents);
  PredictionSet out;
  if (keys.empty() || gold.empty()) return out;
  const double rate =
      std::min(1.0, static_cast<double>(gold.size()) / static_cast<double>(keys.size()));
  Rng select = Rng::Derive(seed, 201);
  Rng types = Rng::Derive(seed, 202);
  for (const SpanKey& key : keys) {
    if (rate >= 1.0 || select.Bernoulli(rate)) out.Insert(key, label(types));
  }
  return out;
}

std::string Fixed(double v, int digits = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string Signed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%+.4f", v);
  return buf;
}

EvalPair MedianPair(const std::vector<EvalPair>& runs) {
  // the run whose classification F1 is the median supplies P and R
  std::vector<size_t> order(runs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto pick = [&](auto field) {
    std::vector<size_t> o = order;
    std::sort(o.begin(), o.end(),
              [&](size_t a, size_t b) { return field(runs[a]).f1 < field(runs[b]).f1; });
    EvalReport r = field(runs[o[o.size() / 2]]);
    std::vector<double> f1s;
    for (const EvalPair& p : runs) f1s.push_back(field(p).f1);
    r.f1 = Median(f1s);
    return r;
  };
  EvalPair out;
  out.identification = pick([](const EvalPair& p) { return p.identification; });
  out.classification = pick([](const EvalPair& p) { return p.classification; });
  return out;
}

}  // namespace

std::string_view EvalModeName(EvalMode mode) {
  return mode == EvalMode::kIdentification ? "identification"
                                           : "identification+classification";
}

EvalReport MicroPrf(const PredictionSet& preds, const GoldMentionSet& gold, EvalMode mode,
                    const EventOntology& ontology) {
  preds.ValidateAgainst(ontology);
  gold.ValidateAgainst(ontology);
  EvalReport r;
  r.mode = mode;
  for (const auto& [key, label] : preds.records()) {
    const MentionLabel* g = gold.Find(key);
    const bool hit =
        g && (mode == EvalMode::kIdentification || g->type_name == label.type_name);
    if (hit) ++r.tp;
  }
  r.fp = preds.size() - r.tp;
  r.fn = gold.size() - r.tp;
  r.precision = SafeDiv(static_cast<double>(r.tp), static_cast<double>(r.tp + r.fp));
  r.recall = SafeDiv(static_cast<double>(r.tp), static_cast<double>(r.tp + r.fn));
  r.f1 = SafeDiv(2.0 * r.precision * r.recall, r.precision + r.recall);
  return r;
}

EvalPair EvaluateBothModes(const PredictionSet& preds, const GoldMentionSet& gold,
                           const EventOntology& ontology) {
  return EvalPair{MicroPrf(preds, gold, EvalMode::kIdentification, ontology),
                  MicroPrf(preds, gold, EvalMode::kClassification, ontology)};
}

std::string FormatEvalTable(const EvalPair& reports) {
  std::ostringstream out;
  out << "mode                            P       R       F1      tp    fp    fn\n";
  for (const EvalReport* r : {&reports.identification, &reports.classification}) {
    char line[160];
    std::snprintf(line, sizeof line, "%-30s  %.4f  %.4f  %.4f  %-5zu %-5zu %zu\n",
                  std::string(EvalModeName(r->mode)).c_str(), r->precision, r->recall,
                  r->f1, r->tp, r->fp, r->fn);
    out << line;
  }
  return out.str();
}

PredictionSet ChanceBaseline(const GoldMentionSet& gold, const std::vector<Document>& documents,
                             const EventOntology& ontology, uint64_t seed) {
  if (ontology.empty()) Fail(ErrorKind::kArgument, "empty ontology");
  return SelectAtGoldRate(gold, documents, seed, [&](Rng& rng) {
    return MentionLabel{ontology[rng.UniformIndex(ontology.size())].type_name, 1.0};
  });
}

PredictionSet MostPopularBaseline(const GoldMentionSet& gold,
                                  const std::vector<Document>& documents,
                                  const EventOntology& ontology, uint64_t seed) {
  gold.ValidateAgainst(ontology);
  std::vector<size_t> counts(ontology.size(), 0);
  for (const auto& [key, label] : gold.records()) ++counts[*ontology.index_of(label.type_name)];
  size_t best = 0;
  for (size_t t = 1; t < counts.size(); ++t) {
    if (counts[t] > counts[best]) best = t;
  }
  return SelectAtGoldRate(gold, documents, seed, [&](Rng&) {
    return MentionLabel{ontology[best].type_name, 1.0};
  });
}

DualEncoderModel PretrainForSeed(const PipelineData& data, const PipelineConfig& config,
                                 uint64_t seed) {
  std::vector<Tokens> extra;
  for (const EventType& t : data.ontology.types()) extra.push_back(t.definition);
  DualEncoderModel model = InitializeModel(config.encoder, data.corpus, extra, seed);
  TrainConfig train = config.pretrain;
  train.seed = seed;
  return Pretrain(std::move(model), data.corpus, train).model;
}

DualEncoderModel WarmForSeed(const DualEncoderModel& pretrained, const PipelineData& data,
                             const PipelineConfig& config, bool strong_negatives,
                             uint64_t seed) {
  const WarmingSubset subset =
      BuildWarmingSubset(pretrained, data.ontology, data.corpus, config.retrieval);
  TrainConfig warm = config.warm;
  warm.seed = Rng::Mix(seed ^ 0x77a3ULL);
  if (!strong_negatives) warm.strong_negative_ratio = 0.0;
  return Warm(pretrained, subset, data.corpus.definitions, warm).model;
}

EvalPair EvaluateModel(const DualEncoderModel& model, const PipelineData& data,
                       const InferenceConfig& config) {
  const DefinitionIndex index = BuildDefinitionIndex(model, data.ontology);
  const ExtractResult result = Extract(model, index, data.documents, config);
  return EvaluateBothModes(result.predictions, data.gold, data.ontology);
}

std::string AblationSpec::Name() const {
  if (warming && strong_negatives) return "full";
  if (!warming && !strong_negatives) return "- warming - strong negatives";
  return warming ? "- strong negatives" : "- warming";
}

double Median(std::vector<double> values) {
  if (values.empty()) Fail(ErrorKind::kArgument, "median of no values");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

AblationTable RunAblation(const std::vector<AblationSpec>& specs, const PipelineData& data,
                          const PipelineConfig& config, const std::vector<uint64_t>& seeds) {
  if (seeds.empty()) Fail(ErrorKind::kArgument, "ablation needs at least one seed");
  std::vector<AblationSpec> all{AblationSpec{true, true}};
  for (const AblationSpec& s : specs) {
    if (!(s.warming && s.strong_negatives)) all.push_back(s);
  }
  AblationTable table;
  table.seeds = seeds;
  table.rows.resize(all.size());
  for (size_t i = 0; i < all.size(); ++i) table.rows[i].spec = all[i];

  for (uint64_t seed : seeds) {
    const DualEncoderModel pretrained = PretrainForSeed(data, config, seed);
    std::map<bool, DualEncoderModel> warmed;  // keyed by strong_negatives
    for (AblationRow& row : table.rows) {
      if (!row.spec.warming) {
        row.per_seed.push_back(EvaluateModel(pretrained, data, config.inference));
        continue;
      }
      auto it = warmed.find(row.spec.strong_negatives);
      if (it == warmed.end()) {
        it = warmed
                 .emplace(row.spec.strong_negatives,
                          WarmForSeed(pretrained, data, config, row.spec.strong_negatives,
                                      seed))
                 .first;
      }
      row.per_seed.push_back(EvaluateModel(it->second, data, config.inference));
    }
  }
  for (AblationRow& row : table.rows) row.median = MedianPair(row.per_seed);
  const EvalPair& base = table.rows.front().median;
  for (AblationRow& row : table.rows) {
    row.delta_identification = row.median.identification.f1 - base.identification.f1;
    row.delta_classification = row.median.classification.f1 - base.classification.f1;
  }
  return table;
}

std::string FormatAblationTable(const AblationTable& table) {
  std::ostringstream out;
  out << "model                          ident F1  (delta)    ident+cls F1  (delta)\n";
  for (const AblationRow& row : table.rows) {
    char line[200];
    std::snprintf(line, sizeof line, "%-30s %.4f    (%s)  %.4f        (%s)\n",
                  row.spec.Name().c_str(), row.median.identification.f1,
                  Signed(row.delta_identification).c_str(), row.median.classification.f1,
                  Signed(row.delta_classification).c_str());
    out << line;
  }
  out << "median over " << table.seeds.size() << " seeds\n";
  return out.str();
}

std::vector<SweepPoint> RunDataScaleSweep(const PipelineData& data,
                                          const PipelineConfig& config,
                                          const std::vector<size_t>& ks,
                                          const std::vector<uint64_t>& seeds) {
  if (seeds.empty()) Fail(ErrorKind::kArgument, "sweep needs at least one seed");
  std::vector<SweepPoint> points;
  for (size_t k : ks) {
    std::vector<double> ident, cls;
    for (uint64_t seed : seeds) {
      PipelineData sub = data;
      sub.corpus = SubsamplePerDefinition(data.corpus, k, Rng::Mix(seed + k));
      const EvalPair r =
          EvaluateModel(PretrainForSeed(sub, config, seed), sub, config.inference);
      ident.push_back(r.identification.f1);
      cls.push_back(r.classification.f1);
    }
    points.push_back(SweepPoint{k, Median(ident), Median(cls)});
  }
  return points;
}

std::string FormatSweepSeries(const std::vector<SweepPoint>& points) {
  std::ostringstream out;
  out << "# k\tf1\n";
  for (const SweepPoint& p : points) out << p.k << '\t' << Fixed(p.f1_classification) << '\n';
  return out.str();
}

double JointPairScore(const DualEncoderModel& model, const Tokens& sentence, int start,
                      int end, const Tokens& definition) {
  Tokens joined = sentence;
  joined.insert(joined.end(), definition.begin(), definition.end());
  const TokenVectors tokens = EncodeTokens(model, EncoderSide::kContext, joined);
  const Vector mention = PoolMention(tokens, start, end).values;
  const int first_def = tokens.word_spans[sentence.size()].first;
  const Vector def =
      tokens.vectors.bottomRows(tokens.vectors.rows() - first_def).colwise().mean().transpose();
  return Cosine(mention, def);
}

SpeedReport SpeedBenchmark(const DualEncoderModel& model, const EventOntology& ontology,
                           const std::vector<Document>& documents, size_t repetitions) {
  if (repetitions < 3) Fail(ErrorKind::kArgument, "speed benchmark needs >= 3 repetitions");
  using Clock = std::chrono::steady_clock;
  SpeedReport report;
  report.mentions = CountCandidates(documents);
  report.types = ontology.size();
  report.repetitions = repetitions;

  uint64_t disjoint_calls = 0;
  double sink = 0.0;
  auto disjoint = [&] {
    CallCounter counter;
    const DefinitionIndex index = BuildDefinitionIndex(model, ontology, &counter);
    // batch size 1: one context pass per mention, no sharing within a sentence
    for (const Document& doc : documents) {
      for (const Span& c : doc.candidates) {
        const TokenVectors tokens =
            EncodeTokens(model, EncoderSide::kContext, doc.sentences[c.sentence_idx]);
        ++counter.context_encoder_calls;
        const std::vector<double> scores =
            ScoreVector(PoolMention(tokens, c.start, c.end).values, index);
        sink += *std::max_element(scores.begin(), scores.end());
      }
    }
    disjoint_calls = counter.context_encoder_calls + counter.definition_encoder_calls;
  };
  uint64_t joint_calls = 0;
  auto joint = [&] {
    joint_calls = 0;
    for (const Document& doc : documents) {
      for (const Span& c : doc.candidates) {
        for (const EventType& t : ontology.types()) {
          sink += JointPairScore(model, doc.sentences[c.sentence_idx], c.start, c.end,
                                 t.definition);
          ++joint_calls;
        }
      }
    }
  };
  auto time = [](auto& fn) {
    const auto t0 = Clock::now();
    fn();
    return std::chrono::duration<double>(Clock::now() - t0).count();
  };
  disjoint();
  joint();
  for (size_t i = 0; i < repetitions; ++i) {
    report.disjoint_seconds.push_back(time(disjoint));
    report.joint_seconds.push_back(time(joint));
  }
  (void)sink;
  report.disjoint_calls = disjoint_calls;
  report.joint_calls = joint_calls;
  report.disjoint_median = Median(report.disjoint_seconds);
  report.joint_median = Median(report.joint_seconds);
  return report;
}

}  // namespace defex
