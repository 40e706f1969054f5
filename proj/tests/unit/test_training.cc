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

#include <algorithm>
#include <cmath>
#include <set>

#include "defex/training.h"
#include "fixtures.h"

namespace defex {
namespace {

using testing::ErrorOf;
using testing::Vec;

// Vectors whose cosine with the anchor [1, 0] is exactly c.
Vector AtCos(double c) { return Vec({c, std::sqrt(1.0 - c * c)}); }

std::vector<TrainingExample> Examples(const SyntheticData& data, size_t count, uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> ids;
  for (const auto& [id, def] : data.corpus.definitions) ids.push_back(id);
  std::vector<TrainingExample> out;
  for (size_t i = 0; i < count; ++i) {
    const auto& inst = data.corpus.instances[rng.UniformIndex(data.corpus.instances.size())];
    TrainingExample ex{inst.sentence, inst.start, inst.end, inst.definition_id, inst.definition,
                       SampleNegatives(ids, inst.definition_id, 2, rng), {}};
    for (const auto& id : ex.negative_ids) ex.negatives.push_back(data.corpus.definitions.at(id));
    out.push_back(std::move(ex));
  }
  return out;
}

TEST_SUITE("training") {
  TEST_CASE("negatives: forced outcome, exclusion, determinism") {
    Rng rng(1);
    const std::vector<std::string> three{"a", "b", "c"};
    auto got = SampleNegatives(three, "b", 2, rng);
    std::sort(got.begin(), got.end());
    CHECK(got == std::vector<std::string>{"a", "c"});

    std::vector<std::string> many;
    for (int i = 0; i < 1000; ++i) many.push_back("d" + std::to_string(i));
    Rng r2(2);
    for (int t = 0; t < 10000; ++t) {
      const auto s = SampleNegatives(many, "d17", 2, r2);
      REQUIRE(s.size() == 2);
      CHECK(s[0] != s[1]);
      CHECK(std::find(s.begin(), s.end(), "d17") == s.end());
    }
    Rng x(9), y(9);
    for (int t = 0; t < 50; ++t) CHECK(SampleNegatives(many, "d0", 2, x) == SampleNegatives(many, "d0", 2, y));
    CHECK(ErrorOf([&] { SampleNegatives(three, "a", 3, rng); }) == ErrorKind::kConfiguration);
  }

  TEST_CASE("loss: hand-evaluated cases") {
    const Vector a = Vec({1, 0});
    std::vector<Vector> neg{AtCos(-1.0)};
    CHECK(RankingLoss(a, AtCos(1.0), neg, 0.2) == 0.0);
    neg = {AtCos(0.6)};
    CHECK(std::abs(RankingLoss(a, AtCos(0.5), neg, 0.2) - 0.3) <= 1e-12);
    // gaps 0.05 and 0.30
    neg = {AtCos(0.45), AtCos(0.2)};
    CHECK(std::abs(RankingLoss(a, AtCos(0.5), neg, 0.2) - 0.075) <= 1e-12);
    CHECK(ErrorOf([&] { RankingLoss(a, a, {}, 0.2); }) == ErrorKind::kArgument);
  }

  TEST_CASE("loss properties on random vectors") {
    Rng rng(3);
    for (int trial = 0; trial < 300; ++trial) {
      const size_t d = 3 + rng.UniformIndex(6);
      const Vector a = testing::RandomVector(rng, d), p = testing::RandomVector(rng, d);
      std::vector<Vector> negs;
      for (int k = 0; k < 3; ++k) negs.push_back(testing::RandomVector(rng, d));
      const double eps = 0.2;
      const double loss = RankingLoss(a, p, negs, eps);
      CHECK(loss >= 0.0);
      bool all_satisfied = true;
      for (const auto& n : negs) all_satisfied &= Cosine(a, p) - Cosine(a, n) >= eps;
      CHECK((loss == 0.0) == all_satisfied);

      std::vector<Vector> perm{negs[2], negs[0], negs[1]};
      CHECK(std::abs(RankingLoss(a, p, perm, eps) - loss) <= 1e-15);

      // moving p toward a cannot raise the loss; moving a negative toward a cannot lower it
      const Vector p_closer = p + 0.5 * (a / a.norm()) * p.norm();
      CHECK(RankingLoss(a, p_closer, negs, eps) <= loss + 1e-15);
      std::vector<Vector> n_closer = negs;
      n_closer[0] = negs[0] + 0.5 * (a / a.norm()) * negs[0].norm();
      if (Cosine(a, n_closer[0]) >= Cosine(a, negs[0])) {
        CHECK(RankingLoss(a, p, n_closer, eps) >= loss - 1e-15);
      }
    }
  }

  TEST_CASE("the differentiable loss equals the plain loss") {
    Rng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      const Vector a = testing::RandomVector(rng, 5), p = testing::RandomVector(rng, 5);
      std::vector<Vector> negs{testing::RandomVector(rng, 5), testing::RandomVector(rng, 5)};
      ad::Tape tape(false);
      auto row = [&](const Vector& v) { return tape.Constant(ad::Matrix(v.transpose())); };
      std::vector<ad::Var> nv{row(negs[0]), row(negs[1])};
      CHECK(std::abs(RankingLossVar(row(a), row(p), nv, 0.2).scalar() -
                     RankingLoss(a, p, negs, 0.2)) <= 1e-14);
    }
  }

  TEST_CASE("gradient check away from hinge kinks") {
    const SyntheticData data = GenerateSyntheticCorpus(testing::TinySpec(), 3);
    const DualEncoderModel model = testing::TinyModel(data, 3);
    int checked = 0;
    for (uint64_t seed = 0; seed < 10 && checked < 2; ++seed) {
      const auto batch = Examples(data, 3, seed);
      if (DistanceToHingeKink(model, batch, 0.2) < 1e-3) continue;
      const GradientCheckReport r = CheckGradients(model, batch, 0.2, 200, seed);
      CHECK(r.coordinates == 200);
      CHECK(r.max_relative_error < 1e-4);
      ++checked;
    }
    CHECK(checked == 2);
  }

  TEST_CASE("an inactive hinge gives exactly zero gradient") {
    const SyntheticData data = GenerateSyntheticCorpus(testing::TinySpec(), 3);
    const DualEncoderModel model = testing::TinyModel(data, 3);
    // a margin of -3 is satisfied by every pair since cosine gaps are >= -2
    const BatchGradient g = ComputeBatchGradient(model, Examples(data, 4, 1), -3.0);
    CHECK(g.loss == 0.0);
    for (const auto& m : g.grads) CHECK(m.isZero(0));
  }

  TEST_CASE("scaling the loss scales the gradient") {
    const SyntheticData data = GenerateSyntheticCorpus(testing::TinySpec(), 3);
    const DualEncoderModel model = testing::TinyModel(data, 3);
    const auto batch = Examples(data, 4, 2);
    const BatchGradient g1 = ComputeBatchGradient(model, batch, 0.2, 1.0);
    const BatchGradient g2 = ComputeBatchGradient(model, batch, 0.2, 2.0);
    CHECK(g2.loss == 2.0 * g1.loss);
    double worst = 0.0;
    for (size_t i = 0; i < g1.grads.size(); ++i) {
      worst = std::max(worst, (g2.grads[i] - 2.0 * g1.grads[i]).cwiseAbs().maxCoeff());
    }
    CHECK(worst <= 1e-15);
    CHECK(std::abs(BatchLoss(model, batch, 0.2) - g1.loss) <= 1e-14);
  }

  TEST_CASE("one optimizer step lowers an active single-instance loss") {
    const SyntheticData data = GenerateSyntheticCorpus(testing::TinySpec(), 3);
    const DualEncoderModel model = testing::TinyModel(data, 3);
    std::vector<TrainingExample> batch;
    for (uint64_t s = 0; batch.empty(); ++s) {
      auto one = Examples(data, 1, 100 + s);
      if (BatchLoss(model, one, 0.2) > 0 && DistanceToHingeKink(model, one, 0.2) > 1e-3) batch = one;
    }
    const double before = BatchLoss(model, batch, 0.2);
    bool decreased = false;
    for (double lr : {1e-2, 1e-3, 1e-4}) {
      DualEncoderModel m = model;
      const BatchGradient g = ComputeBatchGradient(m, batch, 0.2);
      AdamOptimizer opt(lr);
      const auto params = m.MutableParameters();
      opt.Step(params, g.grads);
      decreased |= BatchLoss(m, batch, 0.2) < before;
    }
    CHECK(decreased);
  }

  TEST_CASE("an empty corpus has nothing to train") {
    const SyntheticData data = GenerateSyntheticCorpus(testing::TinySpec(), 3);
    AlignmentCorpus empty;
    empty.definitions = data.corpus.definitions;
    CHECK(ErrorOf([&] { Pretrain(testing::TinyModel(data), empty, TrainConfig{}); }) ==
          ErrorKind::kConfiguration);
  }

  TEST_CASE("pretraining lowers the epoch loss and is reproducible") {
    const SyntheticData data = GenerateSyntheticCorpus(testing::TinySpec(), 3);
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.seed = 5;
    const TrainResult a = Pretrain(testing::TinyModel(data), data.corpus, cfg);
    REQUIRE(a.report.epoch_loss.size() == 6);
    CHECK(a.report.epoch_loss.back() < a.report.epoch_loss.front());
    CHECK(a.report.epoch_seconds.size() == 6);
    const TrainResult b = Pretrain(testing::TinyModel(data), data.corpus, cfg);
    CHECK(a.model.Fingerprint() == b.model.Fingerprint());
    CHECK(a.report.epoch_loss == b.report.epoch_loss);
    cfg.seed = 6;
    CHECK(Pretrain(testing::TinyModel(data), data.corpus, cfg).model.Fingerprint() !=
          a.model.Fingerprint());
  }

  TEST_CASE("config validation and warming defaults") {
    TrainConfig c;
    CHECK(c.margin == 0.2);
    CHECK(c.n_negatives == 2);
    CHECK(c.epochs == 10);
    CHECK(c.batch_size == 16);
    CHECK(c.strong_negative_ratio == 0.0);
    CHECK(WarmDefaults().strong_negative_ratio == 0.5);
    c.margin = 0.0;
    CHECK(ErrorOf([&] { c.Validate(); }) == ErrorKind::kArgument);
    c = TrainConfig{};
    c.strong_negative_ratio = 1.5;
    CHECK(ErrorOf([&] { c.Validate(); }) == ErrorKind::kArgument);
  }

  TEST_CASE("sampler: strong draws stay in the strong pool, small pools fall back") {
    std::vector<std::string> all, strong{"s0", "s1", "s2", "s3", "s4"};
    for (int i = 0; i < 30; ++i) all.push_back("r" + std::to_string(i));
    for (const auto& s : strong) all.push_back(s);
    const NegativeSampler always(all, strong, 1.0, 2);
    Rng coin(1), draw(2);
    for (int t = 0; t < 1000; ++t) {
      for (const auto& id : always.Sample("s0", coin, draw)) {
        CHECK(std::find(strong.begin(), strong.end(), id) != strong.end());
        CHECK(id != "s0");
      }
    }
    const NegativeSampler tiny(all, {"s0"}, 1.0, 2);
    std::set<std::string> seen;
    for (int t = 0; t < 200; ++t) {
      for (const auto& id : tiny.Sample("s0", coin, draw)) seen.insert(id);
    }
    CHECK(seen.size() > 5);
    CHECK(seen.count("s0") == 0);
  }
}

}  // namespace
}  // namespace defex
