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

#include "defex/training.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <unordered_map>

#include "defex/error.h"

namespace defex {
namespace {

std::vector<std::string> SortedUnique(std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

// Encodes one batch on the given tape and returns the per-example losses.
std::vector<ad::Var> BatchLosses(ad::Tape& tape, const DualEncoderModel& model,
                                 std::span<const TrainingExample> batch,
                                 double margin) {
  std::unordered_map<std::string, ad::Var> definitions;
  auto definition = [&](const std::string& id, const Tokens& text) {
    auto it = definitions.find(id);
    if (it == definitions.end()) {
      it = definitions.emplace(id, DefinitionVar(tape, model, text)).first;
    }
    return it->second;
  };
  std::vector<ad::Var> losses;
  losses.reserve(batch.size());
  for (const TrainingExample& ex : batch) {
    if (ex.negatives.empty() || ex.negatives.size() != ex.negative_ids.size()) {
      Fail(ErrorKind::kArgument, "training example needs matching negative ids/texts");
    }
    ad::Var anchor = MentionVar(tape, model, ex.sentence, ex.start, ex.end);
    ad::Var positive = definition(ex.positive_id, ex.positive);
    std::vector<ad::Var> negatives;
    for (size_t n = 0; n < ex.negatives.size(); ++n) {
      negatives.push_back(definition(ex.negative_ids[n], ex.negatives[n]));
    }
    losses.push_back(RankingLossVar(anchor, positive, negatives, margin));
  }
  return losses;
}

}  // namespace

void TrainConfig::Validate() const {
  if (!(margin > 0.0)) Fail(ErrorKind::kArgument, "margin must be > 0");
  if (n_negatives < 1) Fail(ErrorKind::kArgument, "n_negatives must be >= 1");
  if (epochs < 1) Fail(ErrorKind::kArgument, "epochs must be >= 1");
  if (batch_size < 1) Fail(ErrorKind::kArgument, "batch_size must be >= 1");
  if (!(learning_rate > 0.0)) Fail(ErrorKind::kArgument, "learning_rate must be > 0");
  if (!(strong_negative_ratio >= 0.0 && strong_negative_ratio <= 1.0)) {
    Fail(ErrorKind::kArgument, "strong_negative_ratio must lie in [0, 1]");
  }
}

TrainConfig WarmDefaults() {
  TrainConfig config;
  config.strong_negative_ratio = 0.5;
  return config;
}

std::vector<std::string> SampleNegatives(std::span<const std::string> pool,
                                         const std::string& positive_id,
                                         size_t n, Rng& rng) {
  const size_t has_positive =
      std::find(pool.begin(), pool.end(), positive_id) != pool.end() ? 1 : 0;
  if (pool.size() - has_positive < n) {
    Fail(ErrorKind::kConfiguration,
         "need " + std::to_string(n) + " negatives but only " +
             std::to_string(pool.size() - has_positive) +
             " other definitions are available");
  }
  std::vector<std::string> out;
  out.reserve(n);
  std::set<size_t> taken;
  while (out.size() < n) {
    const size_t idx = rng.UniformIndex(pool.size());
    if (pool[idx] == positive_id || !taken.insert(idx).second) continue;
    out.push_back(pool[idx]);
  }
  return out;
}

NegativeSampler::NegativeSampler(std::vector<std::string> random_pool,
                                 std::vector<std::string> strong_pool,
                                 double strong_ratio, size_t n)
    : random_pool_(SortedUnique(std::move(random_pool))),
      strong_pool_(SortedUnique(std::move(strong_pool))),
      strong_ratio_(strong_ratio),
      n_(n) {}

size_t NegativeSampler::StrongCandidates(const std::string& positive_id) const {
  const bool has =
      std::binary_search(strong_pool_.begin(), strong_pool_.end(), positive_id);
  return strong_pool_.size() - (has ? 1 : 0);
}

std::vector<std::string> NegativeSampler::Sample(const std::string& positive_id,
                                                 Rng& coin_rng, Rng& draw_rng) const {
  bool strong = false;
  if (strong_ratio_ >= 1.0) {
    strong = true;
  } else if (strong_ratio_ > 0.0) {
    strong = coin_rng.Bernoulli(strong_ratio_);
  }
  if (strong && StrongCandidates(positive_id) >= n_) {
    return SampleNegatives(strong_pool_, positive_id, n_, draw_rng);
  }
  return SampleNegatives(random_pool_, positive_id, n_, draw_rng);
}

double RankingLoss(const Vector& anchor, const Vector& positive,
                   std::span<const Vector> negatives, double margin) {
  if (negatives.empty()) Fail(ErrorKind::kArgument, "ranking loss needs negatives");
  const double pos = Cosine(anchor, positive);
  double total = 0.0;
  for (const Vector& neg : negatives) {
    total += std::max(0.0, margin - (pos - Cosine(anchor, neg)));
  }
  return total / static_cast<double>(negatives.size());
}

ad::Var RankingLossVar(ad::Var anchor, ad::Var positive,
                       std::span<const ad::Var> negatives, double margin) {
  if (negatives.empty()) Fail(ErrorKind::kArgument, "ranking loss needs negatives");
  ad::Var pos = ad::Cosine(anchor, positive);
  std::vector<ad::Var> hinges;
  hinges.reserve(negatives.size());
  for (const ad::Var& neg : negatives) {
    // margin - (pos - neg) = (neg - pos) + margin
    hinges.push_back(
        ad::Relu(ad::AddScalar(ad::Sub(ad::Cosine(anchor, neg), pos), margin)));
  }
  return ad::Scale(ad::SumScalars(hinges), 1.0 / static_cast<double>(negatives.size()));
}

BatchGradient ComputeBatchGradient(const DualEncoderModel& model,
                                   std::span<const TrainingExample> batch,
                                   double margin, double scale) {
  if (batch.empty()) Fail(ErrorKind::kArgument, "empty batch");
  ad::Tape tape(/*record=*/true);
  std::vector<ad::Var> losses = BatchLosses(tape, model, batch, margin);
  ad::Var total =
      ad::Scale(ad::SumScalars(losses), scale / static_cast<double>(batch.size()));
  tape.Backward(total);

  BatchGradient out;
  out.loss = total.scalar();
  for (const ad::Var& l : losses) out.example_loss.push_back(l.scalar());
  for (const ad::Parameter* p : model.Parameters()) {
    const ad::Matrix* g = tape.Gradient(*p);
    out.grads.push_back(g ? *g : ad::Matrix::Zero(p->value.rows(), p->value.cols()));
  }
  return out;
}

double BatchLoss(const DualEncoderModel& model, std::span<const TrainingExample> batch,
                 double margin) {
  if (batch.empty()) Fail(ErrorKind::kArgument, "empty batch");
  ad::Tape tape(/*record=*/false);
  double total = 0.0;
  for (const ad::Var& l : BatchLosses(tape, model, batch, margin)) total += l.scalar();
  return total / static_cast<double>(batch.size());
}

double DistanceToHingeKink(const DualEncoderModel& model,
                           std::span<const TrainingExample> batch, double margin) {
  double nearest = std::numeric_limits<double>::infinity();
  for (const TrainingExample& ex : batch) {
    const TokenVectors tokens = EncodeTokens(model, EncoderSide::kContext, ex.sentence);
    const Vector anchor = PoolMention(tokens, ex.start, ex.end).values;
    const double pos = Cosine(anchor, EncodeDefinition(model, ex.positive).values);
    for (const Tokens& neg : ex.negatives) {
      const double gap = pos - Cosine(anchor, EncodeDefinition(model, neg).values);
      nearest = std::min(nearest, std::abs(margin - gap));
    }
  }
  return nearest;
}

GradientCheckReport CheckGradients(const DualEncoderModel& model,
                                   std::span<const TrainingExample> batch,
                                   double margin, size_t coordinates, uint64_t seed,
                                   double step, double floor) {
  GradientCheckReport report;
  report.kink_distance = DistanceToHingeKink(model, batch, margin);
  const BatchGradient analytic = ComputeBatchGradient(model, batch, margin);

  // Embedding rows outside the batch vocabulary have exactly zero gradient
  // on both sides; sample only rows the batch touches.
  std::set<int> used_ids;
  for (const TrainingExample& ex : batch) {
    for (const auto* text : {&ex.sentence, &ex.positive}) {
      for (int id : Tokenize(model, *text).ids) used_ids.insert(id);
    }
    for (const Tokens& neg : ex.negatives) {
      for (int id : Tokenize(model, neg).ids) used_ids.insert(id);
    }
  }
  const std::vector<int> rows(used_ids.begin(), used_ids.end());

  DualEncoderModel probe = model;
  std::vector<ad::Parameter*> params = probe.MutableParameters();
  Rng rng(seed);
  for (size_t c = 0; c < coordinates; ++c) {
    const size_t pi = c % params.size();
    ad::Parameter& p = *params[pi];
    Eigen::Index r, col;
    if (p.name.ends_with("embedding")) {
      r = rows[rng.UniformIndex(rows.size())];
    } else {
      r = static_cast<Eigen::Index>(rng.UniformIndex(static_cast<size_t>(p.value.rows())));
    }
    col = static_cast<Eigen::Index>(rng.UniformIndex(static_cast<size_t>(p.value.cols())));
    const double original = p.value(r, col);
    p.value(r, col) = original + step;
    const double up = BatchLoss(probe, batch, margin);
    p.value(r, col) = original - step;
    const double down = BatchLoss(probe, batch, margin);
    p.value(r, col) = original;
    const double numeric = (up - down) / (2.0 * step);
    const double exact = analytic.grads[pi](r, col);
    const double denom = std::max(std::abs(exact) + std::abs(numeric), floor);
    report.max_relative_error =
        std::max(report.max_relative_error, std::abs(exact - numeric) / denom);
    ++report.coordinates;
  }
  return report;
}

AdamOptimizer::AdamOptimizer(double learning_rate, double beta1, double beta2,
                             double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void AdamOptimizer::Step(std::span<ad::Parameter* const> params,
                         std::span<const ad::Matrix> grads) {
  if (params.size() != grads.size()) {
    Fail(ErrorKind::kInternal, "optimizer: parameter/gradient count mismatch");
  }
  if (m_.empty()) {
    for (const ad::Parameter* p : params) {
      m_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(ad::Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  ++step_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
    params[i]->value.array() -=
        lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + epsilon_);
  }
}

TrainResult RunContrastiveTraining(DualEncoderModel model,
                                   const std::vector<AlignmentInstance>& instances,
                                   const std::map<std::string, Tokens>& definitions,
                                   const NegativeSampler& sampler,
                                   const TrainConfig& config) {
  config.Validate();
  if (instances.empty()) Fail(ErrorKind::kConfiguration, "no training instances");

  Rng shuffle_rng = Rng::Derive(config.seed, 101);
  Rng coin_rng = Rng::Derive(config.seed, 102);
  Rng draw_rng = Rng::Derive(config.seed, 103);
  AdamOptimizer optimizer(config.learning_rate);
  std::vector<ad::Parameter*> params = model.MutableParameters();

  auto lookup = [&](const std::string& id) -> const Tokens& {
    auto it = definitions.find(id);
    if (it == definitions.end()) Fail(ErrorKind::kValidation, "unknown definition id " + id);
    return it->second;
  };

  std::vector<size_t> order(instances.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainReport report;
  for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    shuffle_rng.Shuffle(order);
    double epoch_total = 0.0;
    size_t batch_id = 0;
    for (size_t begin = 0; begin < order.size(); begin += config.batch_size, ++batch_id) {
      const size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<TrainingExample> batch;
      batch.reserve(end - begin);
      for (size_t k = begin; k < end; ++k) {
        const AlignmentInstance& inst = instances[order[k]];
        TrainingExample ex{inst.sentence, inst.start, inst.end, inst.definition_id,
                           inst.definition, {}, {}};
        ex.negative_ids = sampler.Sample(inst.definition_id, coin_rng, draw_rng);
        for (const auto& id : ex.negative_ids) ex.negatives.push_back(lookup(id));
        batch.push_back(std::move(ex));
      }
      BatchGradient g = ComputeBatchGradient(model, batch, config.margin);
      if (!std::isfinite(g.loss)) {
        Fail(ErrorKind::kNumerical, "non-finite loss at epoch " + std::to_string(epoch) +
                                        " batch " + std::to_string(batch_id));
      }
      for (const auto& grad : g.grads) {
        if (!grad.allFinite()) {
          Fail(ErrorKind::kNumerical, "non-finite gradient at epoch " +
                                          std::to_string(epoch) + " batch " +
                                          std::to_string(batch_id));
        }
      }
      optimizer.Step(params, g.grads);
      for (double l : g.example_loss) epoch_total += l;
    }
    report.epoch_loss.push_back(epoch_total / static_cast<double>(instances.size()));
    report.epoch_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
  }
  return TrainResult{std::move(model), std::move(report)};
}

TrainResult Pretrain(DualEncoderModel model, const AlignmentCorpus& corpus,
                     const TrainConfig& config) {
  config.Validate();
  if (corpus.instances.empty()) {
    Fail(ErrorKind::kConfiguration, "alignment corpus has no instances");
  }
  if (corpus.definitions.size() < 2) {
    Fail(ErrorKind::kConfiguration, "training needs at least 2 definitions");
  }
  corpus.Validate();
  std::vector<std::string> ids;
  for (const auto& [id, def] : corpus.definitions) ids.push_back(id);
  NegativeSampler sampler(std::move(ids), {}, 0.0, config.n_negatives);
  return RunContrastiveTraining(std::move(model), corpus.instances, corpus.definitions,
                                sampler, config);
}

DualEncoderModel InitializeModel(const EncoderConfig& config,
                                 const AlignmentCorpus& corpus,
                                 const std::vector<Tokens>& extra_texts,
                                 uint64_t seed) {
  std::vector<Tokens> texts;
  texts.reserve(corpus.instances.size() + corpus.definitions.size() + extra_texts.size());
  for (const auto& inst : corpus.instances) texts.push_back(inst.sentence);
  for (const auto& [id, def] : corpus.definitions) texts.push_back(def);
  texts.insert(texts.end(), extra_texts.begin(), extra_texts.end());
  return DualEncoderModel::Create(config, Tokenizer::Learn(config.tokenizer, texts), seed);
}

}  // namespace defex
