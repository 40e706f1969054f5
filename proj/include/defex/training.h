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

// Contrastive training of the dual encoder with the margin ranking loss
//
//   loss(a, d+, D') = 1/|D'| * sum_{d- in D'} max(0, margin - (cos(a, d+) - cos(a, d-)))
//
// where a is the pooled mention vector, d+ the aligned definition vector and
// D' a set of sampled negative definitions.

#ifndef DEFEX_TRAINING_H_
#define DEFEX_TRAINING_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "defex/autograd.h"
#include "defex/corpus.h"
#include "defex/encoder.h"
#include "defex/rng.h"

namespace defex {

struct TrainConfig {
  double margin = 0.2;
  size_t n_negatives = 2;
  size_t epochs = 10;
  size_t batch_size = 16;
  double learning_rate = 1e-3;
  uint64_t seed = 0;
  // Probability that an instance draws its negatives from the strong pool.
  double strong_negative_ratio = 0.0;

  // Throws kArgument.
  void Validate() const;
};

// Defaults for the query-specific warming phase: as TrainConfig but with
// mixed strong/random negatives.
TrainConfig WarmDefaults();

struct TrainReport {
  std::vector<double> epoch_loss;     // mean per-instance loss
  std::vector<double> epoch_seconds;  // wall time
  std::string checkpoint_path;        // filled by callers that persist
};

struct TrainResult {
  DualEncoderModel model;
  TrainReport report;
};

// n distinct ids drawn uniformly without replacement from pool, never
// positive_id. pool must be free of duplicates. Throws kConfiguration when
// fewer than n candidates remain.
std::vector<std::string> SampleNegatives(std::span<const std::string> pool,
                                         const std::string& positive_id,
                                         size_t n, Rng& rng);

// Per instance, with probability strong_ratio all negatives come from the
// strong pool, otherwise from the random pool. An instance whose strong pool
// (minus its positive) holds fewer than n ids falls back to the random pool.
class NegativeSampler {
 public:
  NegativeSampler(std::vector<std::string> random_pool,
                  std::vector<std::string> strong_pool, double strong_ratio,
                  size_t n);

  std::vector<std::string> Sample(const std::string& positive_id,
                                  Rng& coin_rng, Rng& draw_rng) const;

  const std::vector<std::string>& random_pool() const { return random_pool_; }
  const std::vector<std::string>& strong_pool() const { return strong_pool_; }

 private:
  size_t StrongCandidates(const std::string& positive_id) const;

  std::vector<std::string> random_pool_;
  std::vector<std::string> strong_pool_;
  double strong_ratio_;
  size_t n_;
};

// Value of the loss for fixed vectors. Throws kArgument on an empty
// negative list and kDegenerate on zero vectors.
double RankingLoss(const Vector& anchor, const Vector& positive,
                   std::span<const Vector> negatives, double margin);

// Differentiable form over 1 x d rows.
ad::Var RankingLossVar(ad::Var anchor, ad::Var positive,
                       std::span<const ad::Var> negatives, double margin);

// One training example with its negatives already drawn.
struct TrainingExample {
  Tokens sentence;
  int start = 0;
  int end = 0;
  std::string positive_id;
  Tokens positive;
  std::vector<std::string> negative_ids;
  std::vector<Tokens> negatives;
};

struct BatchGradient {
  double loss = 0.0;                 // scale * mean per-example loss
  std::vector<double> example_loss;  // unscaled
  std::vector<ad::Matrix> grads;     // aligned with model.Parameters()
};

// Loss of a batch (mean of per-example losses times scale) and its
// gradient with respect to every model parameter. Definitions shared inside
// the batch are encoded once.
BatchGradient ComputeBatchGradient(const DualEncoderModel& model,
                                   std::span<const TrainingExample> batch,
                                   double margin, double scale = 1.0);

// Forward-only batch loss.
double BatchLoss(const DualEncoderModel& model,
                 std::span<const TrainingExample> batch, double margin);

// Smallest |margin - gap| over every (example, negative) pair; a batch is
// kink-free when this is at least 1e-3.
double DistanceToHingeKink(const DualEncoderModel& model,
                           std::span<const TrainingExample> batch, double margin);

struct GradientCheckReport {
  double max_relative_error = 0.0;
  size_t coordinates = 0;
  double kink_distance = 0.0;
};

// Compares analytic gradients against central finite differences on
// `coordinates` parameter entries chosen uniformly at random.
// relative error = |analytic - numeric| / max(|analytic| + |numeric|, floor)
// Central differences at step 1e-6 carry ~1e-11 of rounding noise, which
// would dominate coordinates whose exact gradient is zero (key biases, for
// one); the floor turns those into an absolute check.
GradientCheckReport CheckGradients(const DualEncoderModel& model,
                                   std::span<const TrainingExample> batch,
                                   double margin, size_t coordinates = 256,
                                   uint64_t seed = 0, double step = 1e-6,
                                   double floor = 1e-5);

// First-order optimizer with adaptive moment estimates.
class AdamOptimizer {
 public:
  explicit AdamOptimizer(double learning_rate, double beta1 = 0.9,
                         double beta2 = 0.999, double epsilon = 1e-8);

  void Step(std::span<ad::Parameter* const> params,
            std::span<const ad::Matrix> grads);

 private:
  double lr_, beta1_, beta2_, epsilon_;
  long step_ = 0;
  std::vector<ad::Matrix> m_, v_;
};

// Shared loop behind pretraining and warming. Shuffles instances every
// epoch, draws fresh negatives per (instance, epoch) and applies one
// optimizer step per mini-batch. Throws kConfiguration for an empty
// instance list and kNumerical (naming the batch) on a non-finite loss.
TrainResult RunContrastiveTraining(DualEncoderModel model,
                                   const std::vector<AlignmentInstance>& instances,
                                   const std::map<std::string, Tokens>& definitions,
                                   const NegativeSampler& sampler,
                                   const TrainConfig& config);

// Offline pretraining on the full alignment corpus with random negatives
// drawn from the whole definition inventory. Returns the last checkpoint.
TrainResult Pretrain(DualEncoderModel model, const AlignmentCorpus& corpus,
                     const TrainConfig& config);

// Tokenizer learned from every sentence and definition of the corpus plus
// any extra texts, then a freshly initialized model.
DualEncoderModel InitializeModel(const EncoderConfig& config,
                                 const AlignmentCorpus& corpus,
                                 const std::vector<Tokens>& extra_texts,
                                 uint64_t seed);

}  // namespace defex

#endif  // DEFEX_TRAINING_H_
