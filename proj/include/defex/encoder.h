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

// Dual encoder: two independently parameterized token encoders (mention
// context, definition) plus a feed-forward head applied to definition
// tokens only.
//
//   mention vector    = mean of context-encoder outputs over the sub-tokens
//                       covered by the word span
//   definition vector = mean over all definition sub-tokens of
//                       head(definition-encoder output)
//
// Vectors are stored un-normalized; Cosine() normalizes at comparison time.

#ifndef DEFEX_ENCODER_H_
#define DEFEX_ENCODER_H_

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "defex/autograd.h"
#include "defex/corpus.h"
#include "defex/rng.h"
#include "defex/tokenizer.h"

namespace defex {

using Vector = Eigen::VectorXd;

struct EncoderConfig {
  size_t vocab_size = 0;  // taken from the tokenizer when 0
  size_t embedding_dim = 64;
  size_t n_layers = 2;
  size_t n_heads = 4;
  size_t feedforward_dim = 0;  // transformer block inner width; 0 means 2d
  size_t ffn_head_hidden = 0;  // definition head hidden width; 0 means d
  size_t max_sequence_length = 64;
  TokenizerKind tokenizer = TokenizerKind::kSubword;
  double embedding_init_std = 1.0;
  double position_scale = 1.0;  // multiplies the sinusoidal table

  size_t ResolvedFeedforwardDim() const {
    return feedforward_dim ? feedforward_dim : 2 * embedding_dim;
  }
  size_t ResolvedHeadHidden() const {
    return ffn_head_hidden ? ffn_head_hidden : embedding_dim;
  }
  // Throws kArgument.
  void Validate() const;

  bool operator==(const EncoderConfig&) const = default;
};

enum class EncoderSide { kContext, kDefinition };

// Pre-norm transformer over one token sequence with sinusoidal positions.
class TransformerEncoder {
 public:
  TransformerEncoder() = default;
  TransformerEncoder(const EncoderConfig& config, const std::string& prefix,
                     Rng& rng);

  // Per-token output vectors, one row per id.
  ad::Var Forward(ad::Tape& tape, std::span<const int> ids) const;

  std::vector<ad::Parameter*> MutableParameters();
  std::vector<const ad::Parameter*> Parameters() const;

 private:
  struct Block {
    ad::Parameter ln1_gain, ln1_bias;
    ad::Parameter qkv_weight, qkv_bias;
    ad::Parameter out_weight, out_bias;
    ad::Parameter ln2_gain, ln2_bias;
    ad::Parameter ff1_weight, ff1_bias;
    ad::Parameter ff2_weight, ff2_bias;
  };

  size_t dim_ = 0;
  size_t n_heads_ = 0;
  double position_scale_ = 1.0;
  ad::Parameter token_embedding_;
  std::vector<Block> blocks_;
  ad::Parameter final_gain_, final_bias_;
};

// Two affine layers with one GELU between them and no output nonlinearity.
// An identity head passes token vectors through unchanged.
class FeedForwardHead {
 public:
  FeedForwardHead() = default;
  FeedForwardHead(size_t dim, size_t hidden, Rng& rng);

  ad::Var Forward(ad::Var tokens) const;

  bool identity() const { return identity_; }
  void set_identity(bool identity) { identity_ = identity; }

  std::vector<ad::Parameter*> MutableParameters();
  std::vector<const ad::Parameter*> Parameters() const;

 private:
  bool identity_ = false;
  ad::Parameter w1_, b1_, w2_, b2_;
};

class DualEncoderModel {
 public:
  DualEncoderModel() = default;

  // Fresh parameters for a tokenizer learned elsewhere. config.vocab_size is
  // filled from the tokenizer.
  static DualEncoderModel Create(EncoderConfig config, Tokenizer tokenizer,
                                 uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  const Tokenizer& tokenizer() const { return tokenizer_; }
  const TransformerEncoder& encoder(EncoderSide side) const {
    return side == EncoderSide::kContext ? context_ : definition_;
  }
  const FeedForwardHead& head() const { return head_; }
  FeedForwardHead& mutable_head() { return head_; }

  // Context encoder, definition encoder, then head, in a fixed order.
  std::vector<ad::Parameter*> MutableParameters();
  std::vector<const ad::Parameter*> Parameters() const;
  std::vector<ad::Parameter*> MutableParameters(EncoderSide side);
  size_t ParameterCount() const;

  // Hash of config, tokenizer and every parameter value.
  uint64_t Fingerprint() const;

 private:
  friend DualEncoderModel LoadCheckpoint(const std::string& path);

  EncoderConfig config_;
  Tokenizer tokenizer_;
  TransformerEncoder context_;
  TransformerEncoder definition_;
  FeedForwardHead head_;
};

// Sub-token ids plus word spans; throws kTruncation when the sub-token
// sequence exceeds max_sequence_length and kArgument when empty.
Tokenizer::Encoded Tokenize(const DualEncoderModel& model, const Tokens& words);

struct TokenVectors {
  ad::Matrix vectors;  // one row per sub-token
  std::vector<std::pair<int, int>> word_spans;
};

// Eval-mode forward pass of one encoder over a word sequence.
TokenVectors EncodeTokens(const DualEncoderModel& model, EncoderSide side,
                          const Tokens& words);

struct MentionVector {
  Vector values;
  Span source;
};

struct DefinitionVector {
  Vector values;
  std::string source;
};

// Mean of the sub-token vectors covering words start..end (inclusive).
// Throws kArgument for an empty or out-of-range span.
MentionVector PoolMention(const TokenVectors& tokens, int start, int end);

// Mean over all definition sub-tokens of head(definition-encoder output).
DefinitionVector EncodeDefinition(const DualEncoderModel& model,
                                  const Tokens& definition);

// Throws kDegenerate if either vector has zero norm.
double Cosine(const Vector& u, const Vector& v);

// Differentiable counterparts used by training. Each returns a 1 x d row.
ad::Var MentionVar(ad::Tape& tape, const DualEncoderModel& model,
                   const Tokens& sentence, int start, int end);
ad::Var DefinitionVar(ad::Tape& tape, const DualEncoderModel& model,
                      const Tokens& definition);

// Binary checkpoint: magic, format version, JSON header (config, tokenizer,
// parameter shapes), then raw parameter values. Throws kIo / kInputNotFound
// on I/O failure and kValidation on a bad magic or version.
inline constexpr uint32_t kCheckpointVersion = 1;
void SaveCheckpoint(const DualEncoderModel& model, const std::string& path);
DualEncoderModel LoadCheckpoint(const std::string& path);

// 64-bit FNV-1a.
uint64_t Fnv1a(std::string_view bytes, uint64_t hash = 0xcbf29ce484222325ULL);
std::string HexDigest(uint64_t hash);

}  // namespace defex

#endif  // DEFEX_ENCODER_H_
