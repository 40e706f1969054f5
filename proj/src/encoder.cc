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

#include "defex/encoder.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "defex/error.h"
#include "defex/serialization.h"
#include "json.hpp"

namespace defex {
namespace {

using json = nlohmann::json;
using ad::Matrix;
using ad::Parameter;

constexpr char kMagic[8] = {'D', 'E', 'F', 'X', 'C', 'K', 'P', 'T'};

Parameter Gaussian(const std::string& name, size_t rows, size_t cols,
                   double stddev, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.Normal(0.0, stddev);
  return Parameter{name, std::move(m)};
}

Parameter Filled(const std::string& name, size_t rows, size_t cols, double v) {
  return Parameter{name, Matrix::Constant(rows, cols, v)};
}

Matrix SinusoidalPositions(Eigen::Index length, Eigen::Index dim) {
  Matrix pe(length, dim);
  for (Eigen::Index pos = 0; pos < length; ++pos) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double rate =
          std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      pe(pos, i) = (i % 2 == 0) ? std::sin(pos * rate) : std::cos(pos * rate);
    }
  }
  return pe;
}

ad::Var Affine(ad::Tape& tape, ad::Var x, const Parameter& w, const Parameter& b) {
  return ad::AddRow(ad::MatMul(x, tape.Param(w)), tape.Param(b));
}

// Header JSON followed by raw parameter values.
std::string Serialize(const DualEncoderModel& model) {
  json params = json::array();
  for (const Parameter* p : model.Parameters()) {
    params.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  }
  json header{{"format", "defex-checkpoint"},
              {"version", kCheckpointVersion},
              {"config", ToJson(model.config())},
              {"tokenizer",
               {{"kind", std::string(TokenizerKindName(model.tokenizer().kind()))},
                {"pieces", model.tokenizer().pieces()}}},
              {"head", {{"identity", model.head().identity()}}},
              {"parameters", params}};
  const std::string header_text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  const uint32_t version = kCheckpointVersion;
  const uint64_t header_size = header_text.size();
  out.append(reinterpret_cast<const char*>(&version), sizeof(version));
  out.append(reinterpret_cast<const char*>(&header_size), sizeof(header_size));
  out += header_text;
  for (const Parameter* p : model.Parameters()) {
    out.append(reinterpret_cast<const char*>(p->value.data()),
               sizeof(double) * static_cast<size_t>(p->value.size()));
  }
  return out;
}

}  // namespace

void EncoderConfig::Validate() const {
  if (embedding_dim == 0 || n_layers == 0 || n_heads == 0 ||
      max_sequence_length == 0) {
    Fail(ErrorKind::kArgument, "encoder dimensions must be positive");
  }
  if (embedding_dim % n_heads != 0) {
    Fail(ErrorKind::kArgument, "embedding_dim must be divisible by n_heads");
  }
  if (!(embedding_init_std > 0.0) || !(position_scale >= 0.0)) {
    Fail(ErrorKind::kArgument, "embedding_init_std must be > 0 and position_scale >= 0");
  }
}

TransformerEncoder::TransformerEncoder(const EncoderConfig& config,
                                       const std::string& prefix, Rng& rng)
    : dim_(config.embedding_dim),
      n_heads_(config.n_heads),
      position_scale_(config.position_scale) {
  const size_t d = config.embedding_dim;
  const size_t f = config.ResolvedFeedforwardDim();
  const double in_scale = 1.0 / std::sqrt(static_cast<double>(d));
  const double ff_scale = 1.0 / std::sqrt(static_cast<double>(f));
  token_embedding_ = Gaussian(prefix + "embedding", config.vocab_size, d,
                              config.embedding_init_std, rng);
  for (size_t l = 0; l < config.n_layers; ++l) {
    const std::string p = prefix + "block" + std::to_string(l) + ".";
    Block b;
    b.ln1_gain = Filled(p + "ln1_gain", 1, d, 1.0);
    b.ln1_bias = Filled(p + "ln1_bias", 1, d, 0.0);
    b.qkv_weight = Gaussian(p + "qkv_weight", d, 3 * d, in_scale, rng);
    b.qkv_bias = Filled(p + "qkv_bias", 1, 3 * d, 0.0);
    b.out_weight = Gaussian(p + "out_weight", d, d, in_scale, rng);
    b.out_bias = Filled(p + "out_bias", 1, d, 0.0);
    b.ln2_gain = Filled(p + "ln2_gain", 1, d, 1.0);
    b.ln2_bias = Filled(p + "ln2_bias", 1, d, 0.0);
    b.ff1_weight = Gaussian(p + "ff1_weight", d, f, in_scale, rng);
    b.ff1_bias = Filled(p + "ff1_bias", 1, f, 0.0);
    b.ff2_weight = Gaussian(p + "ff2_weight", f, d, ff_scale, rng);
    b.ff2_bias = Filled(p + "ff2_bias", 1, d, 0.0);
    blocks_.push_back(std::move(b));
  }
  final_gain_ = Filled(prefix + "final_gain", 1, d, 1.0);
  final_bias_ = Filled(prefix + "final_bias", 1, d, 0.0);
}

ad::Var TransformerEncoder::Forward(ad::Tape& tape, std::span<const int> ids) const {
  const auto length = static_cast<Eigen::Index>(ids.size());
  const auto d = static_cast<Eigen::Index>(dim_);
  const auto head_dim = d / static_cast<Eigen::Index>(n_heads_);
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  ad::Var x = ad::Add(tape.Embed(token_embedding_, ids),
                      tape.Constant(position_scale_ * SinusoidalPositions(length, d)));
  for (const Block& b : blocks_) {
    ad::Var h = ad::LayerNorm(x, tape.Param(b.ln1_gain), tape.Param(b.ln1_bias));
    ad::Var qkv = Affine(tape, h, b.qkv_weight, b.qkv_bias);
    std::vector<ad::Var> heads;
    heads.reserve(n_heads_);
    for (Eigen::Index hd = 0; hd < static_cast<Eigen::Index>(n_heads_); ++hd) {
      ad::Var q = ad::SliceCols(qkv, hd * head_dim, head_dim);
      ad::Var k = ad::SliceCols(qkv, d + hd * head_dim, head_dim);
      ad::Var v = ad::SliceCols(qkv, 2 * d + hd * head_dim, head_dim);
      ad::Var weights = ad::SoftmaxRows(ad::Scale(ad::MatMulTransposed(q, k), attn_scale));
      heads.push_back(ad::MatMul(weights, v));
    }
    ad::Var attended = Affine(tape, ad::ConcatCols(heads), b.out_weight, b.out_bias);
    x = ad::Add(x, attended);
    ad::Var h2 = ad::LayerNorm(x, tape.Param(b.ln2_gain), tape.Param(b.ln2_bias));
    ad::Var ff = Affine(tape, ad::Gelu(Affine(tape, h2, b.ff1_weight, b.ff1_bias)),
                        b.ff2_weight, b.ff2_bias);
    x = ad::Add(x, ff);
  }
  return ad::LayerNorm(x, tape.Param(final_gain_), tape.Param(final_bias_));
}

std::vector<Parameter*> TransformerEncoder::MutableParameters() {
  std::vector<Parameter*> out{&token_embedding_};
  for (Block& b : blocks_) {
    for (Parameter* p : {&b.ln1_gain, &b.ln1_bias, &b.qkv_weight, &b.qkv_bias,
                         &b.out_weight, &b.out_bias, &b.ln2_gain, &b.ln2_bias,
                         &b.ff1_weight, &b.ff1_bias, &b.ff2_weight, &b.ff2_bias}) {
      out.push_back(p);
    }
  }
  out.push_back(&final_gain_);
  out.push_back(&final_bias_);
  return out;
}

std::vector<const Parameter*> TransformerEncoder::Parameters() const {
  auto mut = const_cast<TransformerEncoder*>(this)->MutableParameters();
  return {mut.begin(), mut.end()};
}

FeedForwardHead::FeedForwardHead(size_t dim, size_t hidden, Rng& rng)
    : w1_(Gaussian("head.w1", dim, hidden, 1.0 / std::sqrt(static_cast<double>(dim)), rng)),
      b1_(Filled("head.b1", 1, hidden, 0.0)),
      w2_(Gaussian("head.w2", hidden, dim, 1.0 / std::sqrt(static_cast<double>(hidden)), rng)),
      b2_(Filled("head.b2", 1, dim, 0.0)) {}

ad::Var FeedForwardHead::Forward(ad::Var tokens) const {
  if (identity_) return tokens;
  ad::Tape& tape = tokens.tape();
  return Affine(tape, ad::Gelu(Affine(tape, tokens, w1_, b1_)), w2_, b2_);
}

std::vector<Parameter*> FeedForwardHead::MutableParameters() {
  return {&w1_, &b1_, &w2_, &b2_};
}

std::vector<const Parameter*> FeedForwardHead::Parameters() const {
  return {&w1_, &b1_, &w2_, &b2_};
}

DualEncoderModel DualEncoderModel::Create(EncoderConfig config,
                                          Tokenizer tokenizer, uint64_t seed) {
  config.vocab_size = tokenizer.vocab_size();
  config.tokenizer = tokenizer.kind();
  config.Validate();
  DualEncoderModel model;
  model.config_ = config;
  model.tokenizer_ = std::move(tokenizer);
  Rng context_rng = Rng::Derive(seed, 11);
  Rng definition_rng = Rng::Derive(seed, 12);
  Rng head_rng = Rng::Derive(seed, 13);
  model.context_ = TransformerEncoder(config, "context.", context_rng);
  model.definition_ = TransformerEncoder(config, "definition.", definition_rng);
  model.head_ = FeedForwardHead(config.embedding_dim, config.ResolvedHeadHidden(), head_rng);
  return model;
}

std::vector<Parameter*> DualEncoderModel::MutableParameters() {
  std::vector<Parameter*> out = context_.MutableParameters();
  for (Parameter* p : definition_.MutableParameters()) out.push_back(p);
  for (Parameter* p : head_.MutableParameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> DualEncoderModel::Parameters() const {
  auto mut = const_cast<DualEncoderModel*>(this)->MutableParameters();
  return {mut.begin(), mut.end()};
}

std::vector<Parameter*> DualEncoderModel::MutableParameters(EncoderSide side) {
  if (side == EncoderSide::kContext) return context_.MutableParameters();
  std::vector<Parameter*> out = definition_.MutableParameters();
  for (Parameter* p : head_.MutableParameters()) out.push_back(p);
  return out;
}

size_t DualEncoderModel::ParameterCount() const {
  size_t n = 0;
  for (const Parameter* p : Parameters()) n += static_cast<size_t>(p->value.size());
  return n;
}

uint64_t DualEncoderModel::Fingerprint() const { return Fnv1a(Serialize(*this)); }

Tokenizer::Encoded Tokenize(const DualEncoderModel& model, const Tokens& words) {
  if (words.empty()) Fail(ErrorKind::kArgument, "cannot encode an empty token list");
  Tokenizer::Encoded enc = model.tokenizer().Encode(words);
  if (enc.ids.size() > model.config().max_sequence_length) {
    Fail(ErrorKind::kTruncation,
         "input of " + std::to_string(enc.ids.size()) +
             " sub-tokens exceeds max_sequence_length " +
             std::to_string(model.config().max_sequence_length));
  }
  return enc;
}

TokenVectors EncodeTokens(const DualEncoderModel& model, EncoderSide side,
                          const Tokens& words) {
  Tokenizer::Encoded enc = Tokenize(model, words);
  ad::Tape tape(/*record=*/false);
  ad::Var out = model.encoder(side).Forward(tape, enc.ids);
  return TokenVectors{out.value(), std::move(enc.word_spans)};
}

MentionVector PoolMention(const TokenVectors& tokens, int start, int end) {
  const int n_words = static_cast<int>(tokens.word_spans.size());
  if (start < 0 || end < start || end >= n_words) {
    Fail(ErrorKind::kArgument, "mention span [" + std::to_string(start) + ", " +
                                   std::to_string(end) + "] is empty or out of range");
  }
  const int first = tokens.word_spans[start].first;
  const int last = tokens.word_spans[end].second;
  // Running mean: exact when every covered vector is the same.
  Vector mean = Vector::Zero(tokens.vectors.cols());
  for (int r = first; r <= last; ++r) {
    mean += (tokens.vectors.row(r).transpose() - mean) / static_cast<double>(r - first + 1);
  }
  return MentionVector{std::move(mean), Span{0, start, end}};
}

DefinitionVector EncodeDefinition(const DualEncoderModel& model,
                                  const Tokens& definition) {
  if (definition.empty()) Fail(ErrorKind::kArgument, "empty definition");
  ad::Tape tape(/*record=*/false);
  ad::Var v = DefinitionVar(tape, model, definition);
  return DefinitionVector{v.value().row(0).transpose(), {}};
}

double Cosine(const Vector& u, const Vector& v) {
  if (u.size() != v.size()) Fail(ErrorKind::kArgument, "cosine of unequal lengths");
  const double nu = u.norm();
  const double nv = v.norm();
  if (nu == 0.0 || nv == 0.0) Fail(ErrorKind::kDegenerate, "cosine of a zero vector");
  return std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
}

ad::Var MentionVar(ad::Tape& tape, const DualEncoderModel& model,
                   const Tokens& sentence, int start, int end) {
  Tokenizer::Encoded enc = Tokenize(model, sentence);
  const int n_words = static_cast<int>(enc.word_spans.size());
  if (start < 0 || end < start || end >= n_words) {
    Fail(ErrorKind::kArgument, "mention span out of range");
  }
  ad::Var tokens = model.encoder(EncoderSide::kContext).Forward(tape, enc.ids);
  return ad::MeanRows(tokens, enc.word_spans[start].first,
                      enc.word_spans[end].second + 1);
}

ad::Var DefinitionVar(ad::Tape& tape, const DualEncoderModel& model,
                      const Tokens& definition) {
  Tokenizer::Encoded enc = Tokenize(model, definition);
  ad::Var tokens = model.encoder(EncoderSide::kDefinition).Forward(tape, enc.ids);
  ad::Var projected = model.head().Forward(tokens);
  return ad::MeanRows(projected, 0, projected.rows());
}

void SaveCheckpoint(const DualEncoderModel& model, const std::string& path) {
  const std::string bytes = Serialize(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write checkpoint " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) Fail(ErrorKind::kIo, "write failed: " + path);
}

DualEncoderModel LoadCheckpoint(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    Fail(ErrorKind::kInputNotFound, "checkpoint not found: " + path);
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot open checkpoint " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const size_t prefix = sizeof(kMagic) + sizeof(uint32_t) + sizeof(uint64_t);
  if (bytes.size() < prefix || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    Fail(ErrorKind::kValidation, path + ": not a defex checkpoint");
  }
  uint32_t version = 0;
  uint64_t header_size = 0;
  std::memcpy(&version, bytes.data() + sizeof(kMagic), sizeof(version));
  std::memcpy(&header_size, bytes.data() + sizeof(kMagic) + sizeof(version),
              sizeof(header_size));
  if (version != kCheckpointVersion) {
    Fail(ErrorKind::kValidation, path + ": checkpoint version " + std::to_string(version) +
                                     " does not match supported version " +
                                     std::to_string(kCheckpointVersion));
  }
  if (bytes.size() < prefix + header_size) {
    Fail(ErrorKind::kValidation, path + ": truncated checkpoint header");
  }
  json header;
  try {
    header = json::parse(bytes.substr(prefix, header_size));
  } catch (const json::exception& e) {
    Fail(ErrorKind::kValidation, path + ": corrupt checkpoint header: " + e.what());
  }
  EncoderConfig config = EncoderConfigFromJson(header.at("config"));
  Tokenizer tokenizer(ParseTokenizerKind(header.at("tokenizer").at("kind").get<std::string>()),
                      header.at("tokenizer").at("pieces").get<std::vector<std::string>>());
  DualEncoderModel model = DualEncoderModel::Create(config, std::move(tokenizer), 0);
  model.head_.set_identity(header.at("head").at("identity").get<bool>());
  const json& shapes = header.at("parameters");
  auto params = model.MutableParameters();
  if (shapes.size() != params.size()) {
    Fail(ErrorKind::kValidation, path + ": parameter count mismatch");
  }
  size_t offset = prefix + header_size;
  for (size_t i = 0; i < params.size(); ++i) {
    Parameter* p = params[i];
    if (shapes[i].at("name").get<std::string>() != p->name ||
        shapes[i].at("rows").get<Eigen::Index>() != p->value.rows() ||
        shapes[i].at("cols").get<Eigen::Index>() != p->value.cols()) {
      Fail(ErrorKind::kValidation, path + ": unexpected parameter " +
                                       shapes[i].at("name").get<std::string>());
    }
    const size_t n = sizeof(double) * static_cast<size_t>(p->value.size());
    if (offset + n > bytes.size()) Fail(ErrorKind::kValidation, path + ": truncated checkpoint");
    std::memcpy(p->value.data(), bytes.data() + offset, n);
    offset += n;
  }
  if (offset != bytes.size()) Fail(ErrorKind::kValidation, path + ": trailing bytes");
  return model;
}

uint64_t Fnv1a(std::string_view bytes, uint64_t hash) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string HexDigest(uint64_t hash) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

}  // namespace defex
