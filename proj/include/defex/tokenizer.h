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

#ifndef DEFEX_TOKENIZER_H_
#define DEFEX_TOKENIZER_H_

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "defex/corpus.h"

namespace defex {

enum class TokenizerKind {
  kSubword,   // lowercased, greedy longest-match over a learned piece table
  kIdentity,  // one token per pre-tokenized word
};

std::string_view TokenizerKindName(TokenizerKind kind);
TokenizerKind ParseTokenizerKind(std::string_view name);

struct SubwordOptions {
  // Words seen at least this often become single pieces.
  size_t min_word_count = 2;
  // Other pieces must occur in at least this many distinct rare words.
  size_t min_piece_count = 2;
  size_t max_piece_length = 12;
  size_t max_vocab = 30000;
};

// Word-piece style tokenizer. Piece 0 is always the unknown token.
// Continuation pieces carry a "##" prefix.
class Tokenizer {
 public:
  static constexpr int kUnknownId = 0;
  static constexpr const char* kUnknownPiece = "[UNK]";

  struct Encoded {
    std::vector<int> ids;
    // Inclusive [first, last] sub-token range of every input word.
    std::vector<std::pair<int, int>> word_spans;
  };

  Tokenizer() : Tokenizer(TokenizerKind::kIdentity, {}) {}
  Tokenizer(TokenizerKind kind, std::vector<std::string> pieces);

  static Tokenizer Learn(TokenizerKind kind, const std::vector<Tokens>& texts,
                         const SubwordOptions& options = {});

  Encoded Encode(const Tokens& words) const;

  TokenizerKind kind() const { return kind_; }
  size_t vocab_size() const { return pieces_.size(); }
  const std::vector<std::string>& pieces() const { return pieces_; }
  int IdOf(const std::string& piece) const;

  bool operator==(const Tokenizer& other) const {
    return kind_ == other.kind_ && pieces_ == other.pieces_;
  }

 private:
  void EncodeWord(const std::string& word, std::vector<int>& ids) const;

  TokenizerKind kind_;
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, int> index_;
  size_t longest_piece_ = 0;
};

}  // namespace defex

#endif  // DEFEX_TOKENIZER_H_
