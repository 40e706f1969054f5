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

#include "defex/tokenizer.h"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <tuple>

#include "defex/error.h"

namespace defex {
namespace {

std::string Lower(const std::string& s) {
  std::string out = s;
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string Piece(const std::string& word, size_t pos, size_t len) {
  return pos == 0 ? word.substr(0, len) : "##" + word.substr(pos, len);
}

}  // namespace

std::string_view TokenizerKindName(TokenizerKind kind) {
  return kind == TokenizerKind::kSubword ? "subword" : "identity";
}

TokenizerKind ParseTokenizerKind(std::string_view name) {
  if (name == "subword") return TokenizerKind::kSubword;
  if (name == "identity") return TokenizerKind::kIdentity;
  Fail(ErrorKind::kArgument, "unknown tokenizer kind: " + std::string(name));
}

Tokenizer::Tokenizer(TokenizerKind kind, std::vector<std::string> pieces)
    : kind_(kind), pieces_(std::move(pieces)) {
  if (pieces_.empty() || pieces_[0] != kUnknownPiece) {
    pieces_.insert(pieces_.begin(), kUnknownPiece);
  }
  for (size_t i = 0; i < pieces_.size(); ++i) {
    if (!index_.emplace(pieces_[i], static_cast<int>(i)).second) {
      Fail(ErrorKind::kValidation, "duplicate tokenizer piece " + pieces_[i]);
    }
    if (i > 0) longest_piece_ = std::max(longest_piece_, pieces_[i].size());
  }
}

Tokenizer Tokenizer::Learn(TokenizerKind kind, const std::vector<Tokens>& texts,
                           const SubwordOptions& options) {
  std::map<std::string, size_t> word_counts;
  for (const auto& text : texts) {
    for (const auto& w : text) {
      ++word_counts[kind == TokenizerKind::kSubword ? Lower(w) : w];
    }
  }
  std::vector<std::string> pieces;
  if (kind == TokenizerKind::kIdentity) {
    for (const auto& [w, n] : word_counts) pieces.push_back(w);
    return Tokenizer(kind, std::move(pieces));
  }

  std::set<std::string> table;
  std::vector<std::string> rare;
  for (const auto& [w, n] : word_counts) {
    // Every character is available in both positions so any word over a
    // seen alphabet can be segmented.
    for (size_t i = 0; i < w.size(); ++i) {
      table.insert(w.substr(i, 1));
      table.insert("##" + w.substr(i, 1));
    }
    if (n >= options.min_word_count) {
      table.insert(w);
    } else {
      rare.push_back(w);
    }
  }
  // Multi-character pieces from rare words, counted once per word type.
  std::map<std::string, size_t> piece_counts;
  for (const auto& w : rare) {
    std::set<std::string> seen;
    for (size_t pos = 0; pos < w.size(); ++pos) {
      for (size_t len = 2; len <= options.max_piece_length && pos + len <= w.size();
           ++len) {
        if (pos == 0 && len == w.size()) continue;
        seen.insert(Piece(w, pos, len));
      }
    }
    for (const auto& p : seen) ++piece_counts[p];
  }
  std::vector<std::tuple<size_t, size_t, std::string>> ranked;
  for (const auto& [p, n] : piece_counts) {
    if (n >= options.min_piece_count && !table.count(p)) {
      ranked.emplace_back(n, p.size(), p);
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) > std::get<1>(b);
    return std::get<2>(a) < std::get<2>(b);
  });
  for (const auto& r : ranked) {
    if (table.size() + 1 >= options.max_vocab) break;
    table.insert(std::get<2>(r));
  }
  pieces.assign(table.begin(), table.end());
  return Tokenizer(kind, std::move(pieces));
}

int Tokenizer::IdOf(const std::string& piece) const {
  auto it = index_.find(piece);
  return it == index_.end() ? kUnknownId : it->second;
}

void Tokenizer::EncodeWord(const std::string& word, std::vector<int>& ids) const {
  if (kind_ == TokenizerKind::kIdentity) {
    ids.push_back(IdOf(word));
    return;
  }
  const std::string w = Lower(word);
  std::vector<int> out;
  size_t pos = 0;
  while (pos < w.size()) {
    int found = -1;
    size_t found_len = 0;
    const size_t max_len = std::min(longest_piece_, w.size() - pos);
    for (size_t len = max_len; len >= 1; --len) {
      auto it = index_.find(Piece(w, pos, len));
      if (it != index_.end()) {
        found = it->second;
        found_len = len;
        break;
      }
    }
    if (found < 0) {
      ids.push_back(kUnknownId);
      return;
    }
    out.push_back(found);
    pos += found_len;
  }
  if (out.empty()) out.push_back(kUnknownId);
  ids.insert(ids.end(), out.begin(), out.end());
}

Tokenizer::Encoded Tokenizer::Encode(const Tokens& words) const {
  Encoded enc;
  enc.word_spans.reserve(words.size());
  for (const auto& w : words) {
    const int first = static_cast<int>(enc.ids.size());
    EncodeWord(w, enc.ids);
    enc.word_spans.emplace_back(first, static_cast<int>(enc.ids.size()) - 1);
  }
  return enc;
}

}  // namespace defex
