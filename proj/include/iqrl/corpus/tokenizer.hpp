#pragma once

// Lowercasing tokenizer and frequency-ranked vocabulary.

#include <algorithm>
#include <cctype>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "iqrl/corpus/types.hpp"

namespace iqrl::corpus {

inline constexpr std::string_view kUnknownToken = "<unk>";
/// Joins system and user text inside one turn. Cannot come out of tokenize().
inline constexpr std::string_view kSeparatorToken = "<sep>";

/// Lowercase, split on whitespace and ASCII punctuation; punctuation is dropped.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || std::ispunct(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

/// System tokens, separator, user tokens.
inline std::vector<std::string> turn_tokens(const AnnotatedTurn& turn) {
  std::vector<std::string> tokens = tokenize(turn.system_text);
  tokens.emplace_back(kSeparatorToken);
  for (auto& t : tokenize(turn.user_text)) tokens.push_back(std::move(t));
  return tokens;
}

class Vocab {
 public:
  Vocab() : tokens_{std::string(kUnknownToken)} { index_.emplace(tokens_[0], 0); }

  /// Builds from an explicit token list; element 0 must be the unknown token.
  explicit Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    if (tokens_.empty() || tokens_[0] != kUnknownToken) throw Error("vocab: id 0 must be " + std::string(kUnknownToken));
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], i).second) throw Error("vocab: duplicate token '" + tokens_[i] + "'");
    }
  }

  std::size_t size() const { return tokens_.size(); }
  std::size_t id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? 0 : it->second;
  }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<std::size_t> encode(const std::vector<std::string>& tokens) const {
    std::vector<std::size_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(id(t));
    return ids;
  }
  std::vector<std::size_t> encode_turn(const AnnotatedTurn& turn) const { return encode(turn_tokens(turn)); }

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Ids from 1 in decreasing frequency, ties broken lexicographically. Tokens
/// seen fewer than min_count times are left out and map to 0.
inline Vocab build_vocab(const std::vector<const AnnotatedDialogue*>& dialogues, std::size_t min_count = 1) {
  std::map<std::string, std::size_t> counts;
  for (const AnnotatedDialogue* d : dialogues)
    for (const auto& turn : d->turns)
      for (auto& t : turn_tokens(turn)) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [token, n] : counts)
    if (n >= min_count) ranked.emplace_back(token, n);
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens{std::string(kUnknownToken)};
  for (auto& [token, n] : ranked) tokens.push_back(token);
  return Vocab(std::move(tokens));
}

inline Vocab build_vocab(const Corpus& corpus, std::size_t min_count = 1) {
  std::vector<const AnnotatedDialogue*> ptrs;
  for (const auto& d : corpus) ptrs.push_back(&d);
  return build_vocab(ptrs, min_count);
}

}  // namespace iqrl::corpus
