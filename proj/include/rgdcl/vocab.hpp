#pragma once

#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rgdcl/error.hpp"

namespace rgdcl {

using TokenId = std::int32_t;
using TokenIds = std::vector<TokenId>;
using Tokens = std::vector<std::string>;

/// Whitespace tokenization; the only tokenizer in the project.
inline Tokens split_words(std::string_view text) {
  Tokens out;
  std::istringstream in{std::string(text)};
  std::string word;
  while (in >> word) out.push_back(word);
  return out;
}

inline std::string join_words(std::span<const std::string> words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

class Vocab {
 public:
  static constexpr TokenId pad = 0;
  static constexpr TokenId bos = 1;
  static constexpr TokenId eos = 2;
  static constexpr TokenId unk = 3;
  static constexpr std::size_t reserved_count = 4;

  Vocab() : Vocab(std::span<const std::string>{}) {}

  /// Reserved entries first, then `words` in order with duplicates dropped.
  explicit Vocab(std::span<const std::string> words) {
    for (const char* r : {"<pad>", "<bos>", "<eos>", "<unk>"}) add(r);
    for (const auto& w : words) {
      if (!index_.contains(w)) add(w);
    }
  }

  std::size_t size() const { return tokens_.size(); }

  const std::string& token(TokenId id) const {
    require(contains(id), Errc::invalid_token, "token id " + std::to_string(id) + " outside vocabulary");
    return tokens_[static_cast<std::size_t>(id)];
  }

  /// Unknown words map to `unk`.
  TokenId lookup(std::string_view word) const {
    auto it = index_.find(std::string(word));
    return it == index_.end() ? unk : it->second;
  }

  bool has_word(std::string_view word) const { return index_.contains(std::string(word)); }

  bool contains(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < tokens_.size(); }

  TokenIds encode(std::span<const std::string> words) const {
    TokenIds ids;
    ids.reserve(words.size());
    for (const auto& w : words) ids.push_back(lookup(w));
    return ids;
  }

  Tokens decode(std::span<const TokenId> ids) const {
    Tokens words;
    words.reserve(ids.size());
    for (TokenId id : ids) words.push_back(token(id));
    return words;
  }

  const std::vector<std::string>& tokens() const { return tokens_; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  void add(const std::string& w) {
    index_.emplace(w, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(w);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace rgdcl
