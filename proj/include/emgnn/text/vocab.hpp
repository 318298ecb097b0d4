#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "emgnn/error.hpp"

namespace emgnn::text {

inline constexpr std::size_t kPad = 0;
inline constexpr std::size_t kUnk = 1;
/// Joins a question and its answer inside one history node.
inline constexpr std::size_t kSep = 2;

/// Token ↔ id table with ids in insertion order.
class Vocabulary {
 public:
  Vocabulary() : tokens_{"<pad>", "<unk>", "<sep>"} {
    for (std::size_t i = 0; i < tokens_.size(); ++i) ids_.emplace(tokens_[i], i);
  }

  static constexpr std::size_t reserved() { return 3; }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }

  bool contains(const std::string& tok) const { return ids_.count(tok) > 0; }

  std::size_t id(const std::string& tok) const {
    const auto it = ids_.find(tok);
    return it == ids_.end() ? kUnk : it->second;
  }

  std::size_t add(const std::string& tok) {
    const auto [it, inserted] = ids_.emplace(tok, tokens_.size());
    if (inserted) tokens_.push_back(tok);
    return it->second;
  }

  std::vector<std::size_t> encode(const std::vector<std::string>& toks) const {
    std::vector<std::size_t> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(id(t));
    return out;
  }

  /// Rebuilds from a stored id-ordered token list; the reserved entries must
  /// lead it unchanged.
  static Vocabulary from_tokens(const std::vector<std::string>& toks) {
    Vocabulary v;
    if (toks.size() < reserved()) throw DataError("vocabulary: missing reserved tokens");
    for (std::size_t i = 0; i < reserved(); ++i) {
      if (toks[i] != v.tokens_[i]) throw DataError("vocabulary: reserved token " + std::to_string(i) + " altered");
    }
    for (std::size_t i = reserved(); i < toks.size(); ++i) {
      if (v.add(toks[i]) != i) throw DataError("vocabulary: duplicate token '" + toks[i] + "'");
    }
    return v;
  }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// Tokens seen at least `min_count` times, in order of first occurrence.
inline Vocabulary build_vocab(const std::vector<std::vector<std::string>>& corpus,
                              std::size_t min_count = 1) {
  if (min_count < 1) throw ConfigError("build_vocab: min_count must be >= 1");
  std::unordered_map<std::string, std::size_t> counts;
  std::vector<std::string> order;
  for (const auto& seq : corpus) {
    for (const auto& t : seq) {
      if (counts[t]++ == 0) order.push_back(t);
    }
  }
  Vocabulary v;
  for (const auto& t : order) {
    if (counts[t] >= min_count) v.add(t);
  }
  return v;
}

}  // namespace emgnn::text
