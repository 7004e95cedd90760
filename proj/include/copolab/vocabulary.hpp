#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "copolab/text.hpp"

namespace copolab {

/// Closed word-level vocabulary. Ids 0-3 are the specials, followed by the
/// six structural tags and then the remaining words in sorted order.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;

  /// Builds from arbitrary words; duplicates and specials are folded.
  explicit Vocabulary(const std::vector<std::string>& words);

  /// Every word the environments, prompts and think templates can produce.
  static Vocabulary standard();

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(int id) const { return tokens_.at(id); }
  bool contains(std::string_view word) const;
  /// Id of the word, or kUnk.
  int id(std::string_view word) const;

  std::vector<int> encode(const TokenSeq& words) const;
  std::vector<int> encode_text(std::string_view text) const { return encode(lex(text)); }
  TokenSeq decode(std::span<const int> ids) const;

  /// FNV-1a over the token list; checkpoints carry it.
  std::uint64_t hash() const { return hash_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  std::uint64_t hash_ = 0;
};

std::string hash_hex(std::uint64_t h);

}  // namespace copolab
