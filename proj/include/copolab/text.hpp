#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace copolab {

using TokenSeq = std::vector<std::string>;

inline constexpr std::string_view kLevelOpen = "<level>";
inline constexpr std::string_view kLevelClose = "</level>";
inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kActionOpen = "<action>";
inline constexpr std::string_view kActionClose = "</action>";

/// True for the six structural tags of the step grammar.
bool is_structural_tag(std::string_view token);

/// True for any token that carries an angle bracket. Such tokens never
/// appear inside think or action content.
bool is_tag_like(std::string_view token);

/// Splits text into word-level tokens.
///
/// Rules: whitespace separates; `<...>` runs without whitespace are one
/// token; a lone `<` or `>` is its own token; runs of letters, digits,
/// `_`, `'` and `-` form words; every other printable character is a
/// single-character token.
TokenSeq lex(std::string_view text);

/// Canonical inverse of lex(): words separated by one space, no space
/// before closing punctuation, no space on either side of a tag-like token.
std::string join_tokens(std::span<const std::string> tokens);

inline std::string join_tokens(const TokenSeq& tokens) {
  return join_tokens(std::span<const std::string>(tokens));
}

}  // namespace copolab
