#include "copolab/text.hpp"

#include <array>
#include <cctype>

namespace copolab {

namespace {

bool is_word_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return std::isalnum(u) != 0 || c == '_' || c == '\'' || c == '-';
}

bool is_closing_punct(std::string_view t) {
  return t == "," || t == "." || t == ":" || t == ";" || t == "!" ||
         t == "?";
}

}  // namespace

bool is_structural_tag(std::string_view token) {
  static constexpr std::array<std::string_view, 6> kTags{
      kLevelOpen, kLevelClose, kThinkOpen, kThinkClose, kActionOpen,
      kActionClose};
  for (auto tag : kTags) {
    if (token == tag) return true;
  }
  return false;
}

bool is_tag_like(std::string_view token) {
  return token.find('<') != std::string_view::npos ||
         token.find('>') != std::string_view::npos;
}

TokenSeq lex(std::string_view text) {
  TokenSeq out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c)) != 0) {
      ++i;
      continue;
    }
    if (c == '<') {
      std::size_t j = i + 1;
      while (j < n && text[j] != '>' && text[j] != '<' &&
             std::isspace(static_cast<unsigned char>(text[j])) == 0) {
        ++j;
      }
      if (j < n && text[j] == '>' && j > i + 1) {
        out.emplace_back(text.substr(i, j - i + 1));
        i = j + 1;
      } else {
        out.emplace_back("<");
        ++i;
      }
      continue;
    }
    if (is_word_char(c)) {
      std::size_t j = i;
      while (j < n && is_word_char(text[j])) ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
      continue;
    }
    out.emplace_back(1, c);
    ++i;
  }
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  bool prev_glues = true;
  for (const auto& tok : tokens) {
    const bool tag = is_tag_like(tok);
    if (!prev_glues && !tag && !is_closing_punct(tok)) out.push_back(' ');
    out += tok;
    prev_glues = tag;
  }
  return out;
}

}  // namespace copolab
