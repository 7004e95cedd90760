#include "copolab/vocabulary.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "copolab/envs.hpp"
#include "copolab/policy.hpp"
#include "copolab/templates.hpp"

namespace copolab {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

}  // namespace

Vocabulary::Vocabulary(const std::vector<std::string>& words) {
  tokens_ = {"<pad>", "<bos>", "<eos>", "<unk>"};
  for (auto tag : {kLevelOpen, kLevelClose, kThinkOpen, kThinkClose,
                   kActionOpen, kActionClose}) {
    tokens_.emplace_back(tag);
  }
  std::set<std::string> rest;
  for (const auto& w : words) {
    if (w.empty()) continue;
    if (std::find(tokens_.begin(), tokens_.end(), w) != tokens_.end()) continue;
    rest.insert(w);
  }
  tokens_.insert(tokens_.end(), rest.begin(), rest.end());
  hash_ = kFnvOffset;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    index_.emplace(tokens_[i], static_cast<int>(i));
    for (unsigned char c : tokens_[i]) {
      hash_ = (hash_ ^ c) * kFnvPrime;
    }
    hash_ = (hash_ ^ 0u) * kFnvPrime;
  }
}

Vocabulary Vocabulary::standard() {
  std::vector<std::string> words;
  auto append = [&words](std::vector<std::string> more) {
    words.insert(words.end(), std::make_move_iterator(more.begin()),
                 std::make_move_iterator(more.end()));
  };
  append(env_lexicon(EnvId::kGridHouse));
  append(env_lexicon(EnvId::kMiniLab));
  append(template_lexicon());
  append(prompt_lexicon());
  for (auto level : kAllLevels) words.push_back(level_digit(level));
  return Vocabulary(words);
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.find(std::string(word)) != index_.end();
}

int Vocabulary::id(std::string_view word) const {
  const auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(const TokenSeq& words) const {
  std::vector<int> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(id(w));
  return out;
}

TokenSeq Vocabulary::decode(std::span<const int> ids) const {
  TokenSeq out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace copolab
