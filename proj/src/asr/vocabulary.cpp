#include "s2da/asr/vocabulary.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace s2da {

Vocabulary::Vocabulary() {
  for (auto sym : {kSosSymbol, kEosSymbol, kUnkSymbol, kDaEndSymbol}) add(sym);
}

Vocabulary Vocabulary::from_words(std::span<const std::string> words) {
  std::set<std::string> sorted(words.begin(), words.end());
  Vocabulary v;
  for (const auto& w : sorted) v.add(w);
  return v;
}

Vocabulary Vocabulary::from_list(std::span<const std::string> ordered) {
  Vocabulary v;
  if (ordered.size() < kReservedCount) throw std::invalid_argument("vocabulary list too short");
  for (std::size_t i = 0; i < kReservedCount; ++i) {
    if (ordered[i] != v.words_[i]) {
      throw std::invalid_argument("vocabulary list must start with reserved symbols; found " +
                                  ordered[i]);
    }
  }
  for (std::size_t i = kReservedCount; i < ordered.size(); ++i) {
    if (v.contains(ordered[i])) throw std::invalid_argument("duplicate vocabulary entry " + ordered[i]);
    v.add(ordered[i]);
  }
  return v;
}

TokenId Vocabulary::add(std::string_view word) {
  if (word.empty()) throw std::invalid_argument("vocabulary: empty word");
  if (auto it = index_.find(std::string(word)); it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(words_.size());
  words_.emplace_back(word);
  index_.emplace(words_.back(), id);
  return id;
}

bool Vocabulary::contains(std::string_view word) const {
  return index_.count(std::string(word)) > 0;
}

TokenId Vocabulary::id(std::string_view word) const {
  auto it = index_.find(std::string(word));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::word(TokenId id) const {
  if (!valid(id)) throw std::out_of_range("vocabulary: invalid token id " + std::to_string(id));
  return words_[static_cast<std::size_t>(id)];
}

std::vector<TokenId> Vocabulary::encode(std::span<const std::string> words) const {
  std::vector<TokenId> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(id(w));
  return out;
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId t : ids) out.push_back(word(t));
  return out;
}

}  // namespace s2da
