#pragma once

#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace s2da {

using TokenId = int;

/// Word <-> id bijection. Ids 0..3 are reserved for <sos>, <eos>, <unk> and
/// the DA boundary symbol <da_end>; ordinary words follow.
class Vocabulary {
 public:
  static constexpr TokenId kSos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kUnk = 2;
  static constexpr TokenId kDaEnd = 3;
  static constexpr std::size_t kReservedCount = 4;
  static constexpr std::string_view kSosSymbol = "<sos>";
  static constexpr std::string_view kEosSymbol = "<eos>";
  static constexpr std::string_view kUnkSymbol = "<unk>";
  static constexpr std::string_view kDaEndSymbol = "<da_end>";

  Vocabulary();
  /// Reserved symbols followed by the distinct words in sorted order.
  static Vocabulary from_words(std::span<const std::string> words);
  /// Inverse of words(): the list must start with the reserved symbols.
  static Vocabulary from_list(std::span<const std::string> ordered);

  TokenId add(std::string_view word);
  bool contains(std::string_view word) const;
  /// Unknown words map to kUnk.
  TokenId id(std::string_view word) const;
  const std::string& word(TokenId id) const;
  bool valid(TokenId id) const { return id >= 0 && static_cast<std::size_t>(id) < words_.size(); }
  static bool is_reserved(TokenId id) { return id >= 0 && id < static_cast<TokenId>(kReservedCount); }

  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  std::vector<TokenId> encode(std::span<const std::string> words) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace s2da
