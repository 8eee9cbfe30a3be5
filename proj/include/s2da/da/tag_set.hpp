#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace s2da {

using TagId = int;

/// Dialog-act tag <-> id bijection (e.g. "sd", "sv", "ny").
class TagSet {
 public:
  TagSet() = default;
  /// Distinct tags in sorted order.
  static TagSet from_tags(std::span<const std::string> tags);
  static TagSet from_list(std::span<const std::string> ordered);

  TagId add(const std::string& tag);
  bool contains(const std::string& tag) const { return index_.count(tag) > 0; }
  /// Throws std::out_of_range for unknown tags.
  TagId id(const std::string& tag) const;
  const std::string& tag(TagId id) const;

  std::size_t size() const { return tags_.size(); }
  bool empty() const { return tags_.empty(); }
  const std::vector<std::string>& tags() const { return tags_; }

  friend bool operator==(const TagSet& a, const TagSet& b) { return a.tags_ == b.tags_; }

 private:
  std::vector<std::string> tags_;
  std::unordered_map<std::string, TagId> index_;
};

}  // namespace s2da
