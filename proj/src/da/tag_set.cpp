#include "s2da/da/tag_set.hpp"

#include <set>
#include <stdexcept>

namespace s2da {

TagSet TagSet::from_tags(std::span<const std::string> tags) {
  std::set<std::string> sorted(tags.begin(), tags.end());
  TagSet t;
  for (const auto& s : sorted) t.add(s);
  return t;
}

TagSet TagSet::from_list(std::span<const std::string> ordered) {
  TagSet t;
  for (const auto& s : ordered) {
    if (t.contains(s)) throw std::invalid_argument("duplicate DA tag " + s);
    t.add(s);
  }
  return t;
}

TagId TagSet::add(const std::string& tag) {
  if (tag.empty()) throw std::invalid_argument("tag set: empty tag");
  if (auto it = index_.find(tag); it != index_.end()) return it->second;
  const auto id = static_cast<TagId>(tags_.size());
  tags_.push_back(tag);
  index_.emplace(tag, id);
  return id;
}

TagId TagSet::id(const std::string& tag) const {
  auto it = index_.find(tag);
  if (it == index_.end()) throw std::out_of_range("unknown DA tag: " + tag);
  return it->second;
}

const std::string& TagSet::tag(TagId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tags_.size()) {
    throw std::out_of_range("invalid DA tag id " + std::to_string(id));
  }
  return tags_[static_cast<std::size_t>(id)];
}

}  // namespace s2da
