#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deepi2i/errors.h"

namespace deepi2i {

/// Dense, ordered class-name <-> index mapping. Folder datasets order names
/// lexicographically so the vocabulary is reproducible.
class ClassVocabulary {
 public:
  ClassVocabulary() = default;
  explicit ClassVocabulary(std::vector<std::string> names);

  int64_t size() const { return static_cast<int64_t>(names_.size()); }
  const std::string& name(int64_t index) const;
  int64_t index_of(const std::string& name) const;  // throws listing the vocabulary
  bool contains(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }

  bool operator==(const ClassVocabulary& o) const { return names_ == o.names_; }

 private:
  std::vector<std::string> names_;
};

inline ClassVocabulary::ClassVocabulary(std::vector<std::string> names)
    : names_(std::move(names)) {
  for (size_t i = 0; i < names_.size(); ++i)
    for (size_t j = i + 1; j < names_.size(); ++j)
      if (names_[i] == names_[j]) throw DataError("duplicate class name '" + names_[i] + "'");
}

inline const std::string& ClassVocabulary::name(int64_t index) const {
  if (index < 0 || index >= size())
    throw ConfigError("class index " + std::to_string(index) + " out of range");
  return names_[static_cast<size_t>(index)];
}

inline bool ClassVocabulary::contains(const std::string& name) const {
  for (const auto& n : names_)
    if (n == name) return true;
  return false;
}

inline int64_t ClassVocabulary::index_of(const std::string& name) const {
  for (size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int64_t>(i);
  std::string known;
  for (const auto& n : names_) known += (known.empty() ? "" : ", ") + n;
  throw ConfigError("unknown class '" + name + "'; vocabulary: [" + known + "]");
}

}  // namespace deepi2i
