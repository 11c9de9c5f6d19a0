#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "mff/errors.hpp"

namespace mff {

// The five evaluated classes plus a catch-all for labels that do not map to
// them. `other` is retained through parsing but excluded from evaluation.
enum class ObjectClass : int {
  person = 0,
  road_vehicle = 1,
  buffer_stop = 2,
  catenary_pole = 3,
  signal_pole = 4,
  other = 5,
};

inline constexpr int kNumEvalClasses = 5;

inline constexpr std::array<ObjectClass, kNumEvalClasses> kEvalClasses = {
    ObjectClass::person,        ObjectClass::road_vehicle,
    ObjectClass::buffer_stop,   ObjectClass::catenary_pole,
    ObjectClass::signal_pole,
};

inline std::string_view class_name(ObjectClass c) {
  switch (c) {
    case ObjectClass::person:        return "person";
    case ObjectClass::road_vehicle:  return "road_vehicle";
    case ObjectClass::buffer_stop:   return "buffer_stop";
    case ObjectClass::catenary_pole: return "catenary_pole";
    case ObjectClass::signal_pole:   return "signal_pole";
    case ObjectClass::other:         return "other";
  }
  return "other";
}

inline std::optional<ObjectClass> class_from_name(std::string_view name) {
  for (ObjectClass c : kEvalClasses) {
    if (name == class_name(c)) return c;
  }
  if (name == "other") return ObjectClass::other;
  return std::nullopt;
}

inline ObjectClass class_from_name_or_throw(std::string_view name) {
  auto c = class_from_name(name);
  if (!c) throw ValidationError("unknown class name: " + std::string(name));
  return *c;
}

// Dataset-specific label names are remapped to the canonical enumeration via
// a table; labels absent from the table become `other`. The shipped table is
// the identity over the five canonical names so deployments can extend it
// without code changes.
class ClassNameMap {
 public:
  ClassNameMap() {
    for (ObjectClass c : kEvalClasses) {
      map_[std::string(class_name(c))] = c;
    }
  }

  explicit ClassNameMap(std::map<std::string, ObjectClass> entries)
      : map_(std::move(entries)) {}

  ObjectClass resolve(std::string_view dataset_name) const {
    auto it = map_.find(std::string(dataset_name));
    return it == map_.end() ? ObjectClass::other : it->second;
  }

  const std::map<std::string, ObjectClass>& entries() const { return map_; }

  void set(const std::string& dataset_name, ObjectClass c) {
    map_[dataset_name] = c;
  }

 private:
  std::map<std::string, ObjectClass> map_;
};

// Per-class storage indexed by the five evaluated classes.
template <typename T>
class PerClass {
 public:
  PerClass() = default;
  explicit PerClass(const T& fill) { values_.fill(fill); }

  T& operator[](ObjectClass c) { return values_.at(index_of(c)); }
  const T& operator[](ObjectClass c) const { return values_.at(index_of(c)); }

 private:
  static std::size_t index_of(ObjectClass c) {
    auto i = static_cast<std::size_t>(c);
    if (i >= kNumEvalClasses) {
      throw ValidationError("class '" + std::string(class_name(c)) +
                            "' has no per-class entry");
    }
    return i;
  }

  std::array<T, kNumEvalClasses> values_{};
};

}  // namespace mff
