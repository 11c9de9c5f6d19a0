#pragma once

#include "mff/classes.hpp"
#include "mff/manifest.hpp"

namespace mff {

struct ClassPrior {
  double length = 0.0;
  double width = 0.0;
  double height = 0.0;
  double center_z_offset = 0.0;  // mean sensor-frame center height
  bool from_fallback = false;
};

struct ClassPriorTable {
  PerClass<ClassPrior> entries;

  const ClassPrior& for_class(ObjectClass c) const { return entries[c]; }
};

// Placeholder dims used only when a class never occurs in the training
// split; superseded by computed means whenever data exists.
inline ClassPriorTable fallback_priors() {
  ClassPriorTable t;
  t.entries[ObjectClass::person] = {0.6, 0.6, 1.75, 0.0, true};
  t.entries[ObjectClass::road_vehicle] = {4.5, 1.8, 1.6, 0.0, true};
  t.entries[ObjectClass::buffer_stop] = {2.0, 3.0, 1.5, 0.0, true};
  t.entries[ObjectClass::catenary_pole] = {0.5, 0.5, 7.0, 0.0, true};
  t.entries[ObjectClass::signal_pole] = {0.3, 0.3, 4.0, 0.0, true};
  return t;
}

// Per-class arithmetic means of the paired 3D labels in a (training)
// manifest.
inline ClassPriorTable compute_class_priors(const DatasetManifest& manifest) {
  ClassPriorTable table = fallback_priors();
  PerClass<double> sum_l(0.0), sum_w(0.0), sum_h(0.0), sum_z(0.0);
  PerClass<std::size_t> counts(0);
  for (const auto& frame : manifest.frames) {
    for (const auto& label : filter_paired(frame.labels)) {
      if (label.class_id == ObjectClass::other) continue;
      const Box3D& b = *label.box3d;
      sum_l[label.class_id] += b.length;
      sum_w[label.class_id] += b.width;
      sum_h[label.class_id] += b.height;
      sum_z[label.class_id] += b.center.z();
      ++counts[label.class_id];
    }
  }
  for (ObjectClass c : kEvalClasses) {
    if (counts[c] == 0) continue;  // fallback entry stays, flagged
    const auto n = static_cast<double>(counts[c]);
    table.entries[c] = {sum_l[c] / n, sum_w[c] / n, sum_h[c] / n,
                        sum_z[c] / n, false};
  }
  return table;
}

inline ordered_json priors_to_json(const ClassPriorTable& table) {
  ordered_json j;
  for (ObjectClass c : kEvalClasses) {
    const ClassPrior& p = table.for_class(c);
    j[std::string(class_name(c))] = {{"length", p.length},
                                     {"width", p.width},
                                     {"height", p.height},
                                     {"center_z_offset", p.center_z_offset},
                                     {"from_fallback", p.from_fallback}};
  }
  return j;
}

inline ClassPriorTable priors_from_json(const json& j) {
  ClassPriorTable table = fallback_priors();
  for (ObjectClass c : kEvalClasses) {
    const std::string name(class_name(c));
    if (!j.contains(name)) continue;
    const auto& e = j.at(name);
    table.entries[c] = {e.at("length").get<double>(),
                        e.at("width").get<double>(),
                        e.at("height").get<double>(),
                        e.at("center_z_offset").get<double>(),
                        e.value("from_fallback", false)};
  }
  return table;
}

}  // namespace mff
