#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "mff/json_util.hpp"
#include "mff/classes.hpp"
#include "mff/errors.hpp"
#include "mff/geometry.hpp"

namespace mff {

inline constexpr double kMaxDetectionDistance = 250.0;

// Output contract of the 2.5D detector: a 2D box plus a metric distance
// estimate in [0, 250] m.
struct Detection25D {
  Box2D box2d;
  ObjectClass class_id = ObjectClass::other;
  double confidence = 0.0;
  double distance_m = 0.0;

  void validate() const {
    box2d.validate();
    if (!(confidence >= 0.0 && confidence <= 1.0))
      throw ValidationError("detection: confidence must be in [0, 1]");
    if (!(distance_m >= 0.0 && distance_m <= kMaxDetectionDistance))
      throw ValidationError("detection: distance_m must be in [0, 250]");
  }
};

// Detections interchange: JSON Lines, one object per line:
//   {frame_id, class, x1, y1, x2, y2, confidence, distance_m}
// Per-frame detection order follows file order; indices into it are the
// `frustum_ref` used everywhere downstream.
inline std::map<std::string, std::vector<Detection25D>> read_detections_jsonl(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open detections: " + path.string());
  std::map<std::string, std::vector<Detection25D>> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError("detections line " + std::to_string(line_no) + ": " +
                        e.what());
    }
    const auto field = [&](const char* name) -> const json& {
      if (!j.contains(name))
        throw FormatError("detections line " + std::to_string(line_no) +
                          ": missing field '" + name + "'");
      return j.at(name);
    };
    Detection25D det;
    det.box2d = Box2D{field("x1").get<double>(), field("y1").get<double>(),
                      field("x2").get<double>(), field("y2").get<double>()};
    det.class_id =
        class_from_name_or_throw(field("class").get<std::string>());
    det.confidence = field("confidence").get<double>();
    det.distance_m = field("distance_m").get<double>();
    try {
      det.validate();
    } catch (const ValidationError& e) {
      throw FormatError("detections line " + std::to_string(line_no) + ": " +
                        e.what());
    }
    out[field("frame_id").get<std::string>()].push_back(det);
  }
  return out;
}

inline std::string detection_to_jsonl(const std::string& frame_id,
                                      const Detection25D& det) {
  ordered_json j;
  j["frame_id"] = frame_id;
  j["class"] = std::string(class_name(det.class_id));
  j["x1"] = det.box2d.x1;
  j["y1"] = det.box2d.y1;
  j["x2"] = det.box2d.x2;
  j["y2"] = det.box2d.y2;
  j["confidence"] = det.confidence;
  j["distance_m"] = det.distance_m;
  return j.dump();
}

inline void write_detections_jsonl(
    const std::filesystem::path& path,
    const std::map<std::string, std::vector<Detection25D>>& detections) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  for (const auto& [frame_id, dets] : detections) {
    for (const auto& det : dets) {
      out << detection_to_jsonl(frame_id, det) << "\n";
    }
  }
}

}  // namespace mff
