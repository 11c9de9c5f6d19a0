#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mff/heads.hpp"
#include "mff/json_util.hpp"
#include "mff/pclb.hpp"

// File surfaces for external detection heads:
//   Predictions JSONL, one object per line:
//     {frame_id, class, score, cx, cy, cz, l, w, h, yaw,
//      frame: "sensor"|"frustum", route, frustum_ref}
//   Frustum bundle: a directory of frustum-frame PCLB clouds plus
//   `index.jsonl` carrying per-frustum metadata, so heads can run offline
//   and report boxes in either frame.

namespace mff {

struct FrustumIndexEntry {
  std::string frame_id;
  int frustum_ref = -1;
  ObjectClass class_id = ObjectClass::other;
  double azimuth = 0.0;
  double centroid_distance = 0.0;
  double fused_distance = 0.0;
  Route route = Route::short_range;
  bool synthetic = false;
  std::string points_file;
};

class FrustumIndex {
 public:
  void add(FrustumIndexEntry entry) {
    entries_[{entry.frame_id, entry.frustum_ref}] = std::move(entry);
  }

  const FrustumIndexEntry* find(const std::string& frame_id,
                                int frustum_ref) const {
    const auto it = entries_.find({frame_id, frustum_ref});
    return it == entries_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return entries_.size(); }

  const std::map<std::pair<std::string, int>, FrustumIndexEntry>& entries()
      const {
    return entries_;
  }

 private:
  std::map<std::pair<std::string, int>, FrustumIndexEntry> entries_;
};

inline void write_frustum_bundle(const std::filesystem::path& dir,
                                 const std::vector<Frustum>& frustums,
                                 const std::vector<Route>& routes) {
  if (frustums.size() != routes.size())
    throw ValidationError("frustum bundle: route per frustum required");
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "index.jsonl");
  if (!index)
    throw FormatError("cannot open for writing: " + (dir / "index.jsonl").string());
  for (std::size_t i = 0; i < frustums.size(); ++i) {
    const Frustum& f = frustums[i];
    if (f.frame_tag != Frustum::FrameTag::frustum)
      throw ValidationError("frustum bundle: clouds must be in the frustum frame");
    const std::string points_file =
        f.frame_id + "_" + std::to_string(f.detection_index) + ".pclb";
    write_point_cloud(dir / points_file, f.points);
    ordered_json j;
    j["frame_id"] = f.frame_id;
    j["frustum_ref"] = f.detection_index;
    j["class"] = std::string(class_name(f.detection.class_id));
    j["azimuth"] = f.azimuth;
    j["centroid_distance"] = f.centroid_distance;
    j["fused_distance"] = f.fused_distance;
    j["route"] = std::string(route_name(routes[i]));
    j["synthetic"] = f.synthetic;
    j["frame"] = "frustum";
    j["points_file"] = points_file;
    index << j.dump() << "\n";
  }
}

inline FrustumIndex read_frustum_index(const std::filesystem::path& index_path) {
  std::ifstream in(index_path);
  if (!in) throw FormatError("cannot open frustum index: " + index_path.string());
  FrustumIndex index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError("frustum index line " + std::to_string(line_no) +
                        ": " + e.what());
    }
    FrustumIndexEntry entry;
    entry.frame_id = j.at("frame_id").get<std::string>();
    entry.frustum_ref = j.at("frustum_ref").get<int>();
    entry.class_id = class_from_name_or_throw(j.at("class").get<std::string>());
    entry.azimuth = j.at("azimuth").get<double>();
    entry.centroid_distance = j.at("centroid_distance").get<double>();
    entry.fused_distance = j.at("fused_distance").get<double>();
    entry.route = route_from_name(j.at("route").get<std::string>());
    entry.synthetic = j.at("synthetic").get<bool>();
    entry.points_file = j.at("points_file").get<std::string>();
    index.add(std::move(entry));
  }
  return index;
}

inline std::string prediction_to_jsonl(const HeadPrediction& p) {
  ordered_json j;
  j["frame_id"] = p.frame_id;
  j["class"] = std::string(class_name(p.box3d.class_id));
  j["score"] = p.score;
  j["cx"] = p.box3d.center.x();
  j["cy"] = p.box3d.center.y();
  j["cz"] = p.box3d.center.z();
  j["l"] = p.box3d.length;
  j["w"] = p.box3d.width;
  j["h"] = p.box3d.height;
  j["yaw"] = p.box3d.yaw;
  j["frame"] = "sensor";
  j["route"] = std::string(route_name(p.route));
  j["frustum_ref"] = p.frustum_ref;
  return j.dump();
}

inline void write_predictions_jsonl(const std::filesystem::path& path,
                                    const std::vector<HeadPrediction>& preds) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  for (const auto& p : preds) out << prediction_to_jsonl(p) << "\n";
}

// Reads head predictions, validating every record. Records tagged
// `frame: "frustum"` are rotated into the sensor frame using the bundled
// azimuth, which requires the frustum index.
inline std::vector<HeadPrediction> read_adapter_predictions(
    const std::filesystem::path& path, const FrustumIndex* index = nullptr) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open predictions: " + path.string());
  std::vector<HeadPrediction> preds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fail = [&](const std::string& field, const std::string& why) {
      throw FormatError("predictions line " + std::to_string(line_no) +
                        ", field '" + field + "': " + why);
    };
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError("predictions line " + std::to_string(line_no) + ": " +
                        e.what());
    }
    const auto field = [&](const char* name) -> const json& {
      if (!j.contains(name)) fail(name, "missing");
      return j.at(name);
    };
    HeadPrediction p;
    p.frame_id = field("frame_id").get<std::string>();
    p.box3d.class_id =
        class_from_name_or_throw(field("class").get<std::string>());
    p.score = field("score").get<double>();
    p.box3d.center = Vec3(field("cx").get<double>(), field("cy").get<double>(),
                          field("cz").get<double>());
    p.box3d.length = field("l").get<double>();
    p.box3d.width = field("w").get<double>();
    p.box3d.height = field("h").get<double>();
    p.box3d.yaw = field("yaw").get<double>();
    p.route = route_from_name(field("route").get<std::string>());
    p.frustum_ref = field("frustum_ref").get<int>();

    if (!(p.box3d.length > 0.0)) fail("l", "must be positive");
    if (!(p.box3d.width > 0.0)) fail("w", "must be positive");
    if (!(p.box3d.height > 0.0)) fail("h", "must be positive");
    if (!(p.score >= 0.0 && p.score <= 1.0)) fail("score", "must be in [0, 1]");
    p.box3d.yaw = normalize_angle(p.box3d.yaw);

    const std::string frame = field("frame").get<std::string>();
    if (frame == "frustum") {
      if (!index) fail("frame", "frustum-frame record requires a bundle index");
      const auto* entry = index->find(p.frame_id, p.frustum_ref);
      if (!entry) {
        fail("frustum_ref", "no bundle entry for frame '" + p.frame_id +
                                "' ref " + std::to_string(p.frustum_ref));
      }
      const RigidTransform to_sensor = invert(frustum_frame_for(entry->azimuth));
      p.box3d.center = to_sensor.apply(p.box3d.center);
      p.box3d.yaw = normalize_angle(p.box3d.yaw + entry->azimuth);
    } else if (frame != "sensor") {
      fail("frame", "must be 'sensor' or 'frustum'");
    }
    p.validate();
    preds.push_back(std::move(p));
  }
  return preds;
}

}  // namespace mff
