#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mff/openlabel.hpp"

namespace mff {

namespace fs = std::filesystem;

struct DatasetManifest {
  std::string split;  // train | val | test
  std::string root;   // directory that relative paths resolve against
  std::vector<FrameAnnotation> frames;  // sorted by frame_id
  std::map<std::string, std::size_t> class_histogram;

  fs::path resolve(const std::string& relative) const {
    const fs::path p(relative);
    return p.is_absolute() ? p : fs::path(root) / p;
  }

  const FrameAnnotation* find_frame(const std::string& frame_id) const {
    for (const auto& f : frames) {
      if (f.frame_id == frame_id) return &f;
    }
    return nullptr;
  }
};

struct IngestOptions {
  std::string camera;  // stream selection; empty = must be unambiguous
  std::string lidar;
  bool ignore_distortion = false;
};

inline std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw FormatError("short write: " + path.string());
}

namespace manifest_detail {

// Narrows a frame's streams to the selected camera/lidar and applies the
// distortion policy.
inline void select_streams(FrameAnnotation& frame, const IngestOptions& opts) {
  if (!opts.camera.empty()) {
    const auto it = frame.calibration.find(opts.camera);
    if (it == frame.calibration.end()) {
      if (!frame.calibration.empty())
        throw ValidationError("frame '" + frame.frame_id +
                              "': camera stream '" + opts.camera +
                              "' not found in calibration");
    } else {
      const SensorCalibration kept = it->second;
      frame.calibration = {{opts.camera, kept}};
    }
    const auto uri = frame.stream_uris.find(opts.camera);
    frame.image_path = uri == frame.stream_uris.end()
                           ? std::nullopt
                           : std::optional<std::string>(uri->second);
  } else if (frame.calibration.size() > 1) {
    throw ValidationError(
        "frame '" + frame.frame_id +
        "' carries multiple camera streams; pass an explicit --camera");
  }
  if (!opts.lidar.empty()) {
    const auto uri = frame.stream_uris.find(opts.lidar);
    frame.cloud_path = uri == frame.stream_uris.end()
                           ? std::nullopt
                           : std::optional<std::string>(uri->second);
  }
  for (const auto& [name, calib] : frame.calibration) {
    if (calib.has_nonzero_distortion() && !opts.ignore_distortion) {
      throw ValidationError(
          "frame '" + frame.frame_id + "', stream '" + name +
          "': nonzero distortion coefficients; re-run with "
          "--ignore-distortion to accept the pinhole approximation");
    }
  }
}

}  // namespace manifest_detail

// Scans `<root>/annotations/*.json`, applies the split file, validates
// referenced paths, and emits one manifest per split. Splits must be
// disjoint by frame id.
//
// Split file: {"train": ["frame", ...], "val": [...], "test": [...]}
inline std::map<std::string, DatasetManifest> build_manifest(
    const fs::path& root, const fs::path& split_file,
    const IngestOptions& opts = {},
    const ClassNameMap& class_map = ClassNameMap()) {
  if (!fs::is_directory(root))
    throw ValidationError("dataset root is not a directory: " + root.string());
  const fs::path ann_dir = root / "annotations";
  if (!fs::is_directory(ann_dir))
    throw ValidationError("missing annotations directory: " + ann_dir.string());

  // Deterministic document order.
  std::vector<fs::path> documents;
  for (const auto& entry : fs::directory_iterator(ann_dir)) {
    if (entry.path().extension() == ".json") documents.push_back(entry.path());
  }
  std::sort(documents.begin(), documents.end());

  std::map<std::string, FrameAnnotation> frames_by_id;
  for (const auto& doc : documents) {
    auto frames = parse_openlabel(read_text_file(doc), class_map);
    for (auto& frame : frames) {
      if (frames_by_id.count(frame.frame_id)) {
        throw ValidationError("duplicate frame id '" + frame.frame_id +
                              "' in " + doc.string());
      }
      manifest_detail::select_streams(frame, opts);
      frames_by_id.emplace(frame.frame_id, std::move(frame));
    }
  }

  json splits;
  try {
    splits = json::parse(read_text_file(split_file));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("split file parse error: ") + e.what());
  }

  // Disjointness check across splits.
  std::map<std::string, std::string> split_of_frame;
  std::vector<std::string> offenders;
  for (const std::string split : {"train", "val", "test"}) {
    if (!splits.contains(split)) continue;
    for (const auto& id_json : splits.at(split)) {
      const auto id = id_json.get<std::string>();
      const auto [it, inserted] = split_of_frame.emplace(id, split);
      if (!inserted)
        offenders.push_back(id + " (" + it->second + ", " + split + ")");
    }
  }
  if (!offenders.empty()) {
    std::string msg = "frames assigned to multiple splits:";
    for (const auto& o : offenders) msg += " " + o;
    throw ValidationError(msg);
  }

  std::map<std::string, DatasetManifest> manifests;
  for (const std::string split : {"train", "val", "test"}) {
    DatasetManifest m;
    m.split = split;
    m.root = fs::absolute(root).lexically_normal().string();
    if (splits.contains(split)) {
      std::vector<std::string> ids =
          splits.at(split).get<std::vector<std::string>>();
      std::sort(ids.begin(), ids.end());
      for (const auto& id : ids) {
        const auto it = frames_by_id.find(id);
        if (it == frames_by_id.end())
          throw ValidationError("split '" + split + "' references unknown frame '" +
                                id + "'");
        const FrameAnnotation& frame = it->second;
        if (frame.cloud_path && !fs::exists(m.resolve(*frame.cloud_path)))
          throw ValidationError("frame '" + id + "': missing cloud file " +
                                m.resolve(*frame.cloud_path).string());
        if (frame.image_path && !fs::exists(m.resolve(*frame.image_path)))
          throw ValidationError("frame '" + id + "': missing image file " +
                                m.resolve(*frame.image_path).string());
        for (const auto& label : frame.labels) {
          ++m.class_histogram[std::string(class_name(label.class_id))];
        }
        m.frames.push_back(frame);
      }
    }
    manifests.emplace(split, std::move(m));
  }
  return manifests;
}

// ---------------------------------------------------------------------------
// Manifest JSON, schema `"manifest_version": 1`. Serialization is
// deterministic: frames sorted by id, calibration keys sorted, shortest
// round-trip float formatting.

namespace manifest_detail {

inline ordered_json box2d_json(const Box2D& b) {
  return ordered_json::array({b.x1, b.y1, b.x2, b.y2});
}

inline ordered_json box3d_json(const Box3D& b) {
  ordered_json j;
  j["center"] = {b.center.x(), b.center.y(), b.center.z()};
  j["dims"] = {b.length, b.width, b.height};
  j["yaw"] = b.yaw;
  return j;
}

inline Box3D box3d_from_json(const json& j, ObjectClass cls) {
  Box3D b;
  const auto& c = j.at("center");
  b.center = Vec3(c.at(0).get<double>(), c.at(1).get<double>(),
                  c.at(2).get<double>());
  const auto& d = j.at("dims");
  b.length = d.at(0).get<double>();
  b.width = d.at(1).get<double>();
  b.height = d.at(2).get<double>();
  b.yaw = j.at("yaw").get<double>();
  b.class_id = cls;
  b.validate();
  return b;
}

}  // namespace manifest_detail

inline std::string write_manifest(const DatasetManifest& manifest) {
  ordered_json root;
  root["manifest_version"] = 1;
  root["split"] = manifest.split;
  root["root"] = manifest.root;
  ordered_json frames = ordered_json::array();
  for (const auto& frame : manifest.frames) {
    ordered_json f;
    f["frame_id"] = frame.frame_id;
    f["cloud_path"] = frame.cloud_path ? ordered_json(*frame.cloud_path)
                                       : ordered_json(nullptr);
    f["image_path"] = frame.image_path ? ordered_json(*frame.image_path)
                                       : ordered_json(nullptr);
    ordered_json calib = ordered_json::object();
    for (const auto& [name, c] : frame.calibration) {
      ordered_json k;
      k["intrinsics"] = {{"fx", c.intrinsics.fx}, {"fy", c.intrinsics.fy},
                         {"cx", c.intrinsics.cx}, {"cy", c.intrinsics.cy},
                         {"width", c.intrinsics.width},
                         {"height", c.intrinsics.height}};
      std::vector<double> rot(9);
      for (int r = 0; r < 3; ++r)
        for (int cc = 0; cc < 3; ++cc) rot[r * 3 + cc] = c.sensor_to_camera.rotation(r, cc);
      k["sensor_to_camera"] = {
          {"rotation", rot},
          {"translation", {c.sensor_to_camera.translation.x(),
                           c.sensor_to_camera.translation.y(),
                           c.sensor_to_camera.translation.z()}}};
      k["distortion"] = c.distortion;
      calib[name] = k;
    }
    f["calibration"] = calib;
    ordered_json labels = ordered_json::array();
    for (const auto& label : frame.labels) {
      ordered_json l;
      l["object_id"] = label.object_id;
      l["class"] = std::string(class_name(label.class_id));
      l["raw_type"] = label.raw_type;
      l["box2d"] = label.box2d ? manifest_detail::box2d_json(*label.box2d)
                               : ordered_json(nullptr);
      l["box3d"] = label.box3d ? manifest_detail::box3d_json(*label.box3d)
                               : ordered_json(nullptr);
      l["source_sensor"] = label.source_sensor;
      labels.push_back(l);
    }
    f["labels"] = labels;
    frames.push_back(f);
  }
  root["frames"] = frames;
  ordered_json hist = ordered_json::object();
  for (const auto& [name, count] : manifest.class_histogram) hist[name] = count;
  root["class_histogram"] = hist;
  return root.dump(2) + "\n";
}

inline DatasetManifest read_manifest(const fs::path& path) {
  json root;
  try {
    root = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError("manifest parse error in " + path.string() + ": " +
                      e.what());
  }
  if (root.value("manifest_version", 0) != 1)
    throw FormatError("unsupported manifest_version in " + path.string());
  DatasetManifest m;
  m.split = root.at("split").get<std::string>();
  m.root = root.at("root").get<std::string>();
  for (const auto& f : root.at("frames")) {
    FrameAnnotation frame;
    frame.frame_id = f.at("frame_id").get<std::string>();
    if (!f.at("cloud_path").is_null())
      frame.cloud_path = f.at("cloud_path").get<std::string>();
    if (!f.at("image_path").is_null())
      frame.image_path = f.at("image_path").get<std::string>();
    for (const auto& [name, k] : f.at("calibration").items()) {
      SensorCalibration c;
      const auto& in = k.at("intrinsics");
      c.intrinsics = CameraIntrinsics{
          in.at("fx").get<double>(),    in.at("fy").get<double>(),
          in.at("cx").get<double>(),    in.at("cy").get<double>(),
          in.at("width").get<int>(),    in.at("height").get<int>()};
      c.intrinsics.validate();
      const auto& t = k.at("sensor_to_camera");
      const auto rot = t.at("rotation").get<std::vector<double>>();
      if (rot.size() != 9)
        throw FormatError("manifest calibration rotation must hold 9 values");
      for (int r = 0; r < 3; ++r)
        for (int cc = 0; cc < 3; ++cc)
          c.sensor_to_camera.rotation(r, cc) = rot[r * 3 + cc];
      const auto& trans = t.at("translation");
      c.sensor_to_camera.translation =
          Vec3(trans.at(0).get<double>(), trans.at(1).get<double>(),
               trans.at(2).get<double>());
      c.sensor_to_camera.validate(1e-6);
      c.distortion = k.at("distortion").get<std::vector<double>>();
      frame.calibration[name] = c;
    }
    for (const auto& l : f.at("labels")) {
      ObjectLabel label;
      label.object_id = l.at("object_id").get<std::string>();
      label.class_id = class_from_name_or_throw(l.at("class").get<std::string>());
      label.raw_type = l.at("raw_type").get<std::string>();
      if (!l.at("box2d").is_null()) {
        const auto& b = l.at("box2d");
        label.box2d = Box2D{b.at(0).get<double>(), b.at(1).get<double>(),
                            b.at(2).get<double>(), b.at(3).get<double>()};
        label.box2d->validate();
      }
      if (!l.at("box3d").is_null()) {
        label.box3d =
            manifest_detail::box3d_from_json(l.at("box3d"), label.class_id);
      }
      label.source_sensor = l.at("source_sensor").get<std::string>();
      frame.labels.push_back(std::move(label));
    }
    m.frames.push_back(std::move(frame));
  }
  for (const auto& [name, count] : root.at("class_histogram").items()) {
    m.class_histogram[name] = count.get<std::size_t>();
  }
  return m;
}

}  // namespace mff
