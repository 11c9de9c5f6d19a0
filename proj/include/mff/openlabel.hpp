#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mff/json_util.hpp"
#include "mff/classes.hpp"
#include "mff/errors.hpp"
#include "mff/geometry.hpp"

// Parser/writer for the ASAM OpenLABEL subset used by OSDaR23-style scene
// files: objects with 2D bboxes and 3D cuboids, pinhole stream calibration,
// per-frame stream URIs. Everything else in a document is ignored.
//
// Cuboids come in two encodings and are reduced to yaw-only boxes:
//   9 values:  x y z rx ry rz sx sy sz   (Euler angles, rz is yaw)
//   10 values: x y z qx qy qz qw sx sy sz (quaternion)
// Non-yaw rotation components are discarded with a per-frame warning count.

namespace mff {

struct SensorCalibration {
  CameraIntrinsics intrinsics;
  RigidTransform sensor_to_camera;
  std::vector<double> distortion;

  bool has_nonzero_distortion() const {
    for (double d : distortion) {
      if (d != 0.0) return true;
    }
    return false;
  }
};

struct ObjectLabel {
  std::string object_id;
  ObjectClass class_id = ObjectClass::other;
  std::string raw_type;
  std::optional<Box2D> box2d;
  std::optional<Box3D> box3d;
  std::string source_sensor;

  bool paired() const { return box2d.has_value() && box3d.has_value(); }
};

struct FrameAnnotation {
  std::string frame_id;
  std::vector<ObjectLabel> labels;
  std::map<std::string, SensorCalibration> calibration;  // camera streams
  std::map<std::string, std::string> stream_uris;        // every uri seen
  std::optional<std::string> cloud_path;
  std::optional<std::string> image_path;
  int non_yaw_rotation_warnings = 0;
  bool missing_calibration = false;
};

// Retains exactly the labels carrying both a 2D box and a 3D cuboid.
inline std::vector<ObjectLabel> filter_paired(
    const std::vector<ObjectLabel>& labels) {
  std::vector<ObjectLabel> out;
  out.reserve(labels.size());
  for (const auto& label : labels) {
    if (label.paired()) out.push_back(label);
  }
  return out;
}

namespace openlabel_detail {

// Object maps are iterated in document order (ordered_json), so label
// order inside a frame follows the file.
inline double quaternion_yaw(double qx, double qy, double qz, double qw,
                             double* residual_tilt) {
  const double norm = std::sqrt(qx * qx + qy * qy + qz * qz + qw * qw);
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw FormatError("cuboid quaternion has zero or non-finite norm");
  qx /= norm;
  qy /= norm;
  qz /= norm;
  qw /= norm;
  const double roll = std::atan2(2.0 * (qw * qx + qy * qz),
                                 1.0 - 2.0 * (qx * qx + qy * qy));
  const double pitch = std::asin(std::clamp(2.0 * (qw * qy - qz * qx), -1.0, 1.0));
  *residual_tilt = std::abs(roll) + std::abs(pitch);
  return std::atan2(2.0 * (qw * qz + qx * qy), 1.0 - 2.0 * (qy * qy + qz * qz));
}

inline Box3D cuboid_to_box(const ordered_json& val, const std::string& object_id,
                           ObjectClass class_id, int* tilt_warnings) {
  if (!val.is_array() || (val.size() != 9 && val.size() != 10)) {
    throw FormatError("cuboid for object '" + object_id + "' has " +
                      std::to_string(val.size()) +
                      " values; expected 9 (Euler) or 10 (quaternion)");
  }
  Box3D box;
  box.class_id = class_id;
  box.center = Vec3(val.at(0).get<double>(), val.at(1).get<double>(),
                    val.at(2).get<double>());
  double tilt = 0.0;
  std::size_t dims_at;
  if (val.size() == 9) {
    tilt = std::abs(val.at(3).get<double>()) + std::abs(val.at(4).get<double>());
    box.yaw = val.at(5).get<double>();
    dims_at = 6;
  } else {
    box.yaw = quaternion_yaw(val.at(3).get<double>(), val.at(4).get<double>(),
                             val.at(5).get<double>(), val.at(6).get<double>(),
                             &tilt);
    dims_at = 7;
  }
  if (tilt > 1e-6) ++(*tilt_warnings);
  box.yaw = normalize_angle(box.yaw);
  box.length = val.at(dims_at).get<double>();
  box.width = val.at(dims_at + 1).get<double>();
  box.height = val.at(dims_at + 2).get<double>();
  if (!(box.length > 0.0 && box.width > 0.0 && box.height > 0.0)) {
    throw FormatError("cuboid for object '" + object_id +
                      "' has non-positive dimensions");
  }
  return box;
}

inline SensorCalibration parse_stream_calibration(
    const ordered_json& stream_props, const ordered_json& pose_matrix) {
  SensorCalibration calib;
  const auto& pin = stream_props.at("intrinsics_pinhole");
  const auto& m = pin.at("camera_matrix_3x4");
  if (!m.is_array() || m.size() != 12)
    throw FormatError("camera_matrix_3x4 must hold 12 values");
  calib.intrinsics.fx = m.at(0).get<double>();
  calib.intrinsics.cx = m.at(2).get<double>();
  calib.intrinsics.fy = m.at(5).get<double>();
  calib.intrinsics.cy = m.at(6).get<double>();
  calib.intrinsics.width = pin.at("width_px").get<int>();
  calib.intrinsics.height = pin.at("height_px").get<int>();
  calib.intrinsics.validate();
  if (pin.contains("distortion_coeffs_1xN")) {
    calib.distortion = pin.at("distortion_coeffs_1xN").get<std::vector<double>>();
  }

  if (!pose_matrix.is_null()) {
    if (!pose_matrix.is_array() || pose_matrix.size() != 16)
      throw FormatError("pose_wrt_parent matrix4x4 must hold 16 values");
    RigidTransform camera_to_sensor;  // pose of the camera in the parent frame
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        camera_to_sensor.rotation(r, c) = pose_matrix.at(r * 4 + c).get<double>();
      }
      camera_to_sensor.translation(r) = pose_matrix.at(r * 4 + 3).get<double>();
    }
    camera_to_sensor.validate(1e-6);
    calib.sensor_to_camera = invert(camera_to_sensor);
  }
  return calib;
}

}  // namespace openlabel_detail

// Parses the OpenLABEL subset out of a JSON document. Unknown class names
// map to `other`; frames without camera calibration are retained with a
// warning flag.
inline std::vector<FrameAnnotation> parse_openlabel(
    const std::string& document, const ClassNameMap& class_map = ClassNameMap()) {
  ordered_json root;
  try {
    root = ordered_json::parse(document);
  } catch (const ordered_json::parse_error& e) {
    throw FormatError(std::string("OpenLABEL parse error: ") + e.what());
  }
  if (!root.contains("openlabel"))
    throw FormatError("OpenLABEL document missing top-level 'openlabel' key");
  const ordered_json& ol = root.at("openlabel");

  // Object catalogue: uid -> dataset type name.
  std::map<std::string, std::string> object_types;
  if (ol.contains("objects")) {
    for (const auto& [uid, obj] : ol.at("objects").items()) {
      object_types[uid] = obj.value("type", std::string("unknown"));
    }
  }

  // Stream calibration, shared by all frames of the document.
  std::map<std::string, SensorCalibration> calibration;
  std::map<std::string, std::string> stream_types;
  if (ol.contains("streams")) {
    for (const auto& [name, stream] : ol.at("streams").items()) {
      const std::string type = stream.value("type", std::string());
      stream_types[name] = type;
      if (type != "camera") continue;
      if (!stream.contains("stream_properties") ||
          !stream.at("stream_properties").contains("intrinsics_pinhole"))
        continue;
      ordered_json pose;  // null unless a coordinate system carries one
      if (ol.contains("coordinate_systems") &&
          ol.at("coordinate_systems").contains(name) &&
          ol.at("coordinate_systems").at(name).contains("pose_wrt_parent")) {
        pose = ol.at("coordinate_systems")
                   .at(name)
                   .at("pose_wrt_parent")
                   .value("matrix4x4", ordered_json());
      }
      calibration[name] = openlabel_detail::parse_stream_calibration(
          stream.at("stream_properties"), pose);
    }
  }

  std::vector<FrameAnnotation> frames;
  if (!ol.contains("frames")) return frames;

  for (const auto& [frame_id, frame] : ol.at("frames").items()) {
    FrameAnnotation ann;
    ann.frame_id = frame_id;
    ann.calibration = calibration;
    ann.missing_calibration = calibration.empty();

    if (frame.contains("frame_properties") &&
        frame.at("frame_properties").contains("streams")) {
      for (const auto& [name, stream] :
           frame.at("frame_properties").at("streams").items()) {
        if (!stream.contains("uri")) continue;
        const auto uri = stream.at("uri").get<std::string>();
        ann.stream_uris[name] = uri;
        const auto type_it = stream_types.find(name);
        const std::string type =
            type_it == stream_types.end() ? "" : type_it->second;
        if (type == "lidar" && !ann.cloud_path) ann.cloud_path = uri;
        if (type == "camera" && !ann.image_path) ann.image_path = uri;
      }
    }

    if (frame.contains("objects")) {
      for (const auto& [uid, obj] : frame.at("objects").items()) {
        if (!obj.contains("object_data")) continue;
        const ordered_json& data = obj.at("object_data");
        ObjectLabel label;
        label.object_id = uid;
        const auto type_it = object_types.find(uid);
        label.raw_type =
            type_it == object_types.end() ? "unknown" : type_it->second;
        label.class_id = class_map.resolve(label.raw_type);

        if (data.contains("bbox") && !data.at("bbox").empty()) {
          const ordered_json& bbox = data.at("bbox").at(0);
          const ordered_json& val = bbox.at("val");
          if (!val.is_array() || val.size() != 4)
            throw FormatError("bbox for object '" + uid +
                              "' must hold [cx, cy, w, h]");
          const double cx = val.at(0).get<double>();
          const double cy = val.at(1).get<double>();
          const double w = val.at(2).get<double>();
          const double h = val.at(3).get<double>();
          if (!(w > 0.0 && h > 0.0))
            throw FormatError("bbox for object '" + uid +
                              "' has non-positive size");
          Box2D box{cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0};
          std::string cs = bbox.value("coordinate_system", std::string());
          if (cs.empty() && calibration.size() == 1)
            cs = calibration.begin()->first;
          const auto calib_it = calibration.find(cs);
          if (calib_it != calibration.end()) {
            box = box.clipped_to(calib_it->second.intrinsics.width,
                                 calib_it->second.intrinsics.height);
          }
          box.validate();
          label.box2d = box;
          label.source_sensor = cs;
        }

        if (data.contains("cuboid") && !data.at("cuboid").empty()) {
          const ordered_json& cuboid = data.at("cuboid").at(0);
          label.box3d = openlabel_detail::cuboid_to_box(
              cuboid.at("val"), uid, label.class_id,
              &ann.non_yaw_rotation_warnings);
          if (label.source_sensor.empty())
            label.source_sensor =
                cuboid.value("coordinate_system", std::string());
        }

        if (label.box2d || label.box3d) ann.labels.push_back(std::move(label));
      }
    }
    frames.push_back(std::move(ann));
  }
  return frames;
}

// Serializes frames back into the same OpenLABEL subset. Parsing the result
// reproduces the annotations field-for-field.
inline std::string write_openlabel(const std::vector<FrameAnnotation>& frames) {
  ordered_json ol;
  ol["metadata"] = {{"schema_version", "1.0.0"}};

  ordered_json objects = ordered_json::object();
  ordered_json out_frames = ordered_json::object();
  ordered_json streams = ordered_json::object();
  ordered_json coordinate_systems = ordered_json::object();
  coordinate_systems["base"] = {{"type", "local"}, {"parent", ""}};

  bool lidar_stream_needed = false;
  for (const auto& frame : frames) {
    if (frame.cloud_path) lidar_stream_needed = true;
  }
  if (lidar_stream_needed) streams["lidar"] = {{"type", "lidar"}};

  if (!frames.empty()) {
    for (const auto& [name, calib] : frames.front().calibration) {
      ordered_json pin;
      pin["camera_matrix_3x4"] = {calib.intrinsics.fx, 0.0, calib.intrinsics.cx,
                                  0.0, 0.0, calib.intrinsics.fy,
                                  calib.intrinsics.cy, 0.0, 0.0, 0.0, 1.0, 0.0};
      pin["width_px"] = calib.intrinsics.width;
      pin["height_px"] = calib.intrinsics.height;
      if (!calib.distortion.empty())
        pin["distortion_coeffs_1xN"] = calib.distortion;
      streams[name] = {{"type", "camera"},
                       {"stream_properties", {{"intrinsics_pinhole", pin}}}};

      const RigidTransform camera_to_sensor = invert(calib.sensor_to_camera);
      std::vector<double> mat(16, 0.0);
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) mat[r * 4 + c] = camera_to_sensor.rotation(r, c);
        mat[r * 4 + 3] = camera_to_sensor.translation(r);
      }
      mat[15] = 1.0;
      coordinate_systems[name] = {{"type", "sensor"},
                                  {"parent", "base"},
                                  {"pose_wrt_parent", {{"matrix4x4", mat}}}};
    }
  }

  for (const auto& frame : frames) {
    ordered_json frame_objects = ordered_json::object();
    for (const auto& label : frame.labels) {
      if (!objects.contains(label.object_id)) {
        objects[label.object_id] = {{"name", label.object_id},
                                    {"type", label.raw_type}};
      }
      ordered_json data = ordered_json::object();
      if (label.box2d) {
        const Box2D& b = *label.box2d;
        ordered_json bbox;
        bbox["name"] = "bbox";
        if (!label.source_sensor.empty())
          bbox["coordinate_system"] = label.source_sensor;
        bbox["val"] = {0.5 * (b.x1 + b.x2), 0.5 * (b.y1 + b.y2), b.width(),
                       b.height()};
        data["bbox"] = ordered_json::array({bbox});
      }
      if (label.box3d) {
        const Box3D& b = *label.box3d;
        ordered_json cuboid;
        cuboid["name"] = "cuboid";
        cuboid["coordinate_system"] = "base";
        cuboid["val"] = {b.center.x(),
                         b.center.y(),
                         b.center.z(),
                         0.0,
                         0.0,
                         std::sin(b.yaw / 2.0),
                         std::cos(b.yaw / 2.0),
                         b.length,
                         b.width,
                         b.height};
        data["cuboid"] = ordered_json::array({cuboid});
      }
      frame_objects[label.object_id] = {{"object_data", data}};
    }

    ordered_json props = ordered_json::object();
    ordered_json prop_streams = ordered_json::object();
    if (frame.cloud_path) prop_streams["lidar"] = {{"uri", *frame.cloud_path}};
    if (frame.image_path && !frame.calibration.empty()) {
      prop_streams[frame.calibration.begin()->first] = {
          {"uri", *frame.image_path}};
    }
    ordered_json out_frame = ordered_json::object();
    out_frame["objects"] = frame_objects;
    if (!prop_streams.empty()) {
      props["streams"] = prop_streams;
      out_frame["frame_properties"] = props;
    }
    out_frames[frame.frame_id] = out_frame;
  }

  ol["coordinate_systems"] = coordinate_systems;
  ol["streams"] = streams;
  ol["objects"] = objects;
  ol["frames"] = out_frames;

  ordered_json root;
  root["openlabel"] = ol;
  return root.dump(2) + "\n";
}

// Class-name mapping table IO: a flat JSON object {dataset_name: canonical}.
inline ClassNameMap read_class_map(const std::string& document) {
  json root;
  try {
    root = json::parse(document);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("class map parse error: ") + e.what());
  }
  std::map<std::string, ObjectClass> entries;
  for (const auto& [key, value] : root.items()) {
    entries[key] = class_from_name_or_throw(value.get<std::string>());
  }
  return ClassNameMap(std::move(entries));
}

inline std::string write_class_map(const ClassNameMap& map) {
  ordered_json root;
  for (const auto& [name, cls] : map.entries()) {
    root[name] = std::string(class_name(cls));
  }
  return root.dump(2) + "\n";
}

}  // namespace mff
