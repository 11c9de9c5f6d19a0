#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mff/config.hpp"
#include "mff/depth_map.hpp"
#include "mff/detections.hpp"
#include "mff/frustum.hpp"
#include "mff/geometry.hpp"
#include "mff/manifest.hpp"
#include "mff/pclb.hpp"
#include "mff/rng.hpp"

// Synthetic scene generator: cuboids standing on a flat ground plane,
// rendered into analytic depth maps through the pinhole camera, with exact
// 2.5D detections and OpenLABEL annotations. This is the oracle data source
// for the end-to-end tests; no external dataset is required.
//
// Placement puts each object in its own azimuth slot so silhouettes never
// overlap or occlude each other, and keeps every object clear of the 100 m
// routing boundary (shorts below 92 m, longs above 108 m). Object depth
// extents are kept small so the visible-surface bias of the frustum centroid
// stays well inside one BEV cell.

namespace mff {

struct SynthConfig {
  int frames = 2;
  int objects_per_frame = 20;
  std::uint64_t seed = 1;
  // Std-dev of Gaussian noise added to emitted detection distances. The
  // underlying unit draws depend only on the seed, so sweeping sigma scales
  // the same perturbations.
  double distance_noise_sigma = 0.0;
  CameraIntrinsics camera{2000.0, 2000.0, 960.0, 540.0, 1920, 1080};
  double ground_z = -3.0;  // sensor origin sits 3 m above the ground
  int cloud_stride = 4;

  void validate() const {
    if (frames < 1) throw ValidationError("synth: frames must be >= 1");
    if (objects_per_frame < 1)
      throw ValidationError("synth: objects_per_frame must be >= 1");
    if (!(distance_noise_sigma >= 0.0))
      throw ValidationError("synth: noise sigma must be >= 0");
    if (cloud_stride < 1) throw ValidationError("synth: cloud_stride >= 1");
    camera.validate();
  }
};

struct SynthFrame {
  std::string frame_id;
  std::vector<Box3D> objects;
  DepthMap depth;
  std::vector<Detection25D> detections;
  PointCloud cloud;
  FrameAnnotation annotation;
};

struct SynthScene {
  std::vector<SynthFrame> frames;
  CameraIntrinsics camera;
  RigidTransform sensor_to_camera;
};

namespace synth_detail {

struct ClassSpec {
  ObjectClass cls;
  double length, width, height;
  double min_short_m;  // keeps thin/low objects fully visible and slots clear
};

// Slot order interleaves wide and narrow classes so adjacent azimuth slots
// never collide even at minimum distances.
inline const std::vector<ClassSpec>& class_specs() {
  static const std::vector<ClassSpec> specs = {
      {ObjectClass::buffer_stop, 0.8, 2.4, 1.2, 50.0},
      {ObjectClass::signal_pole, 0.3, 0.3, 3.5, 12.0},
      {ObjectClass::person, 0.4, 0.5, 1.7, 12.0},
      {ObjectClass::road_vehicle, 0.8, 1.8, 1.6, 50.0},
      {ObjectClass::catenary_pole, 0.4, 0.4, 6.0, 12.0},
  };
  return specs;
}

inline constexpr double kShortMax = 92.0;
inline constexpr double kLongMin = 108.0;
inline constexpr double kLongMax = 240.0;
inline constexpr double kAzimuthSpanDeg = 47.0;  // slots fill [-23.5, 23.5] deg

// First positive ray parameter hitting the box, +inf when the ray misses.
// The ray starts at the origin; t is the camera z-depth when `dir` comes
// from an unnormalized pinhole ray with unit camera-z component.
inline double ray_box_entry(const Vec3& dir, const Box3D& box) {
  const RigidTransform to_box = invert(RigidTransform::from_yaw(box.yaw, box.center));
  const Vec3 d = to_box.rotation * dir;
  const Vec3 o = to_box.apply(Vec3::Zero());
  const double half[3] = {0.5 * box.length, 0.5 * box.width, 0.5 * box.height};
  double t_enter = 0.0, t_exit = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    if (std::abs(d[axis]) < 1e-12) {
      if (std::abs(o[axis]) > half[axis])
        return std::numeric_limits<double>::infinity();
      continue;
    }
    double t0 = (-half[axis] - o[axis]) / d[axis];
    double t1 = (half[axis] - o[axis]) / d[axis];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
  }
  if (t_exit < t_enter || t_exit <= 0.0)
    return std::numeric_limits<double>::infinity();
  return t_enter > 0.1 ? t_enter : std::numeric_limits<double>::infinity();
}

inline Box2D project_bbox(const Box3D& box, const CameraIntrinsics& k,
                          const RigidTransform& sensor_to_camera) {
  double u0 = 1e18, v0 = 1e18, u1 = -1e18, v1 = -1e18;
  for (const Vec3& corner : corners_of(box)) {
    const auto px = project_point(sensor_to_camera.apply(corner), k);
    u0 = std::min(u0, px.u);
    u1 = std::max(u1, px.u);
    v0 = std::min(v0, px.v);
    v1 = std::max(v1, px.v);
  }
  return Box2D{u0, v0, u1, v1}.clipped_to(k.width, k.height);
}

}  // namespace synth_detail

inline SynthScene generate_synth_scene(const SynthConfig& cfg) {
  cfg.validate();
  SynthScene scene;
  scene.camera = cfg.camera;
  scene.sensor_to_camera = canonical_sensor_to_camera();
  const RigidTransform camera_to_sensor = invert(scene.sensor_to_camera);

  Rng placement_rng(cfg.seed);
  Rng noise_rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);

  const auto& specs = synth_detail::class_specs();
  const int n = cfg.objects_per_frame;
  const double slot_deg = synth_detail::kAzimuthSpanDeg / n;

  for (int frame_idx = 0; frame_idx < cfg.frames; ++frame_idx) {
    SynthFrame frame;
    {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "%06d", frame_idx);
      frame.frame_id = buf;
    }

    for (int slot = 0; slot < n; ++slot) {
      const auto& spec = specs[slot % specs.size()];
      const int instance = slot / static_cast<int>(specs.size());
      const bool go_long = instance % 2 == 1;
      const double lo = go_long ? synth_detail::kLongMin : spec.min_short_m;
      const double hi = go_long ? synth_detail::kLongMax : synth_detail::kShortMax;
      const double distance = placement_rng.uniform(lo, hi);
      const double azimuth_deg =
          -synth_detail::kAzimuthSpanDeg / 2.0 + (slot + 0.5) * slot_deg;
      const double azimuth = azimuth_deg * M_PI / 180.0;

      Box3D box;
      box.class_id = spec.cls;
      box.length = spec.length;
      box.width = spec.width;
      box.height = spec.height;
      box.yaw = 0.0;
      box.center = Vec3(distance, std::tan(azimuth) * distance,
                        cfg.ground_z + spec.height / 2.0);
      frame.objects.push_back(box);
    }

    // Silhouettes must stay disjoint for the oracle guarantees to hold.
    std::vector<Box2D> bboxes;
    for (const auto& box : frame.objects) {
      bboxes.push_back(
          synth_detail::project_bbox(box, cfg.camera, scene.sensor_to_camera));
    }
    for (std::size_t i = 0; i < bboxes.size(); ++i) {
      for (std::size_t j = i + 1; j < bboxes.size(); ++j) {
        const bool overlap = bboxes[i].x1 < bboxes[j].x2 &&
                             bboxes[j].x1 < bboxes[i].x2 &&
                             bboxes[i].y1 < bboxes[j].y2 &&
                             bboxes[j].y1 < bboxes[i].y2;
        if (overlap)
          throw ValidationError("synth: slot placement produced overlapping "
                                "silhouettes; reduce objects_per_frame");
      }
    }

    // Analytic depth render: nearest of ground plane and object surfaces.
    frame.depth = DepthMap(cfg.camera.width, cfg.camera.height);
    for (int r = 0; r < cfg.camera.height; ++r) {
      for (int c = 0; c < cfg.camera.width; ++c) {
        const Vec3 dir_cam((c - cfg.camera.cx) / cfg.camera.fx,
                           (r - cfg.camera.cy) / cfg.camera.fy, 1.0);
        const Vec3 dir = camera_to_sensor.rotation * dir_cam;
        double t_hit = std::numeric_limits<double>::infinity();
        if (dir.z() < -1e-12) {
          t_hit = std::min(t_hit, cfg.ground_z / dir.z());
        }
        for (const auto& box : frame.objects) {
          t_hit = std::min(t_hit, synth_detail::ray_box_entry(dir, box));
        }
        if (std::isfinite(t_hit)) {
          frame.depth.at(r, c) = static_cast<float>(t_hit);
        }
      }
    }

    // Exact 2.5D detections; optional Gaussian distance noise.
    for (std::size_t i = 0; i < frame.objects.size(); ++i) {
      const auto& box = frame.objects[i];
      Detection25D det;
      det.box2d = bboxes[i];
      det.class_id = box.class_id;
      det.confidence = 1.0;
      const double unit_noise = noise_rng.normal();
      det.distance_m =
          std::clamp(box.center.x() + cfg.distance_noise_sigma * unit_noise,
                     0.0, kMaxDetectionDistance);
      frame.detections.push_back(det);
    }

    frame.cloud = backproject_depth_map(frame.depth, cfg.camera,
                                        camera_to_sensor, cfg.cloud_stride);

    // Annotation mirroring what a dataset would carry.
    frame.annotation.frame_id = frame.frame_id;
    SensorCalibration calib;
    calib.intrinsics = cfg.camera;
    calib.sensor_to_camera = scene.sensor_to_camera;
    frame.annotation.calibration["rgb"] = calib;
    frame.annotation.cloud_path = "clouds/" + frame.frame_id + ".pclb";
    for (std::size_t i = 0; i < frame.objects.size(); ++i) {
      ObjectLabel label;
      label.object_id = frame.frame_id + "_obj" + std::to_string(i);
      label.class_id = frame.objects[i].class_id;
      label.raw_type = std::string(class_name(label.class_id));
      label.box2d = bboxes[i];
      label.box3d = frame.objects[i];
      label.source_sensor = "rgb";
      frame.annotation.labels.push_back(std::move(label));
    }

    scene.frames.push_back(std::move(frame));
  }
  return scene;
}

// Writes the dataset tree consumed by ingest plus the detections and perfect
// depth maps:
//   <root>/annotations/scene.json   <root>/clouds/*.pclb
//   <root>/depths/*.dmap            <root>/splits.json
//   <root>/detections.jsonl
// Frames alternate train/test (frame 0 is train).
inline void write_synth_dataset(const fs::path& root, const SynthScene& scene) {
  fs::create_directories(root / "annotations");
  fs::create_directories(root / "clouds");
  fs::create_directories(root / "depths");

  std::vector<FrameAnnotation> annotations;
  ordered_json train = ordered_json::array();
  ordered_json test = ordered_json::array();
  std::map<std::string, std::vector<Detection25D>> detections;
  for (std::size_t i = 0; i < scene.frames.size(); ++i) {
    const auto& frame = scene.frames[i];
    annotations.push_back(frame.annotation);
    write_point_cloud(root / *frame.annotation.cloud_path, frame.cloud);
    write_dmap(root / "depths" / (frame.frame_id + ".dmap"), frame.depth);
    (i % 2 == 0 ? train : test).push_back(frame.frame_id);
    detections[frame.frame_id] = frame.detections;
  }
  write_text_file(root / "annotations" / "scene.json",
                  write_openlabel(annotations));
  ordered_json splits;
  splits["train"] = train;
  splits["val"] = ordered_json::array();
  splits["test"] = test;
  write_text_file(root / "splits.json", splits.dump(2) + "\n");
  write_detections_jsonl(root / "detections.jsonl", detections);
}

}  // namespace mff
