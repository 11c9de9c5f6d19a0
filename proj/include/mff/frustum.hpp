#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mff/classes.hpp"
#include "mff/depth_map.hpp"
#include "mff/detections.hpp"
#include "mff/errors.hpp"
#include "mff/geometry.hpp"

namespace mff {

enum class CentroidStatistic { mean, median };

enum class Route { short_range, long_range };

inline std::string_view route_name(Route r) {
  return r == Route::short_range ? "short" : "long";
}

inline Route route_from_name(std::string_view name) {
  if (name == "short") return Route::short_range;
  if (name == "long") return Route::long_range;
  throw ValidationError("unknown route: " + std::string(name));
}

struct FusionConfig {
  // Weight of the frustum centroid in the fused distance; (1 - w) goes to
  // the detector's distance estimate.
  double centroid_weight = 0.5;
  PerClass<double> route_thresholds_m{100.0};
  CentroidStatistic centroid_statistic = CentroidStatistic::median;
  double trim_fraction = 0.0;

  void validate() const {
    if (!(centroid_weight >= 0.0 && centroid_weight <= 1.0))
      throw ValidationError("fusion: centroid_weight must be in [0, 1]");
    if (!(trim_fraction >= 0.0 && trim_fraction < 0.25))
      throw ValidationError("fusion: trim_fraction must be in [0, 0.25)");
    for (ObjectClass c : kEvalClasses) {
      if (!(route_thresholds_m[c] > 0.0))
        throw ValidationError("fusion: route threshold for class '" +
                              std::string(class_name(c)) +
                              "' must be positive");
    }
  }
};

struct Frustum {
  Detection25D detection;
  std::string frame_id;
  int detection_index = -1;  // frustum_ref
  PointCloud points;         // frame per frame_tag
  double centroid_distance = 0.0;  // sensor-frame forward (x) statistic
  double fused_distance = 0.0;
  double azimuth = 0.0;  // of the fused center ray
  enum class FrameTag { sensor, frustum } frame_tag = FrameTag::sensor;
  bool synthetic = false;
};

struct RoutingDecision {
  Route route = Route::short_range;
  double fused_distance = 0.0;
  double threshold_used = 0.0;
};

// ---------------------------------------------------------------------------

// Back-projects every stride-th valid pixel (rows and columns both strided
// from 0) into the sensor frame, in row-major pixel order.
inline PointCloud backproject_depth_map(const DepthMap& depth,
                                        const CameraIntrinsics& k,
                                        const RigidTransform& camera_to_sensor,
                                        int stride = 1) {
  if (stride < 1) throw ValidationError("stride must be >= 1");
  depth.check_shape();
  PointCloud cloud;
  for (int r = 0; r < depth.height; r += stride) {
    for (int c = 0; c < depth.width; c += stride) {
      const float d = depth.at(r, c);
      if (!std::isfinite(d)) continue;
      cloud.points.push_back(
          camera_to_sensor.apply(backproject_pixel(c, r, d, k)));
    }
  }
  return cloud;
}

namespace frustum_detail {

inline double statistic(std::vector<double>& values, CentroidStatistic stat) {
  if (stat == CentroidStatistic::mean) {
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
  }
  // Median: mean of the middle pair for even counts.
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace frustum_detail

// Cuts the 2D box out of the depth map, back-projects it into the sensor
// frame, optionally trims the forward-distance tails, and fuses the centroid
// distance with the detector's estimate:
//   fused = w * centroid + (1 - w) * detection.distance_m
// Throws ValidationError when no valid depth pixel falls inside the box;
// callers may substitute `synthetic_frustum`.
inline Frustum extract_frustum(const Detection25D& det, const DepthMap& depth,
                               const CameraIntrinsics& k,
                               const RigidTransform& camera_to_sensor,
                               const FusionConfig& cfg = {}) {
  det.validate();
  cfg.validate();
  const Box2D box = det.box2d.clipped_to(k.width, k.height);
  box.validate();

  Frustum f;
  f.detection = det;

  // Pixel centers sit at integer coordinates; gather those inside the box.
  const int c0 = static_cast<int>(std::ceil(box.x1));
  const int c1 = static_cast<int>(std::floor(box.x2));
  const int r0 = static_cast<int>(std::ceil(box.y1));
  const int r1 = static_cast<int>(std::floor(box.y2));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      if (!depth.in_bounds(r, c) || !depth.valid_at(r, c)) continue;
      f.points.points.push_back(
          camera_to_sensor.apply(backproject_pixel(c, r, depth.at(r, c), k)));
    }
  }
  if (f.points.empty())
    throw ValidationError("empty frustum: no valid depth inside the box");

  if (cfg.trim_fraction > 0.0 && f.points.size() > 2) {
    std::vector<std::size_t> order(f.points.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return f.points.points[a].x() < f.points.points[b].x();
    });
    std::size_t cut = static_cast<std::size_t>(
        std::floor(cfg.trim_fraction * static_cast<double>(order.size())));
    while (order.size() - 2 * cut < 1) --cut;
    std::vector<Vec3> kept;
    kept.reserve(order.size() - 2 * cut);
    for (std::size_t i = cut; i < order.size() - cut; ++i)
      kept.push_back(f.points.points[order[i]]);
    f.points.points = std::move(kept);
  }

  std::vector<double> forward, lateral;
  forward.reserve(f.points.size());
  lateral.reserve(f.points.size());
  for (const Vec3& p : f.points.points) {
    forward.push_back(p.x());
    lateral.push_back(p.y());
  }
  f.centroid_distance = frustum_detail::statistic(forward, cfg.centroid_statistic);
  f.fused_distance = cfg.centroid_weight * f.centroid_distance +
                     (1.0 - cfg.centroid_weight) * det.distance_m;
  const double lateral_center =
      frustum_detail::statistic(lateral, cfg.centroid_statistic);
  f.azimuth = std::atan2(lateral_center, f.fused_distance);
  return f;
}

// Fallback for empty frustums: one point on the box-center ray at the
// detector's distance, flagged synthetic so evaluation can exclude it.
inline Frustum synthetic_frustum(const Detection25D& det,
                                 const CameraIntrinsics& k,
                                 const RigidTransform& camera_to_sensor,
                                 const FusionConfig& cfg = {}) {
  det.validate();
  cfg.validate();
  const double u = 0.5 * (det.box2d.x1 + det.box2d.x2);
  const double v = 0.5 * (det.box2d.y1 + det.box2d.y2);
  const Vec3 dir_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
  const Vec3 dir_sensor = camera_to_sensor.rotation * dir_cam;
  const Vec3 origin_sensor = camera_to_sensor.translation;
  double t = det.distance_m;
  if (dir_sensor.x() > 1e-9) {
    t = (det.distance_m - origin_sensor.x()) / dir_sensor.x();
  }
  const Vec3 p = origin_sensor + t * dir_sensor;

  Frustum f;
  f.detection = det;
  f.points.points = {p};
  f.centroid_distance = p.x();
  f.fused_distance = cfg.centroid_weight * f.centroid_distance +
                     (1.0 - cfg.centroid_weight) * det.distance_m;
  f.azimuth = std::atan2(p.y(), f.fused_distance);
  f.synthetic = true;
  return f;
}

// Long route iff fused distance strictly exceeds the class threshold; ties
// stay short.
inline RoutingDecision route(const Frustum& f, const FusionConfig& cfg) {
  if (f.detection.class_id == ObjectClass::other)
    throw ValidationError("routing: class 'other' has no route threshold");
  RoutingDecision decision;
  decision.fused_distance = f.fused_distance;
  decision.threshold_used = cfg.route_thresholds_m[f.detection.class_id];
  decision.route = f.fused_distance > decision.threshold_used
                       ? Route::long_range
                       : Route::short_range;
  return decision;
}

// Rotates the frustum cloud so its fused center ray lies along +x.
inline Frustum to_frustum_frame(const Frustum& f) {
  if (f.frame_tag == Frustum::FrameTag::frustum)
    throw ValidationError("frustum already transformed to the frustum frame");
  Frustum out = f;
  out.points = transform_points(frustum_frame_for(f.azimuth), f.points);
  out.frame_tag = Frustum::FrameTag::frustum;
  return out;
}

inline Frustum to_sensor_frame(const Frustum& f) {
  if (f.frame_tag == Frustum::FrameTag::sensor)
    throw ValidationError("frustum already in the sensor frame");
  Frustum out = f;
  out.points = transform_points(invert(frustum_frame_for(f.azimuth)), f.points);
  out.frame_tag = Frustum::FrameTag::sensor;
  return out;
}

// ---------------------------------------------------------------------------

inline double normalize_distance(double meters) {
  if (!(meters >= 0.0 && meters <= kMaxDetectionDistance))
    throw ValidationError("normalize_distance: input outside [0, 250] m");
  return meters / kMaxDetectionDistance;
}

inline double denormalize_distance(double normalized) {
  if (!(normalized >= 0.0 && normalized <= 1.0))
    throw ValidationError("denormalize_distance: input outside [0, 1]");
  return normalized * kMaxDetectionDistance;
}

inline double huber(double residual, double delta) {
  if (!(delta > 0.0)) throw ValidationError("huber: delta must be positive");
  const double a = std::abs(residual);
  return a <= delta ? 0.5 * residual * residual : delta * (a - 0.5 * delta);
}

}  // namespace mff
