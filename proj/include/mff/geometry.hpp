#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <vector>

#include "mff/classes.hpp"
#include "mff/errors.hpp"

// Frame conventions used throughout:
//   sensor frame: x forward, y left, z up. Object "distance" means its
//   sensor-frame x coordinate.
//   camera frame: z forward, x right, y down. Depth maps store camera-frame
//   z (not ray length).
// Pixel centers sit at integer coordinates; (u, v) = (column, row).

namespace mff {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline bool finite(const Vec3& v) {
  return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

// Wraps an angle to (-pi, pi].
inline double normalize_angle(double a) {
  if (!std::isfinite(a)) throw ValidationError("non-finite angle");
  double r = std::remainder(a, 2.0 * M_PI);
  if (r <= -M_PI) r = M_PI;
  return r;
}

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0))
      throw ValidationError("intrinsics: focal lengths must be positive");
    if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height))
      throw ValidationError("intrinsics: principal point outside image");
  }
};

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }

  // Rotation by `yaw` about the up (+z) axis plus a translation.
  static RigidTransform from_yaw(double yaw, const Vec3& t = Vec3::Zero()) {
    RigidTransform T;
    const double c = std::cos(yaw), s = std::sin(yaw);
    T.rotation << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
    T.translation = t;
    return T;
  }

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  void validate(double tol = 1e-9) const {
    const Mat3 gram = rotation.transpose() * rotation;
    if ((gram - Mat3::Identity()).cwiseAbs().maxCoeff() > tol)
      throw ValidationError("rigid transform: rotation is not orthonormal");
    if (std::abs(rotation.determinant() - 1.0) > tol)
      throw ValidationError("rigid transform: rotation is not proper");
    if (!finite(translation))
      throw ValidationError("rigid transform: non-finite translation");
  }
};

// compose(a, b) applies b first, then a.
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

inline RigidTransform invert(const RigidTransform& t) {
  RigidTransform out;
  out.rotation = t.rotation.transpose();
  out.translation = -(out.rotation * t.translation);
  return out;
}

// Rotation mapping the sensor-frame ray at `azimuth` onto the +x axis
// (rotation by -azimuth about +z, no translation).
inline RigidTransform frustum_frame_for(double azimuth) {
  return RigidTransform::from_yaw(-normalize_angle(azimuth));
}

struct Box2D {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }

  bool contains(double u, double v) const {
    return u >= x1 && u <= x2 && v >= y1 && v <= y2;
  }

  void validate() const {
    if (!(x1 < x2) || !(y1 < y2))
      throw ValidationError("box2d: requires x1 < x2 and y1 < y2");
  }

  // Clamps to the valid pixel-center range [0, w-1] x [0, h-1].
  Box2D clipped_to(int image_width, int image_height) const {
    Box2D b;
    b.x1 = std::clamp(x1, 0.0, static_cast<double>(image_width - 1));
    b.x2 = std::clamp(x2, 0.0, static_cast<double>(image_width - 1));
    b.y1 = std::clamp(y1, 0.0, static_cast<double>(image_height - 1));
    b.y2 = std::clamp(y2, 0.0, static_cast<double>(image_height - 1));
    return b;
  }
};

// Yaw-only oriented cuboid in the sensor frame. dims = (length along local x,
// width along local y, height along local z).
struct Box3D {
  Vec3 center = Vec3::Zero();
  double length = 0.0;
  double width = 0.0;
  double height = 0.0;
  double yaw = 0.0;
  ObjectClass class_id = ObjectClass::other;

  void validate() const {
    if (!(length > 0.0 && width > 0.0 && height > 0.0))
      throw ValidationError("box3d: dimensions must be positive");
    if (!finite(center) || !std::isfinite(yaw))
      throw ValidationError("box3d: non-finite pose");
  }

  Box3D normalized() const {
    Box3D b = *this;
    b.yaw = normalize_angle(yaw);
    return b;
  }
};

struct PointCloud {
  std::vector<Vec3> points;
  std::vector<float> intensities;  // empty, or one entry per point in [0, 1]

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool has_intensity() const { return !intensities.empty(); }

  void validate() const {
    if (has_intensity() && intensities.size() != points.size())
      throw ValidationError("point cloud: intensity count mismatch");
    for (const Vec3& p : points) {
      if (!finite(p)) throw ValidationError("point cloud: non-finite point");
    }
  }
};

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

// Pinhole projection of a camera-frame point. No bounds clipping; callers
// filter against the image themselves.
inline PixelPoint project_point(const Vec3& p, const CameraIntrinsics& k) {
  if (!(p.z() > 0.0) || !finite(p))
    throw ValidationError("project_point: point not in front of the camera");
  PixelPoint out;
  out.u = k.cx + k.fx * p.x() / p.z();
  out.v = k.cy + k.fy * p.y() / p.z();
  out.depth = p.z();
  return out;
}

inline Vec3 backproject_pixel(double u, double v, double depth,
                              const CameraIntrinsics& k) {
  if (!(depth > 0.0) || !std::isfinite(depth))
    throw ValidationError("backproject_pixel: depth must be finite and > 0");
  return Vec3((u - k.cx) * depth / k.fx, (v - k.cy) * depth / k.fy, depth);
}

inline PointCloud transform_points(const RigidTransform& t,
                                   const PointCloud& cloud) {
  PointCloud out;
  out.points.reserve(cloud.points.size());
  for (const Vec3& p : cloud.points) out.points.push_back(t.apply(p));
  out.intensities = cloud.intensities;
  return out;
}

// Corner ordering: bottom face counter-clockwise viewed from +z starting at
// local (+l/2, +w/2, -h/2), then the top face in the same order.
inline std::array<Vec3, 8> corners_of(const Box3D& b) {
  b.validate();
  const double hl = 0.5 * b.length, hw = 0.5 * b.width, hh = 0.5 * b.height;
  const std::array<Vec3, 8> local = {
      Vec3(+hl, +hw, -hh), Vec3(-hl, +hw, -hh),
      Vec3(-hl, -hw, -hh), Vec3(+hl, -hw, -hh),
      Vec3(+hl, +hw, +hh), Vec3(-hl, +hw, +hh),
      Vec3(-hl, -hw, +hh), Vec3(+hl, -hw, +hh),
  };
  const RigidTransform pose = RigidTransform::from_yaw(b.yaw, b.center);
  std::array<Vec3, 8> out;
  for (std::size_t i = 0; i < 8; ++i) out[i] = pose.apply(local[i]);
  return out;
}

inline bool box_contains_point(const Box3D& b, const Vec3& p) {
  const RigidTransform to_box =
      invert(RigidTransform::from_yaw(b.yaw, b.center));
  const Vec3 q = to_box.apply(p);
  return std::abs(q.x()) <= 0.5 * b.length &&
         std::abs(q.y()) <= 0.5 * b.width &&
         std::abs(q.z()) <= 0.5 * b.height;
}

// Boundary points count as inside.
inline std::size_t points_in_box(const Box3D& b, const PointCloud& cloud) {
  b.validate();
  const RigidTransform to_box =
      invert(RigidTransform::from_yaw(b.yaw, b.center));
  const double hl = 0.5 * b.length, hw = 0.5 * b.width, hh = 0.5 * b.height;
  std::size_t count = 0;
  for (const Vec3& p : cloud.points) {
    const Vec3 q = to_box.apply(p);
    if (std::abs(q.x()) <= hl && std::abs(q.y()) <= hw && std::abs(q.z()) <= hh)
      ++count;
  }
  return count;
}

// Applies an up-axis rigid motion to a box. Rejects transforms that would
// tilt the box out of the yaw-only parameterization.
inline Box3D transform_box(const RigidTransform& t, const Box3D& b) {
  if (std::abs(t.rotation(2, 2) - 1.0) > 1e-9 ||
      std::abs(t.rotation(0, 2)) > 1e-9 || std::abs(t.rotation(1, 2)) > 1e-9 ||
      std::abs(t.rotation(2, 0)) > 1e-9 || std::abs(t.rotation(2, 1)) > 1e-9) {
    throw ValidationError("transform_box: rotation must be about the up axis");
  }
  Box3D out = b;
  out.center = t.apply(b.center);
  out.yaw = normalize_angle(b.yaw + std::atan2(t.rotation(1, 0), t.rotation(0, 0)));
  return out;
}

// Camera frame (z fwd, x right, y down) expressed from the sensor frame
// (x fwd, y left, z up): the canonical axis permutation used when a dataset
// provides no extrinsic calibration and in synthetic scenes.
inline RigidTransform canonical_sensor_to_camera(const Vec3& camera_position_in_sensor = Vec3::Zero()) {
  RigidTransform t;
  t.rotation << 0.0, -1.0, 0.0,
                0.0, 0.0, -1.0,
                1.0, 0.0, 0.0;
  t.translation = -(t.rotation * camera_position_in_sensor);
  return t;
}

}  // namespace mff
