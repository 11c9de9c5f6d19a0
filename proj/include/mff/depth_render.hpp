#pragma once

#include <cmath>

#include "mff/depth_map.hpp"
#include "mff/geometry.hpp"

namespace mff {

// Projects a sensor-frame cloud into a sparse z-depth raster. Multiple points
// landing on one pixel are z-buffered (minimum depth wins). Points behind the
// camera or off the image are discarded.
inline SparseDepth render_sparse_depth(const PointCloud& cloud,
                                       const RigidTransform& sensor_to_camera,
                                       const CameraIntrinsics& k) {
  k.validate();
  sensor_to_camera.validate();
  DepthMap map(k.width, k.height);
  for (const Vec3& p : cloud.points) {
    const Vec3 cam = sensor_to_camera.apply(p);
    if (!(cam.z() > 0.0)) continue;
    const double u = k.cx + k.fx * cam.x() / cam.z();
    const double v = k.cy + k.fy * cam.y() / cam.z();
    const long col = std::lround(u);
    const long row = std::lround(v);
    if (col < 0 || col >= k.width || row < 0 || row >= k.height) continue;
    float& cell = map.at(static_cast<int>(row), static_cast<int>(col));
    const auto depth = static_cast<float>(cam.z());
    if (!std::isfinite(cell) || depth < cell) cell = depth;
  }
  return SparseDepth(std::move(map));
}

}  // namespace mff
