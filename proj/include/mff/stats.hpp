#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "mff/manifest.hpp"
#include "mff/pclb.hpp"

namespace mff {

struct DistancePointsRow {
  std::string frame_id;
  std::string object_id;
  ObjectClass class_id = ObjectClass::other;
  double gt_x = 0.0;
  std::size_t points_in_box = 0;
};

// Per paired label: (GT sensor-frame x, LiDAR points inside the 3D box).
// Frames without a cloud are skipped and counted in `skipped_frames`.
inline std::vector<DistancePointsRow> distance_points_stats(
    const DatasetManifest& manifest, std::size_t* skipped_frames = nullptr) {
  std::vector<DistancePointsRow> rows;
  std::size_t skipped = 0;
  for (const auto& frame : manifest.frames) {
    if (!frame.cloud_path) {
      ++skipped;
      continue;
    }
    const PointCloud cloud = read_point_cloud(manifest.resolve(*frame.cloud_path));
    for (const auto& label : filter_paired(frame.labels)) {
      if (label.class_id == ObjectClass::other) continue;
      DistancePointsRow row;
      row.frame_id = frame.frame_id;
      row.object_id = label.object_id;
      row.class_id = label.class_id;
      row.gt_x = label.box3d->center.x();
      row.points_in_box = points_in_box(*label.box3d, cloud);
      rows.push_back(std::move(row));
    }
  }
  if (skipped_frames) *skipped_frames = skipped;
  return rows;
}

inline std::string stats_to_csv(const std::vector<DistancePointsRow>& rows) {
  std::ostringstream os;
  os << "class,gt_x,points\n";
  for (const auto& row : rows) {
    os << class_name(row.class_id) << "," << row.gt_x << ","
       << row.points_in_box << "\n";
  }
  return os.str();
}

}  // namespace mff
