#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <string>

#include "mff/json_util.hpp"
#include "mff/depth_map.hpp"
#include "mff/frustum.hpp"

namespace mff {

// Top-down raster of a frustum-frame cloud. The window is centered at the
// fused distance along +x and symmetric laterally:
//   x in [fused - L/2, fused + L/2], y in [-W/2, W/2].
// Cell (ix, iy) covers [min + i*res, min + (i+1)*res); the max edge belongs
// to the last cell. Channels: occupancy {0,1}, density (raw point count),
// max_height (meters, NaN where empty). Linear index = ix * cells_y + iy.
struct BevGrid {
  int cells_x = 0;  // forward
  int cells_y = 0;  // lateral
  double resolution = 0.0;
  double x_min = 0.0;
  double x_max = 0.0;
  double y_half_width = 0.0;
  std::vector<float> occupancy;
  std::vector<float> density;
  std::vector<float> max_height;
  std::array<double, kNumEvalClasses> class_prior{};  // one-hot
  std::size_t dropped_points = 0;

  std::size_t index(int ix, int iy) const {
    return static_cast<std::size_t>(ix) * cells_y + iy;
  }

  double density_sum() const {
    double sum = 0.0;
    for (float v : density) sum += v;
    return sum;
  }
};

inline BevGrid rasterize_bev(const Frustum& f, double resolution = 0.25,
                             double window_length = 48.0,
                             double window_width = 48.0) {
  if (f.frame_tag != Frustum::FrameTag::frustum)
    throw ValidationError("rasterize_bev: frustum-frame cloud required");
  if (!(resolution > 0.0))
    throw ValidationError("rasterize_bev: resolution must be positive");
  if (!(window_length > 0.0) || !(window_width > 0.0))
    throw ValidationError("rasterize_bev: window must be positive");
  if (f.detection.class_id == ObjectClass::other)
    throw ValidationError("rasterize_bev: class 'other' has no prior slot");

  BevGrid grid;
  grid.resolution = resolution;
  grid.cells_x = static_cast<int>(std::lround(window_length / resolution));
  grid.cells_y = static_cast<int>(std::lround(window_width / resolution));
  if (grid.cells_x < 1 || grid.cells_y < 1)
    throw ValidationError("rasterize_bev: window smaller than one cell");
  grid.x_min = f.fused_distance - window_length / 2.0;
  grid.x_max = f.fused_distance + window_length / 2.0;
  grid.y_half_width = window_width / 2.0;
  const std::size_t n_cells =
      static_cast<std::size_t>(grid.cells_x) * grid.cells_y;
  grid.occupancy.assign(n_cells, 0.0f);
  grid.density.assign(n_cells, 0.0f);
  grid.max_height.assign(n_cells, kInvalidDepth);
  grid.class_prior[static_cast<std::size_t>(f.detection.class_id)] = 1.0;

  for (const Vec3& p : f.points.points) {
    if (p.x() < grid.x_min || p.x() > grid.x_max ||
        p.y() < -grid.y_half_width || p.y() > grid.y_half_width) {
      ++grid.dropped_points;
      continue;
    }
    int ix = static_cast<int>(std::floor((p.x() - grid.x_min) / resolution));
    int iy =
        static_cast<int>(std::floor((p.y() + grid.y_half_width) / resolution));
    ix = std::min(ix, grid.cells_x - 1);
    iy = std::min(iy, grid.cells_y - 1);
    const std::size_t cell = grid.index(ix, iy);
    grid.density[cell] += 1.0f;
    grid.occupancy[cell] = 1.0f;
    const auto z = static_cast<float>(p.z());
    if (!std::isfinite(grid.max_height[cell]) || z > grid.max_height[cell])
      grid.max_height[cell] = z;
  }
  return grid;
}

// Exports one DMAP per channel (rows = forward cells, cols = lateral cells)
// plus `<stem>.json` with the window metadata.
inline void write_bev(const std::filesystem::path& stem, const BevGrid& grid) {
  const auto as_map = [&](const std::vector<float>& values) {
    DepthMap m(grid.cells_y, grid.cells_x);
    m.values = values;
    return m;
  };
  write_dmap(stem.string() + "_occupancy.dmap", as_map(grid.occupancy));
  write_dmap(stem.string() + "_density.dmap", as_map(grid.density));
  write_dmap(stem.string() + "_max_height.dmap", as_map(grid.max_height));

  ordered_json j;
  j["resolution"] = grid.resolution;
  j["window"] = {{"x_min", grid.x_min},
                 {"x_max", grid.x_max},
                 {"y_half_width", grid.y_half_width}};
  j["cells"] = {grid.cells_x, grid.cells_y};
  j["class_prior"] = grid.class_prior;
  j["dropped_points"] = grid.dropped_points;
  std::ofstream out(stem.string() + ".json");
  if (!out)
    throw FormatError("cannot open for writing: " + stem.string() + ".json");
  out << j.dump(2) << "\n";
}

}  // namespace mff
