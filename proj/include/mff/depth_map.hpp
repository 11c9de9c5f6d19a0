#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <vector>

#include "mff/errors.hpp"
#include "mff/pclb.hpp"

// Dense depth raster, format "DMAP": magic `DMAP`, u32 LE width, u32 LE
// height, f32 LE row-major meters, NaN = invalid. Values are camera-frame
// z-depth, not ray length.

namespace mff {

inline constexpr float kInvalidDepth = std::numeric_limits<float>::quiet_NaN();

struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;  // row-major, NaN marks invalid pixels

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h) {
    if (w <= 0 || h <= 0)
      throw ValidationError("depth map dimensions must be positive");
    values.assign(static_cast<std::size_t>(w) * h, kInvalidDepth);
  }

  float& at(int row, int col) {
    return values[static_cast<std::size_t>(row) * width + col];
  }
  float at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * width + col];
  }
  bool valid_at(int row, int col) const { return std::isfinite(at(row, col)); }
  bool in_bounds(int row, int col) const {
    return row >= 0 && row < height && col >= 0 && col < width;
  }

  std::size_t size() const { return values.size(); }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (float v : values) {
      if (std::isfinite(v)) ++n;
    }
    return n;
  }

  double valid_fraction() const {
    return values.empty() ? 0.0
                          : static_cast<double>(valid_count()) /
                                static_cast<double>(values.size());
  }

  void check_shape() const {
    if (width <= 0 || height <= 0 ||
        values.size() != static_cast<std::size_t>(width) * height)
      throw ValidationError("depth map: inconsistent dimensions");
  }

  void validate() const {
    check_shape();
    for (float v : values) {
      if (std::isfinite(v) && !(v > 0.0f))
        throw ValidationError("depth map: finite values must be positive");
    }
  }
};

// A depth raster where most pixels are expected invalid (projected LiDAR).
struct SparseDepth {
  DepthMap map;

  SparseDepth() = default;
  explicit SparseDepth(DepthMap m) : map(std::move(m)) {}

  double known_fraction() const { return map.valid_fraction(); }
};

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> values;  // [0, 1]

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 0.0f) : width(w), height(h) {
    values.assign(static_cast<std::size_t>(w) * h, fill);
  }

  float at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * width + col];
  }
  float& at(int row, int col) {
    return values[static_cast<std::size_t>(row) * width + col];
  }
};

// Accepts any raster (depth, error maps); only the shape is enforced here.
inline void write_dmap(const std::filesystem::path& path, const DepthMap& map) {
  map.check_shape();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  detail::write_bytes(out, "DMAP", 4);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(map.width));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(map.height));
  for (float v : map.values) {
    if (!std::isfinite(v)) {
      // Canonical quiet-NaN pattern so outputs are byte-stable.
      const std::uint32_t qnan = 0x7FC00000u;
      std::memcpy(&v, &qnan, 4);
    }
    detail::write_le<float>(out, v);
  }
  if (!out) throw FormatError("short write: " + path.string());
}

inline DepthMap read_dmap(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open depth map: " + path.string());
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "DMAP", 4) != 0)
    throw FormatError("not a DMAP file: " + path.string());
  std::uint32_t w = 0, h = 0;
  if (!detail::read_le(in, w) || !detail::read_le(in, h))
    throw FormatError("truncated DMAP header: " + path.string());
  if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20))
    throw FormatError("implausible DMAP dimensions: " + path.string());
  DepthMap map(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    if (!detail::read_le(in, map.values[i])) {
      throw FormatError("truncated DMAP payload at byte offset " +
                        std::to_string(12 + i * 4) + ": " + path.string());
    }
  }
  return map;
}

}  // namespace mff
