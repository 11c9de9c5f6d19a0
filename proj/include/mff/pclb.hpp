#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mff/errors.hpp"
#include "mff/geometry.hpp"

// Point cloud interchange, format "PCLB": magic bytes `PCLB`, u32
// little-endian point count, u8 fields-per-point (3 = xyz, 4 = xyz +
// intensity), then f32 little-endian records. Files without the magic are
// parsed as ASCII `x y z [intensity]` lines.

static_assert(std::endian::native == std::endian::little,
              "binary formats are defined little-endian");

namespace mff {

namespace detail {

inline void write_bytes(std::ostream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

template <typename T>
void write_le(std::ostream& out, T value) {
  write_bytes(out, &value, sizeof(T));
}

template <typename T>
bool read_le(std::istream& in, T& value) {
  return static_cast<bool>(
      in.read(reinterpret_cast<char*>(&value), sizeof(T)));
}

}  // namespace detail

inline void write_point_cloud(const std::filesystem::path& path,
                              const PointCloud& cloud) {
  cloud.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path.string());
  const std::uint8_t fields = cloud.has_intensity() ? 4 : 3;
  detail::write_bytes(out, "PCLB", 4);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(cloud.size()));
  detail::write_le<std::uint8_t>(out, fields);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    detail::write_le<float>(out, static_cast<float>(p.x()));
    detail::write_le<float>(out, static_cast<float>(p.y()));
    detail::write_le<float>(out, static_cast<float>(p.z()));
    if (fields == 4) detail::write_le<float>(out, cloud.intensities[i]);
  }
  if (!out) throw FormatError("short write: " + path.string());
}

// `dropped_non_finite`, when non-null, receives the number of records
// discarded because a coordinate was not finite.
inline PointCloud read_point_cloud(const std::filesystem::path& path,
                                   std::size_t* dropped_non_finite = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open point cloud: " + path.string());
  std::size_t dropped = 0;
  PointCloud cloud;

  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  const bool is_binary =
      in.gcount() == 4 && std::memcmp(magic, "PCLB", 4) == 0;

  if (is_binary) {
    std::uint32_t count = 0;
    std::uint8_t fields = 0;
    if (!detail::read_le(in, count) || !detail::read_le(in, fields))
      throw FormatError("truncated PCLB header: " + path.string());
    if (fields != 3 && fields != 4)
      throw FormatError("PCLB fields-per-point must be 3 or 4, got " +
                        std::to_string(int(fields)) + ": " + path.string());
    cloud.points.reserve(count);
    if (fields == 4) cloud.intensities.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      float rec[4] = {0, 0, 0, 0};
      for (int f = 0; f < fields; ++f) {
        if (!detail::read_le(in, rec[f])) {
          const auto offset = 9 + std::size_t(i) * fields * 4 + std::size_t(f) * 4;
          throw FormatError("truncated PCLB record at byte offset " +
                            std::to_string(offset) + ": " + path.string());
        }
      }
      const Vec3 p(rec[0], rec[1], rec[2]);
      if (!finite(p)) {
        ++dropped;
        continue;
      }
      cloud.points.push_back(p);
      if (fields == 4) cloud.intensities.push_back(rec[3]);
    }
  } else {
    in.clear();
    in.seekg(0);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      double x, y, z;
      if (!(ls >> x >> y >> z))
        throw FormatError("bad ASCII point record at line " +
                          std::to_string(line_no) + ": " + path.string());
      double intensity;
      const bool has_i = static_cast<bool>(ls >> intensity);
      const Vec3 p(x, y, z);
      if (!finite(p)) {
        ++dropped;
        continue;
      }
      cloud.points.push_back(p);
      if (has_i) cloud.intensities.push_back(static_cast<float>(intensity));
    }
    if (!cloud.intensities.empty() &&
        cloud.intensities.size() != cloud.points.size())
      throw FormatError("inconsistent intensity columns: " + path.string());
  }

  if (dropped_non_finite) *dropped_non_finite = dropped;
  return cloud;
}

}  // namespace mff
