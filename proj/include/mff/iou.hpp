#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "mff/geometry.hpp"

namespace mff {

// Intersection areas below this are treated as empty (degenerate clipping
// output).
inline constexpr double kDegenerateArea = 1e-12;

inline double iou_2d(const Box2D& a, const Box2D& b) {
  a.validate();
  b.validate();
  const double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

using Vec2 = Eigen::Vector2d;

// BEV footprint, counter-clockwise.
inline std::array<Vec2, 4> bev_corners(const Box3D& b) {
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double hl = 0.5 * b.length, hw = 0.5 * b.width;
  const std::array<Vec2, 4> local = {Vec2(+hl, +hw), Vec2(-hl, +hw),
                                     Vec2(-hl, -hw), Vec2(+hl, -hw)};
  std::array<Vec2, 4> out;
  for (int i = 0; i < 4; ++i) {
    out[i] = Vec2(c * local[i].x() - s * local[i].y() + b.center.x(),
                  s * local[i].x() + c * local[i].y() + b.center.y());
  }
  return out;
}

namespace iou_detail {

inline double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

inline Vec2 line_intersection(const Vec2& s, const Vec2& e, const Vec2& a,
                              const Vec2& b) {
  const Vec2 d1 = e - s;
  const Vec2 d2 = b - a;
  const double denom = d1.x() * d2.y() - d1.y() * d2.x();
  const double t = ((a.x() - s.x()) * d2.y() - (a.y() - s.y()) * d2.x()) / denom;
  return s + t * d1;
}

// Sutherland-Hodgman: clips a convex CCW subject against a convex CCW clip
// polygon.
template <typename SubjectPoly, typename ClipPoly>
std::vector<Vec2> clip_convex(const SubjectPoly& subject, const ClipPoly& clip) {
  std::vector<Vec2> output(subject.begin(), subject.end());
  for (std::size_t i = 0; i < clip.size() && !output.empty(); ++i) {
    const Vec2& a = clip[i];
    const Vec2& b = clip[(i + 1) % clip.size()];
    std::vector<Vec2> input;
    input.swap(output);
    for (std::size_t j = 0; j < input.size(); ++j) {
      const Vec2& s = input[j == 0 ? input.size() - 1 : j - 1];
      const Vec2& e = input[j];
      const bool s_inside = cross(a, b, s) >= 0.0;
      const bool e_inside = cross(a, b, e) >= 0.0;
      if (e_inside) {
        if (!s_inside) output.push_back(line_intersection(s, e, a, b));
        output.push_back(e);
      } else if (s_inside) {
        output.push_back(line_intersection(s, e, a, b));
      }
    }
  }
  return output;
}

inline double polygon_area(const std::vector<Vec2>& pts) {
  if (pts.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec2& p = pts[i];
    const Vec2& q = pts[(i + 1) % pts.size()];
    acc += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * std::abs(acc);
}

}  // namespace iou_detail

inline double bev_intersection_area(const Box3D& a, const Box3D& b) {
  const auto clipped = iou_detail::clip_convex(bev_corners(a), bev_corners(b));
  const double area = iou_detail::polygon_area(clipped);
  return area < kDegenerateArea ? 0.0 : area;
}

inline double iou_bev(const Box3D& a, const Box3D& b) {
  a.validate();
  b.validate();
  const double inter = bev_intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  const double area_a = a.length * a.width;
  const double area_b = b.length * b.width;
  return inter / (area_a + area_b - inter);
}

inline double iou_3d(const Box3D& a, const Box3D& b) {
  a.validate();
  b.validate();
  const double overlap_z =
      std::min(a.center.z() + 0.5 * a.height, b.center.z() + 0.5 * b.height) -
      std::max(a.center.z() - 0.5 * a.height, b.center.z() - 0.5 * b.height);
  if (overlap_z <= 0.0) return 0.0;
  const double inter = bev_intersection_area(a, b) * overlap_z;
  if (inter == 0.0) return 0.0;
  const double vol_a = a.length * a.width * a.height;
  const double vol_b = b.length * b.width * b.height;
  return inter / (vol_a + vol_b - inter);
}

}  // namespace mff
