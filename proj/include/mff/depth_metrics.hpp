#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "mff/depth_map.hpp"
#include "mff/errors.hpp"

namespace mff {

struct AffineDepthFit {
  double scale = 1.0;
  double shift = 0.0;
  double residual_mae = 0.0;
  std::size_t pixel_count = 0;
};

// Least-squares fit gt ≈ scale * relative + shift over pixels valid in both
// rasters. The relative map needs at least two distinct values.
inline AffineDepthFit fit_affine_depth(const DepthMap& relative,
                                       const SparseDepth& sparse_gt) {
  relative.check_shape();
  const DepthMap& gt = sparse_gt.map;
  gt.check_shape();
  if (relative.width != gt.width || relative.height != gt.height)
    throw ValidationError("affine fit: dimension mismatch");

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < relative.values.size(); ++i) {
    const double x = relative.values[i];
    const double y = gt.values[i];
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2)
    throw ValidationError("affine fit: needs at least two overlapping pixels");
  const double denom = n * sxx - sx * sx;
  const double spread = sxx / n - (sx / n) * (sx / n);
  if (!(spread > 1e-18) || denom == 0.0)
    throw NumericError("affine fit: relative values are constant (rank deficient)");

  AffineDepthFit fit;
  fit.scale = (n * sxy - sx * sy) / denom;
  fit.shift = (sy - fit.scale * sx) / n;
  fit.pixel_count = n;

  double abs_sum = 0.0;
  for (std::size_t i = 0; i < relative.values.size(); ++i) {
    const double x = relative.values[i];
    const double y = gt.values[i];
    if (!std::isfinite(x) || !std::isfinite(y)) continue;
    abs_sum += std::abs(y - (fit.scale * x + fit.shift));
  }
  fit.residual_mae = abs_sum / n;
  return fit;
}

struct DepthErrorReport {
  double mae = 0.0;
  double abs_rel = 0.0;
  std::size_t valid_pixel_count = 0;
  DepthMap error_map;  // |pred - gt| on the overlap, NaN elsewhere
};

inline DepthErrorReport depth_errors(const DepthMap& pred, const DepthMap& gt) {
  pred.check_shape();
  gt.check_shape();
  if (pred.width != gt.width || pred.height != gt.height)
    throw ValidationError("depth errors: dimension mismatch");

  DepthErrorReport report;
  report.error_map = DepthMap(pred.width, pred.height);
  double abs_sum = 0.0, rel_sum = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const double p = pred.values[i];
    const double g = gt.values[i];
    if (!std::isfinite(p) || !std::isfinite(g)) continue;
    const double err = std::abs(p - g);
    report.error_map.values[i] = static_cast<float>(err);
    abs_sum += err;
    rel_sum += err / g;
    ++report.valid_pixel_count;
  }
  if (report.valid_pixel_count == 0)
    throw ValidationError("depth errors: no overlapping valid pixels");
  report.mae = abs_sum / report.valid_pixel_count;
  report.abs_rel = rel_sum / report.valid_pixel_count;
  return report;
}

inline DepthErrorReport depth_errors(const DepthMap& pred,
                                     const SparseDepth& gt) {
  return depth_errors(pred, gt.map);
}

// Per-pixel mean of the error maps over the frames where a pixel is valid;
// pixels valid nowhere stay invalid.
inline DepthMap aggregate_error_heatmap(
    const std::vector<DepthErrorReport>& reports) {
  if (reports.empty())
    throw ValidationError("heatmap aggregation: empty report list");
  const DepthMap& first = reports.front().error_map;
  DepthMap mean(first.width, first.height);
  std::vector<std::uint32_t> counts(mean.size(), 0);
  std::vector<double> sums(mean.size(), 0.0);
  for (const auto& report : reports) {
    const DepthMap& m = report.error_map;
    if (m.width != mean.width || m.height != mean.height)
      throw ValidationError("heatmap aggregation: dimension mismatch");
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      if (!std::isfinite(m.values[i])) continue;
      sums[i] += m.values[i];
      ++counts[i];
    }
  }
  for (std::size_t i = 0; i < mean.values.size(); ++i) {
    if (counts[i] > 0) mean.values[i] = static_cast<float>(sums[i] / counts[i]);
  }
  return mean;
}

// Scale-invariant comparison: both maps are min-max normalized over the
// overlap before taking the MAE.
inline double normalized_mae(const DepthMap& pred, const DepthMap& gt) {
  pred.check_shape();
  gt.check_shape();
  if (pred.width != gt.width || pred.height != gt.height)
    throw ValidationError("normalized mae: dimension mismatch");
  double pmin = 1e300, pmax = -1e300, gmin = 1e300, gmax = -1e300;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const double p = pred.values[i], g = gt.values[i];
    if (!std::isfinite(p) || !std::isfinite(g)) continue;
    pmin = std::min(pmin, p);
    pmax = std::max(pmax, p);
    gmin = std::min(gmin, g);
    gmax = std::max(gmax, g);
    ++n;
  }
  if (n == 0)
    throw ValidationError("normalized mae: no overlapping valid pixels");
  if (!(pmax > pmin) || !(gmax > gmin))
    throw NumericError("normalized mae: degenerate value range");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const double p = pred.values[i], g = gt.values[i];
    if (!std::isfinite(p) || !std::isfinite(g)) continue;
    sum += std::abs((p - pmin) / (pmax - pmin) - (g - gmin) / (gmax - gmin));
  }
  return sum / n;
}

// Fixed ramp for heatmap export: t in [0, 0.5] blends blue->green, (0.5, 1]
// blends green->red; invalid pixels render black.
inline void heatmap_color(float value, double max_value, std::uint8_t rgb[3]) {
  if (!std::isfinite(value) || !(max_value > 0.0)) {
    rgb[0] = rgb[1] = rgb[2] = 0;
    return;
  }
  const double t = std::clamp(static_cast<double>(value) / max_value, 0.0, 1.0);
  if (t <= 0.5) {
    const double s = t / 0.5;
    rgb[0] = 0;
    rgb[1] = static_cast<std::uint8_t>(std::lround(255.0 * s));
    rgb[2] = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - s)));
  } else {
    const double s = (t - 0.5) / 0.5;
    rgb[0] = static_cast<std::uint8_t>(std::lround(255.0 * s));
    rgb[1] = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - s)));
    rgb[2] = 0;
  }
}

inline std::vector<std::uint8_t> heatmap_to_rgb(const DepthMap& map,
                                                double max_value) {
  std::vector<std::uint8_t> rgb(map.size() * 3, 0);
  for (std::size_t i = 0; i < map.values.size(); ++i) {
    heatmap_color(map.values[i], max_value, &rgb[i * 3]);
  }
  return rgb;
}

}  // namespace mff
