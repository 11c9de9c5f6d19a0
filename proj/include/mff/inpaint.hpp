#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mff/depth_map.hpp"
#include "mff/errors.hpp"

// Depth densification by neighborhood-affinity weighted least squares.
//
// Every unknown pixel p contributes one residual
//     d(p) - sum_{q in N(p)} w_pq d(q)
// over its 3x3 neighborhood N(p), with known depths held as hard equality
// constraints (eliminated into the right-hand side). Affinities follow the
// guide image:
//     w_pq ∝ exp(-(Y(p) - Y(q))^2 / (2 sigma_p^2)),
//     sigma_p^2 = max(var of Y over the 3x3 window at p, sigma_floor),
// normalized to sum to 1 over each neighborhood. Without a guide all
// neighbors weigh equally, which reduces to pure smoothness interpolation.
// The reduced square system is solved by conjugate gradient in its
// least-squares (normal equation) form to a relative residual tolerance.

namespace mff {

struct InpaintConfig {
  double sigma_floor = 1e-4;
  int neighborhood = 3;  // fixed 3x3
  double solver_tolerance = 1e-6;
  int max_iterations = 10000;

  void validate() const {
    if (!(sigma_floor > 0.0))
      throw ValidationError("inpaint: sigma_floor must be positive");
    if (neighborhood != 3)
      throw ValidationError("inpaint: only the 3x3 neighborhood is supported");
    if (!(solver_tolerance > 0.0 && solver_tolerance <= 1e-2))
      throw ValidationError("inpaint: solver_tolerance must be in (0, 1e-2]");
    if (max_iterations < 1)
      throw ValidationError("inpaint: max_iterations must be >= 1");
  }
};

namespace detail {

// Row-compressed sparse matrix over the unknown pixels.
struct SparseSystem {
  std::vector<std::size_t> row_ptr;
  std::vector<int> col;
  std::vector<double> val;
  std::vector<double> rhs;
  int n = 0;

  void multiply(const std::vector<double>& x, std::vector<double>& out) const {
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
        acc += val[k] * x[col[k]];
      }
      out[i] = acc;
    }
  }

  void multiply_transposed(const std::vector<double>& x,
                           std::vector<double>& out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (int i = 0; i < n; ++i) {
      for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
        out[col[k]] += val[k] * x[i];
      }
    }
  }
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

// Conjugate gradient on the normal equations (CGLS), warm-started from the
// incoming `x`. Returns the relative residual ||b - Mx|| / ||b|| reached.
inline double solve_cgls(const SparseSystem& sys, std::vector<double>& x,
                         double tolerance, int max_iterations,
                         int* iterations_out) {
  const int n = sys.n;
  const double b_norm = std::sqrt(dot(sys.rhs, sys.rhs));
  if (b_norm == 0.0) {
    x.assign(n, 0.0);
    if (iterations_out) *iterations_out = 0;
    return 0.0;
  }
  std::vector<double> r(n), s(n), p(n), q(n);
  sys.multiply(x, r);
  for (int i = 0; i < n; ++i) r[i] = sys.rhs[i] - r[i];
  sys.multiply_transposed(r, s);
  p = s;
  double gamma = dot(s, s);
  double rel = 1.0;
  int iter = 0;
  for (; iter < max_iterations; ++iter) {
    rel = std::sqrt(dot(r, r)) / b_norm;
    if (rel <= tolerance) break;
    sys.multiply(p, q);
    const double qq = dot(q, q);
    if (qq == 0.0) break;
    const double alpha = gamma / qq;
    for (int i = 0; i < n; ++i) x[i] += alpha * p[i];
    for (int i = 0; i < n; ++i) r[i] -= alpha * q[i];
    // Periodically recompute the true residual to cancel recurrence drift.
    if ((iter & 63) == 63) {
      sys.multiply(x, q);
      for (int i = 0; i < n; ++i) r[i] = sys.rhs[i] - q[i];
    }
    sys.multiply_transposed(r, s);
    const double gamma_next = dot(s, s);
    const double beta = gamma_next / gamma;
    gamma = gamma_next;
    for (int i = 0; i < n; ++i) p[i] = s[i] + beta * p[i];
  }
  if (iterations_out) *iterations_out = iter;
  return std::sqrt(dot(r, r)) / b_norm;
}

}  // namespace detail

// Assembles the affinity system for the unknown pixels of `sparse`.
// Exposed for the dense direct-solve oracle used in tests.
inline detail::SparseSystem build_inpaint_system(
    const DepthMap& in, const GrayImage* guide, const InpaintConfig& cfg,
    std::vector<int>* unknown_of_pixel, std::vector<int>* pixel_of_unknown) {
  const int w = in.width, h = in.height;
  unknown_of_pixel->assign(in.size(), -1);
  pixel_of_unknown->clear();
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!in.valid_at(r, c)) {
        (*unknown_of_pixel)[std::size_t(r) * w + c] =
            static_cast<int>(pixel_of_unknown->size());
        pixel_of_unknown->push_back(r * w + c);
      }
    }
  }

  detail::SparseSystem sys;
  sys.n = static_cast<int>(pixel_of_unknown->size());
  sys.rhs.assign(sys.n, 0.0);
  sys.row_ptr.reserve(sys.n + 1);
  sys.row_ptr.push_back(0);

  const auto luma = [&](int r, int c) -> double {
    return guide ? guide->at(r, c) : 0.0;
  };

  for (int row_idx = 0; row_idx < sys.n; ++row_idx) {
    const int pixel = (*pixel_of_unknown)[row_idx];
    const int r = pixel / w, c = pixel % w;

    double weights[8];
    int nbr_r[8], nbr_c[8];
    int count = 0;
    double sigma_sq = cfg.sigma_floor;
    if (guide) {
      double sum = 0.0, sum_sq = 0.0;
      int win = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          const double y = luma(rr, cc);
          sum += y;
          sum_sq += y * y;
          ++win;
        }
      }
      const double mean = sum / win;
      sigma_sq = std::max(sum_sq / win - mean * mean, cfg.sigma_floor);
    }
    const double yp = luma(r, c);
    double weight_sum = 0.0;
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        const int rr = r + dr, cc = c + dc;
        if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
        const double dy = luma(rr, cc) - yp;
        const double wgt =
            guide ? std::exp(-dy * dy / (2.0 * sigma_sq)) : 1.0;
        weights[count] = wgt;
        nbr_r[count] = rr;
        nbr_c[count] = cc;
        weight_sum += wgt;
        ++count;
      }
    }

    sys.col.push_back(row_idx);
    sys.val.push_back(1.0);
    for (int i = 0; i < count; ++i) {
      const double wgt = weights[i] / weight_sum;
      const int nbr_pixel = nbr_r[i] * w + nbr_c[i];
      const int u = (*unknown_of_pixel)[nbr_pixel];
      if (u >= 0) {
        sys.col.push_back(u);
        sys.val.push_back(-wgt);
      } else {
        sys.rhs[row_idx] += wgt * in.values[nbr_pixel];
      }
    }
    sys.row_ptr.push_back(sys.col.size());
  }
  return sys;
}

// Full-precision solve. `pixel_of_unknown[i]` gives the linear pixel index
// of `values[i]`; known pixels are not listed.
struct InpaintSolution {
  std::vector<double> values;
  std::vector<int> pixel_of_unknown;
  int iterations = 0;
  double relative_residual = 0.0;
};

inline InpaintSolution solve_inpaint(const SparseDepth& sparse,
                                     const GrayImage* guide,
                                     const InpaintConfig& cfg = {}) {
  cfg.validate();
  const DepthMap& in = sparse.map;
  in.validate();
  if (guide && (guide->width != in.width || guide->height != in.height))
    throw ValidationError("inpaint: guide dimensions do not match depth map");
  const std::size_t known = in.valid_count();
  if (known == 0)
    throw ValidationError("inpaint: at least one known pixel is required");

  InpaintSolution sol;
  if (known == in.size()) return sol;

  std::vector<int> unknown_of_pixel;
  const auto sys = build_inpaint_system(in, guide, cfg, &unknown_of_pixel,
                                        &sol.pixel_of_unknown);

  // Warm start at the mean known depth; exact for constant inputs.
  double mean = 0.0;
  for (float v : in.values) {
    if (std::isfinite(v)) mean += v;
  }
  mean /= static_cast<double>(known);
  sol.values.assign(sys.n, mean);

  sol.relative_residual = detail::solve_cgls(
      sys, sol.values, cfg.solver_tolerance, cfg.max_iterations,
      &sol.iterations);
  if (sol.relative_residual > cfg.solver_tolerance) {
    throw NumericError("inpaint: conjugate gradient did not converge after " +
                       std::to_string(sol.iterations) +
                       " iterations (relative residual " +
                       std::to_string(sol.relative_residual) + ")");
  }
  return sol;
}

inline DepthMap inpaint_depth(const SparseDepth& sparse, const GrayImage* guide,
                              const InpaintConfig& cfg = {}) {
  const auto sol = solve_inpaint(sparse, guide, cfg);
  DepthMap out = sparse.map;
  for (std::size_t i = 0; i < sol.values.size(); ++i) {
    out.values[sol.pixel_of_unknown[i]] = static_cast<float>(sol.values[i]);
  }
  return out;
}

}  // namespace mff
