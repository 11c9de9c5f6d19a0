#pragma once

#include <algorithm>
#include <functional>
#include <optional>
#include <vector>

#include "mff/errors.hpp"

namespace mff {

struct MatchResult {
  struct Pair {
    int prediction = -1;
    int gt = -1;
    double iou = 0.0;
  };
  std::vector<Pair> pairs;
  std::vector<int> unmatched_predictions;
  std::vector<int> unmatched_gts;
};

// Greedy per-frame, per-class matching: predictions in (score desc, index
// asc) order each claim the unclaimed GT with the highest IoU, provided
// iou >= threshold. IoU ties resolve to the lowest GT index.
inline MatchResult match_detections(
    const std::vector<double>& scores, int gt_count,
    const std::function<double(int pred, int gt)>& iou_fn, double threshold) {
  if (gt_count < 0) throw ValidationError("match: negative gt count");
  std::vector<int> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });

  MatchResult result;
  std::vector<bool> gt_claimed(gt_count, false);
  for (int pred : order) {
    int best_gt = -1;
    double best_iou = 0.0;
    for (int gt = 0; gt < gt_count; ++gt) {
      if (gt_claimed[gt]) continue;
      const double iou = iou_fn(pred, gt);
      if (iou >= threshold && iou > best_iou) {
        best_iou = iou;
        best_gt = gt;
      }
    }
    if (best_gt >= 0) {
      gt_claimed[best_gt] = true;
      result.pairs.push_back({pred, best_gt, best_iou});
    } else {
      result.unmatched_predictions.push_back(pred);
    }
  }
  for (int gt = 0; gt < gt_count; ++gt) {
    if (!gt_claimed[gt]) result.unmatched_gts.push_back(gt);
  }
  return result;
}

// One prediction outcome feeding the PR curve.
struct ApSample {
  double score = 0.0;
  bool true_positive = false;
};

// All-point interpolated average precision: the area under the monotone
// (suffix-max) precision envelope over recall. Samples with equal scores
// keep their input order (assemble them in deterministic frame order).
// Returns nullopt when there are no ground truths (N/A).
inline std::optional<double> average_precision(std::vector<ApSample> samples,
                                               std::size_t gt_count) {
  if (gt_count == 0) return std::nullopt;
  std::stable_sort(samples.begin(), samples.end(),
                   [](const ApSample& a, const ApSample& b) {
                     return a.score > b.score;
                   });
  const std::size_t n = samples.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += samples[i].true_positive ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / static_cast<double>(gt_count);
  }
  // Monotone envelope.
  for (std::size_t i = n; i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

// ---------------------------------------------------------------------------

struct RangeBins {
  std::vector<double> edges = {0.0, 50.0, 100.0, 150.0, 200.0, 250.0};

  void validate() const {
    if (edges.size() < 2)
      throw ValidationError("range bins: need at least two edges");
    for (std::size_t i = 1; i < edges.size(); ++i) {
      if (!(edges[i] > edges[i - 1]))
        throw ValidationError("range bins: edges must be strictly increasing");
    }
  }

  std::size_t bin_count() const { return edges.size() - 1; }

  // Half-open bins [e_i, e_{i+1}); bin_count() designates the overflow bin
  // beyond the last edge; -1 means below the first edge.
  int bin_for(double distance) const {
    if (distance < edges.front()) return -1;
    if (distance >= edges.back()) return static_cast<int>(bin_count());
    for (std::size_t i = 1; i < edges.size(); ++i) {
      if (distance < edges[i]) return static_cast<int>(i - 1);
    }
    return static_cast<int>(bin_count());
  }
};

struct MaeCell {
  enum class Marker { ok, not_applicable, no_detections };
  Marker marker = Marker::not_applicable;
  double mae = 0.0;
  std::size_t pair_count = 0;
  std::size_t gt_count = 0;
};

struct MaeTable {
  std::vector<MaeCell> bins;
  MaeCell overflow;
  MaeCell full_range;
};

inline const char* mae_marker_name(MaeCell::Marker m) {
  switch (m) {
    case MaeCell::Marker::ok: return "ok";
    case MaeCell::Marker::not_applicable: return "N/A";
    case MaeCell::Marker::no_detections: return "N/D";
  }
  return "N/A";
}

// Bins matched pairs (gt distance, |error|) by GT distance. A bin with no
// GTs is N/A; a bin with GTs but no matched pairs is N/D. The full-range
// cell aggregates every pair regardless of bin.
inline MaeTable mae_by_range(
    const std::vector<std::pair<double, double>>& matched_gt_distance_error,
    const std::vector<double>& gt_distances, const RangeBins& bins) {
  bins.validate();
  MaeTable table;
  table.bins.resize(bins.bin_count());

  const auto cell_for = [&](int bin) -> MaeCell* {
    if (bin < 0) return nullptr;
    if (bin == static_cast<int>(bins.bin_count())) return &table.overflow;
    return &table.bins[bin];
  };
  for (double d : gt_distances) {
    if (MaeCell* cell = cell_for(bins.bin_for(d))) ++cell->gt_count;
    ++table.full_range.gt_count;
  }
  std::vector<double> sums(bins.bin_count() + 1, 0.0);
  double full_sum = 0.0;
  for (const auto& [distance, error] : matched_gt_distance_error) {
    const int bin = bins.bin_for(distance);
    if (MaeCell* cell = cell_for(bin)) {
      ++cell->pair_count;
      sums[bin == static_cast<int>(bins.bin_count()) ? bins.bin_count() : bin] +=
          error;
    }
    ++table.full_range.pair_count;
    full_sum += error;
  }
  const auto finalize = [](MaeCell& cell, double sum) {
    if (cell.gt_count == 0) {
      cell.marker = MaeCell::Marker::not_applicable;
    } else if (cell.pair_count == 0) {
      cell.marker = MaeCell::Marker::no_detections;
    } else {
      cell.marker = MaeCell::Marker::ok;
      cell.mae = sum / static_cast<double>(cell.pair_count);
    }
  };
  for (std::size_t i = 0; i < bins.bin_count(); ++i) {
    finalize(table.bins[i], sums[i]);
  }
  finalize(table.overflow, sums[bins.bin_count()]);
  finalize(table.full_range, full_sum);
  return table;
}

}  // namespace mff
