#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "mff/frustum.hpp"
#include "mff/iou.hpp"
#include "mff/priors.hpp"

namespace mff {

struct HeadPrediction {
  Box3D box3d;  // sensor frame
  double score = 0.0;
  Route route = Route::short_range;
  std::string frame_id;
  int frustum_ref = -1;

  void validate() const {
    box3d.validate();
    if (!(score >= 0.0 && score <= 1.0))
      throw ValidationError("prediction: score must be in [0, 1]");
  }
};

// Score penalty applied when a prediction rests on a synthesized fallback
// point rather than real frustum geometry.
inline constexpr double kSyntheticScoreFactor = 0.1;

// Deterministic geometric head, used for both routes when no external head
// is spliced in. The center sits on the fused center ray at sensor-frame
// forward distance `fused_distance` (the ray is the frustum frame's +x
// axis, so its frustum-frame forward coordinate is fused / cos(azimuth)),
// with the cloud's median lateral and vertical offsets; dims come from the
// class prior; yaw is the frustum azimuth.
inline HeadPrediction baseline_head(const Frustum& f,
                                    const ClassPriorTable& priors,
                                    Route route_tag) {
  if (f.frame_tag != Frustum::FrameTag::frustum)
    throw ValidationError("baseline_head: frustum-frame cloud required");
  if (f.points.empty())
    throw ValidationError("baseline_head: empty frustum");
  if (f.detection.class_id == ObjectClass::other)
    throw ValidationError("baseline_head: class 'other' has no prior");
  const double cos_az = std::cos(f.azimuth);
  if (!(cos_az > 1e-6))
    throw ValidationError("baseline_head: azimuth too close to +-pi/2");

  std::vector<double> lateral, vertical;
  lateral.reserve(f.points.size());
  vertical.reserve(f.points.size());
  for (const Vec3& p : f.points.points) {
    lateral.push_back(p.y());
    vertical.push_back(p.z());
  }
  const Vec3 center_frustum(
      f.fused_distance / cos_az,
      frustum_detail::statistic(lateral, CentroidStatistic::median),
      frustum_detail::statistic(vertical, CentroidStatistic::median));

  const RigidTransform frustum_to_sensor = invert(frustum_frame_for(f.azimuth));

  HeadPrediction pred;
  pred.box3d.center = frustum_to_sensor.apply(center_frustum);
  const ClassPrior& prior = priors.for_class(f.detection.class_id);
  pred.box3d.length = prior.length;
  pred.box3d.width = prior.width;
  pred.box3d.height = prior.height;
  pred.box3d.yaw = normalize_angle(f.azimuth);
  pred.box3d.class_id = f.detection.class_id;
  pred.score = f.synthetic ? f.detection.confidence * kSyntheticScoreFactor
                           : f.detection.confidence;
  pred.route = route_tag;
  pred.frame_id = f.frame_id;
  pred.frustum_ref = f.detection_index;
  pred.validate();
  return pred;
}

// Greedy BEV non-maximum suppression across the two routes. Candidates are
// ranked (score desc, frustum_ref asc); a prediction is dropped when a kept
// prediction of the same frame and class overlaps it with IoU > threshold.
// Output order: (frame_id asc, score desc, frustum_ref asc), independent of
// input concatenation order.
inline std::vector<HeadPrediction> merge_and_nms(
    const std::vector<HeadPrediction>& short_preds,
    const std::vector<HeadPrediction>& long_preds, double iou_threshold = 0.25) {
  if (!(iou_threshold >= 0.0 && iou_threshold <= 1.0))
    throw ValidationError("nms: iou threshold must be in [0, 1]");
  std::vector<HeadPrediction> all;
  all.reserve(short_preds.size() + long_preds.size());
  all.insert(all.end(), short_preds.begin(), short_preds.end());
  all.insert(all.end(), long_preds.begin(), long_preds.end());
  std::sort(all.begin(), all.end(),
            [](const HeadPrediction& a, const HeadPrediction& b) {
              if (a.frame_id != b.frame_id) return a.frame_id < b.frame_id;
              if (a.score != b.score) return a.score > b.score;
              return a.frustum_ref < b.frustum_ref;
            });

  std::vector<HeadPrediction> kept;
  for (const auto& candidate : all) {
    bool suppressed = false;
    for (const auto& keeper : kept) {
      if (keeper.frame_id != candidate.frame_id) continue;
      if (keeper.box3d.class_id != candidate.box3d.class_id) continue;
      if (iou_bev(keeper.box3d, candidate.box3d) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(candidate);
  }
  return kept;
}

}  // namespace mff
