#pragma once

#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mff/adapter_io.hpp"
#include "mff/detections.hpp"
#include "mff/iou.hpp"
#include "mff/manifest.hpp"
#include "mff/matching.hpp"

namespace mff {

struct EvalConfig {
  // IoU thresholds for BEV/3D average precision: the long-range regime is
  // scored at 0.1, the short-range one at 0.5. Both are evaluated for every
  // class.
  double map_iou_long = 0.1;
  double map_iou_short = 0.5;
  // 2D IoU threshold for scoring 2.5D detections.
  double iou_2d_threshold = 0.5;
  // Matching threshold (3D IoU) behind the center-distance MAE table.
  double mae_match_iou = 0.1;
  RangeBins bins;

  std::vector<double> bev3d_thresholds() const {
    std::vector<double> t = {map_iou_long, map_iou_short};
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    return t;
  }

  void validate() const {
    for (double t : {map_iou_long, map_iou_short, iou_2d_threshold, mae_match_iou}) {
      if (!(t >= 0.0 && t <= 1.0))
        throw ValidationError("eval: IoU thresholds must be in [0, 1]");
    }
    bins.validate();
  }
};

struct ClassEval3D {
  std::size_t gt_count = 0;
  std::size_t prediction_count = 0;
  std::map<double, std::optional<double>> ap_bev;  // threshold -> AP, nullopt = N/A
  std::map<double, std::optional<double>> ap_3d;
  MaeTable mae_center_x;  // |pred center x - gt center x| over 3D matches
};

struct ClassEval25D {
  std::size_t gt_count = 0;
  std::size_t detection_count = 0;
  std::optional<double> ap_2d;
  MaeTable mae_distance;  // |distance_m - gt center x| over 2D matches
};

struct EvalReport {
  EvalConfig config;
  std::map<std::string, ClassEval3D> per_class_3d;    // by class name
  std::map<std::string, ClassEval25D> per_class_25d;  // by class name
  std::map<double, std::optional<double>> map_bev;    // mean AP over classes
  std::map<double, std::optional<double>> map_3d;
  std::optional<double> map_2d;
};

namespace eval_detail {

inline std::string threshold_key(double t) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << t;
  return os.str();
}

// Paired ground-truth labels of one class in one frame.
struct FrameGts {
  std::vector<Box3D> boxes3d;
  std::vector<Box2D> boxes2d;
};

inline std::map<std::string, PerClass<FrameGts>> collect_gts(
    const DatasetManifest& manifest) {
  std::map<std::string, PerClass<FrameGts>> out;
  for (const auto& frame : manifest.frames) {
    PerClass<FrameGts> per_class;
    for (const auto& label : filter_paired(frame.labels)) {
      if (label.class_id == ObjectClass::other) continue;
      per_class[label.class_id].boxes3d.push_back(*label.box3d);
      per_class[label.class_id].boxes2d.push_back(*label.box2d);
    }
    out.emplace(frame.frame_id, std::move(per_class));
  }
  return out;
}

inline std::optional<double> mean_ap(
    const std::map<std::string, std::optional<double>>& values) {
  double sum = 0.0;
  int n = 0;
  for (const auto& [cls, ap] : values) {
    if (ap) {
      sum += *ap;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

}  // namespace eval_detail

// Scores 3D head predictions against the manifest's paired labels.
// Predictions naming frames absent from the manifest are an error.
inline EvalReport build_eval_report(
    const std::vector<HeadPrediction>& predictions,
    const std::map<std::string, std::vector<Detection25D>>& detections25d,
    const DatasetManifest& manifest, const EvalConfig& config = {}) {
  config.validate();
  EvalReport report;
  report.config = config;

  auto gts = eval_detail::collect_gts(manifest);

  // Frame-id integrity first.
  std::set<std::string> unknown;
  for (const auto& p : predictions) {
    if (!gts.count(p.frame_id)) unknown.insert(p.frame_id);
  }
  for (const auto& [frame_id, dets] : detections25d) {
    if (!gts.count(frame_id)) unknown.insert(frame_id);
  }
  if (!unknown.empty()) {
    std::string msg = "predictions reference frames missing from the manifest:";
    for (const auto& id : unknown) msg += " '" + id + "'";
    throw ValidationError(msg);
  }

  // Predictions grouped per frame and class, in input order.
  std::map<std::string, PerClass<std::vector<const HeadPrediction*>>> by_frame;
  for (const auto& p : predictions) {
    p.validate();
    if (p.box3d.class_id == ObjectClass::other)
      throw ValidationError("evaluation: prediction with class 'other'");
    by_frame[p.frame_id][p.box3d.class_id].push_back(&p);
  }

  const auto thresholds = config.bev3d_thresholds();

  if (!predictions.empty() || !gts.empty()) {
    for (ObjectClass cls : kEvalClasses) {
      ClassEval3D ce;
      std::map<double, std::vector<ApSample>> samples_bev, samples_3d;
      std::vector<std::pair<double, double>> mae_pairs;
      std::vector<double> gt_distances;

      for (const auto& frame : manifest.frames) {
        const auto& frame_gts = gts.at(frame.frame_id)[cls];
        ce.gt_count += frame_gts.boxes3d.size();
        for (const auto& gt : frame_gts.boxes3d)
          gt_distances.push_back(gt.center.x());

        std::vector<const HeadPrediction*> preds;
        const auto frame_it = by_frame.find(frame.frame_id);
        if (frame_it != by_frame.end()) preds = frame_it->second[cls];
        ce.prediction_count += preds.size();
        if (preds.empty() && frame_gts.boxes3d.empty()) continue;

        std::vector<double> scores;
        scores.reserve(preds.size());
        for (const auto* p : preds) scores.push_back(p->score);
        const int gt_count = static_cast<int>(frame_gts.boxes3d.size());

        const auto run_matching = [&](auto iou_of, double threshold,
                                      std::vector<ApSample>& out) {
          const auto result = match_detections(scores, gt_count, iou_of, threshold);
          std::vector<bool> tp(preds.size(), false);
          for (const auto& pair : result.pairs) tp[pair.prediction] = true;
          for (std::size_t i = 0; i < preds.size(); ++i) {
            out.push_back({scores[i], tp[i]});
          }
        };
        const auto iou_bev_of = [&](int pred, int gt) {
          return iou_bev(preds[pred]->box3d, frame_gts.boxes3d[gt]);
        };
        const auto iou_3d_of = [&](int pred, int gt) {
          return iou_3d(preds[pred]->box3d, frame_gts.boxes3d[gt]);
        };
        for (double t : thresholds) {
          run_matching(iou_bev_of, t, samples_bev[t]);
          run_matching(iou_3d_of, t, samples_3d[t]);
        }

        const auto mae_match =
            match_detections(scores, gt_count, iou_3d_of, config.mae_match_iou);
        for (const auto& pair : mae_match.pairs) {
          const double gt_x = frame_gts.boxes3d[pair.gt].center.x();
          mae_pairs.emplace_back(
              gt_x, std::abs(preds[pair.prediction]->box3d.center.x() - gt_x));
        }
      }

      for (double t : thresholds) {
        ce.ap_bev[t] = average_precision(samples_bev[t], ce.gt_count);
        ce.ap_3d[t] = average_precision(samples_3d[t], ce.gt_count);
      }
      ce.mae_center_x = mae_by_range(mae_pairs, gt_distances, config.bins);
      report.per_class_3d[std::string(class_name(cls))] = std::move(ce);
    }
    for (double t : thresholds) {
      std::map<std::string, std::optional<double>> bev, d3;
      for (const auto& [cls, ce] : report.per_class_3d) {
        bev[cls] = ce.ap_bev.at(t);
        d3[cls] = ce.ap_3d.at(t);
      }
      report.map_bev[t] = eval_detail::mean_ap(bev);
      report.map_3d[t] = eval_detail::mean_ap(d3);
    }
  }

  if (!detections25d.empty()) {
    for (ObjectClass cls : kEvalClasses) {
      ClassEval25D ce;
      std::vector<ApSample> samples;
      std::vector<std::pair<double, double>> mae_pairs;
      std::vector<double> gt_distances;

      for (const auto& frame : manifest.frames) {
        const auto& frame_gts = gts.at(frame.frame_id)[cls];
        ce.gt_count += frame_gts.boxes2d.size();
        for (const auto& gt : frame_gts.boxes3d)
          gt_distances.push_back(gt.center.x());

        std::vector<const Detection25D*> dets;
        const auto frame_it = detections25d.find(frame.frame_id);
        if (frame_it != detections25d.end()) {
          for (const auto& det : frame_it->second) {
            if (det.class_id == cls) dets.push_back(&det);
          }
        }
        ce.detection_count += dets.size();
        if (dets.empty() && frame_gts.boxes2d.empty()) continue;

        std::vector<double> scores;
        for (const auto* d : dets) scores.push_back(d->confidence);
        const auto iou_of = [&](int pred, int gt) {
          return iou_2d(dets[pred]->box2d, frame_gts.boxes2d[gt]);
        };
        const auto result =
            match_detections(scores, static_cast<int>(frame_gts.boxes2d.size()),
                             iou_of, config.iou_2d_threshold);
        std::vector<bool> tp(dets.size(), false);
        for (const auto& pair : result.pairs) {
          tp[pair.prediction] = true;
          const double gt_x = frame_gts.boxes3d[pair.gt].center.x();
          mae_pairs.emplace_back(
              gt_x, std::abs(dets[pair.prediction]->distance_m - gt_x));
        }
        for (std::size_t i = 0; i < dets.size(); ++i)
          samples.push_back({scores[i], tp[i]});
      }

      ce.ap_2d = average_precision(samples, ce.gt_count);
      ce.mae_distance = mae_by_range(mae_pairs, gt_distances, config.bins);
      report.per_class_25d[std::string(class_name(cls))] = std::move(ce);
    }
    std::map<std::string, std::optional<double>> aps;
    for (const auto& [cls, ce] : report.per_class_25d) aps[cls] = ce.ap_2d;
    report.map_2d = eval_detail::mean_ap(aps);
  }

  return report;
}

// ---------------------------------------------------------------------------
// Serialization. JSON output is schema-versioned and byte-deterministic for
// identical inputs.

namespace eval_detail {

inline ordered_json ap_json(const std::optional<double>& ap) {
  return ap ? ordered_json(*ap) : ordered_json(nullptr);
}

inline ordered_json mae_cell_json(const MaeCell& cell, double lo, double hi,
                                  bool open_ended = false) {
  ordered_json j;
  if (open_ended) {
    j["lo"] = lo;
    j["hi"] = nullptr;
  } else {
    j["lo"] = lo;
    j["hi"] = hi;
  }
  j["gt_count"] = cell.gt_count;
  j["pair_count"] = cell.pair_count;
  j["marker"] = mae_marker_name(cell.marker);
  j["mae"] = cell.marker == MaeCell::Marker::ok ? ordered_json(cell.mae)
                                                : ordered_json(nullptr);
  return j;
}

inline ordered_json mae_table_json(const MaeTable& table, const RangeBins& bins) {
  ordered_json j;
  ordered_json rows = ordered_json::array();
  for (std::size_t i = 0; i < table.bins.size(); ++i) {
    rows.push_back(mae_cell_json(table.bins[i], bins.edges[i], bins.edges[i + 1]));
  }
  j["bins"] = rows;
  j["overflow"] = mae_cell_json(table.overflow, bins.edges.back(), 0.0, true);
  ordered_json full;
  full["gt_count"] = table.full_range.gt_count;
  full["pair_count"] = table.full_range.pair_count;
  full["marker"] = mae_marker_name(table.full_range.marker);
  full["mae"] = table.full_range.marker == MaeCell::Marker::ok
                    ? ordered_json(table.full_range.mae)
                    : ordered_json(nullptr);
  j["full_range"] = full;
  return j;
}

}  // namespace eval_detail

inline std::string report_to_json(const EvalReport& report) {
  ordered_json root;
  root["report_version"] = 1;
  ordered_json cfg;
  cfg["map_iou_long"] = report.config.map_iou_long;
  cfg["map_iou_short"] = report.config.map_iou_short;
  cfg["iou_2d_threshold"] = report.config.iou_2d_threshold;
  cfg["mae_match_iou"] = report.config.mae_match_iou;
  cfg["distance_bins_m"] = report.config.bins.edges;
  root["config"] = cfg;

  if (!report.per_class_3d.empty()) {
    ordered_json classes = ordered_json::object();
    for (ObjectClass cls : kEvalClasses) {
      const auto& ce = report.per_class_3d.at(std::string(class_name(cls)));
      ordered_json c;
      c["gt_count"] = ce.gt_count;
      c["prediction_count"] = ce.prediction_count;
      ordered_json ap_bev = ordered_json::object();
      ordered_json ap_3d = ordered_json::object();
      for (const auto& [t, ap] : ce.ap_bev)
        ap_bev[eval_detail::threshold_key(t)] = eval_detail::ap_json(ap);
      for (const auto& [t, ap] : ce.ap_3d)
        ap_3d[eval_detail::threshold_key(t)] = eval_detail::ap_json(ap);
      c["ap_bev"] = ap_bev;
      c["ap_3d"] = ap_3d;
      c["mae_center_x_m"] =
          eval_detail::mae_table_json(ce.mae_center_x, report.config.bins);
      classes[std::string(class_name(cls))] = c;
    }
    root["classes_3d"] = classes;
    ordered_json map_bev = ordered_json::object(), map_3d = ordered_json::object();
    for (const auto& [t, ap] : report.map_bev)
      map_bev[eval_detail::threshold_key(t)] = eval_detail::ap_json(ap);
    for (const auto& [t, ap] : report.map_3d)
      map_3d[eval_detail::threshold_key(t)] = eval_detail::ap_json(ap);
    root["map_bev"] = map_bev;
    root["map_3d"] = map_3d;
  }

  if (!report.per_class_25d.empty()) {
    ordered_json classes = ordered_json::object();
    for (ObjectClass cls : kEvalClasses) {
      const auto& ce = report.per_class_25d.at(std::string(class_name(cls)));
      ordered_json c;
      c["gt_count"] = ce.gt_count;
      c["detection_count"] = ce.detection_count;
      c["ap_2d"] = eval_detail::ap_json(ce.ap_2d);
      c["mae_distance_m"] =
          eval_detail::mae_table_json(ce.mae_distance, report.config.bins);
      classes[std::string(class_name(cls))] = c;
    }
    root["classes_25d"] = classes;
    root["map_2d"] = eval_detail::ap_json(report.map_2d);
  }
  return root.dump(2) + "\n";
}

inline std::string report_to_text(const EvalReport& report) {
  std::ostringstream os;
  const auto fmt_ap = [](const std::optional<double>& ap) {
    if (!ap) return std::string("    N/A");
    std::ostringstream v;
    v << std::fixed << std::setprecision(4) << std::setw(7) << *ap;
    return v.str();
  };
  const auto fmt_mae = [](const MaeCell& cell) {
    if (cell.marker != MaeCell::Marker::ok) {
      std::ostringstream v;
      v << std::setw(9) << mae_marker_name(cell.marker);
      return v.str();
    }
    std::ostringstream v;
    v << std::fixed << std::setprecision(2) << std::setw(9) << cell.mae;
    return v.str();
  };

  if (!report.per_class_3d.empty()) {
    const auto thresholds = report.config.bev3d_thresholds();
    os << "3D detection (AP per IoU threshold)\n";
    os << std::left << std::setw(15) << "class" << std::right << std::setw(6)
       << "GTs" << std::setw(7) << "preds";
    for (double t : thresholds)
      os << "  BEV@" << eval_detail::threshold_key(t);
    for (double t : thresholds) os << "   3D@" << eval_detail::threshold_key(t);
    os << "\n";
    for (ObjectClass cls : kEvalClasses) {
      const auto name = std::string(class_name(cls));
      const auto& ce = report.per_class_3d.at(name);
      os << std::left << std::setw(15) << name << std::right << std::setw(6)
         << ce.gt_count << std::setw(7) << ce.prediction_count;
      for (double t : thresholds) os << "  " << fmt_ap(ce.ap_bev.at(t));
      for (double t : thresholds) os << "  " << fmt_ap(ce.ap_3d.at(t));
      os << "\n";
    }
    os << std::left << std::setw(15) << "mAP" << std::right << std::setw(6)
       << "" << std::setw(7) << "";
    for (double t : thresholds) os << "  " << fmt_ap(report.map_bev.at(t));
    for (double t : thresholds) os << "  " << fmt_ap(report.map_3d.at(t));
    os << "\n\n";

    os << "Center-distance MAE (m) by GT range\n";
    os << std::left << std::setw(15) << "class" << std::right;
    for (std::size_t i = 0; i + 1 < report.config.bins.edges.size(); ++i) {
      std::ostringstream h;
      h << "[" << report.config.bins.edges[i] << ","
        << report.config.bins.edges[i + 1] << ")";
      os << std::setw(10) << h.str();
    }
    os << std::setw(10) << "overflow" << std::setw(10) << "full" << "\n";
    for (ObjectClass cls : kEvalClasses) {
      const auto name = std::string(class_name(cls));
      const auto& mae = report.per_class_3d.at(name).mae_center_x;
      os << std::left << std::setw(15) << name << std::right;
      for (const auto& cell : mae.bins) os << " " << fmt_mae(cell);
      os << " " << fmt_mae(mae.overflow) << " " << fmt_mae(mae.full_range)
         << "\n";
    }
    os << "\n";
  }

  if (!report.per_class_25d.empty()) {
    os << "2.5D detection (AP@" << eval_detail::threshold_key(
              report.config.iou_2d_threshold)
       << " 2D IoU, distance MAE by GT range)\n";
    os << std::left << std::setw(15) << "class" << std::right << std::setw(6)
       << "GTs" << std::setw(7) << "dets" << std::setw(9) << "AP2D";
    for (std::size_t i = 0; i + 1 < report.config.bins.edges.size(); ++i) {
      std::ostringstream h;
      h << "[" << report.config.bins.edges[i] << ","
        << report.config.bins.edges[i + 1] << ")";
      os << std::setw(10) << h.str();
    }
    os << std::setw(10) << "full" << "\n";
    for (ObjectClass cls : kEvalClasses) {
      const auto name = std::string(class_name(cls));
      const auto& ce = report.per_class_25d.at(name);
      os << std::left << std::setw(15) << name << std::right << std::setw(6)
         << ce.gt_count << std::setw(7) << ce.detection_count << "  "
         << fmt_ap(ce.ap_2d);
      for (const auto& cell : ce.mae_distance.bins) os << " " << fmt_mae(cell);
      os << " " << fmt_mae(ce.mae_distance.full_range) << "\n";
    }
    os << std::left << std::setw(15) << "mAP" << std::right << std::setw(6)
       << "" << std::setw(7) << "" << "  " << fmt_ap(report.map_2d) << "\n";
  }
  return os.str();
}

}  // namespace mff
