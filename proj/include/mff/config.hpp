#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "mff/eval_report.hpp"
#include "mff/frustum.hpp"
#include "mff/inpaint.hpp"
#include "mff/json_util.hpp"
#include "mff/manifest.hpp"

// Pipeline configuration, schema `"config_version": 1`. Every constant the
// pipeline depends on lives here; the shipped config/default_config.json is
// the serialized default-constructed PipelineConfig. Unknown keys are
// rejected.

namespace mff {

struct BevConfig {
  double resolution_m = 0.25;
  double window_length_m = 48.0;
  double window_width_m = 48.0;

  void validate() const {
    if (!(resolution_m > 0.0) || !(window_length_m > 0.0) ||
        !(window_width_m > 0.0))
      throw ValidationError("bev: sizes must be positive");
  }
};

struct PipelineConfig {
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string camera;  // stream names; empty = must be unambiguous
  std::string lidar;
  bool ignore_distortion = false;
  int backprojection_stride = 1;
  double png_scale_m_per_unit = 1.0 / 256.0;
  double distance_normalization_max_m = kMaxDetectionDistance;
  FusionConfig fusion;
  // Alternate per-class route thresholds selectable with --routing-profile.
  std::map<std::string, PerClass<double>> routing_profiles =
      default_routing_profiles();
  InpaintConfig inpaint;
  BevConfig bev;
  double nms_iou = 0.25;
  EvalConfig eval;

  static std::map<std::string, PerClass<double>> default_routing_profiles() {
    PerClass<double> kitti(100.0);
    kitti[ObjectClass::person] = 60.0;
    kitti[ObjectClass::road_vehicle] = 75.0;
    return {{"kitti_faraway_frustum", kitti}};
  }

  void validate() const {
    if (jobs < 1) throw ValidationError("config: jobs must be >= 1");
    if (backprojection_stride < 1)
      throw ValidationError("config: backprojection_stride must be >= 1");
    if (!(png_scale_m_per_unit > 0.0))
      throw ValidationError("config: png scale must be positive");
    if (distance_normalization_max_m != kMaxDetectionDistance)
      throw ValidationError(
          "config: distance_normalization_max_m is fixed at 250 by the "
          "detector contract");
    if (!(nms_iou >= 0.0 && nms_iou <= 1.0))
      throw ValidationError("config: nms_iou must be in [0, 1]");
    fusion.validate();
    inpaint.validate();
    bev.validate();
    eval.validate();
  }

  void apply_routing_profile(const std::string& name) {
    const auto it = routing_profiles.find(name);
    if (it == routing_profiles.end())
      throw ValidationError("unknown routing profile: " + name);
    fusion.route_thresholds_m = it->second;
  }

  IngestOptions ingest_options() const {
    return IngestOptions{camera, lidar, ignore_distortion};
  }
};

namespace config_detail {

inline ordered_json thresholds_json(const PerClass<double>& t) {
  ordered_json j;
  for (ObjectClass c : kEvalClasses) j[std::string(class_name(c))] = t[c];
  return j;
}

inline PerClass<double> thresholds_from_json(const json& j) {
  PerClass<double> t(100.0);
  std::set<std::string> known;
  for (ObjectClass c : kEvalClasses) known.insert(std::string(class_name(c)));
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key))
      throw ValidationError("config: unknown class in thresholds: " + key);
    t[class_from_name_or_throw(key)] = value.get<double>();
  }
  return t;
}

inline void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                                const std::string& scope) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key))
      throw ValidationError("config: unknown key '" + key + "' in " + scope);
  }
}

}  // namespace config_detail

inline ordered_json config_to_json(const PipelineConfig& cfg) {
  ordered_json j;
  j["config_version"] = 1;
  j["seed"] = cfg.seed;
  j["jobs"] = cfg.jobs;
  j["camera"] = cfg.camera;
  j["lidar"] = cfg.lidar;
  j["ignore_distortion"] = cfg.ignore_distortion;
  j["backprojection_stride"] = cfg.backprojection_stride;
  j["png_scale_m_per_unit"] = cfg.png_scale_m_per_unit;
  j["distance_normalization_max_m"] = cfg.distance_normalization_max_m;

  ordered_json fusion;
  fusion["centroid_weight"] = cfg.fusion.centroid_weight;
  fusion["centroid_statistic"] =
      cfg.fusion.centroid_statistic == CentroidStatistic::median ? "median"
                                                                 : "mean";
  fusion["trim_fraction"] = cfg.fusion.trim_fraction;
  fusion["route_thresholds_m"] =
      config_detail::thresholds_json(cfg.fusion.route_thresholds_m);
  j["fusion"] = fusion;

  ordered_json profiles;
  for (const auto& [name, thresholds] : cfg.routing_profiles) {
    profiles[name] = config_detail::thresholds_json(thresholds);
  }
  j["routing_profiles"] = profiles;

  ordered_json inpaint;
  inpaint["sigma_floor"] = cfg.inpaint.sigma_floor;
  inpaint["neighborhood"] = cfg.inpaint.neighborhood;
  inpaint["solver_tolerance"] = cfg.inpaint.solver_tolerance;
  inpaint["max_iterations"] = cfg.inpaint.max_iterations;
  j["inpaint"] = inpaint;

  ordered_json bev;
  bev["resolution_m"] = cfg.bev.resolution_m;
  bev["window_length_m"] = cfg.bev.window_length_m;
  bev["window_width_m"] = cfg.bev.window_width_m;
  j["bev"] = bev;

  j["nms_iou"] = cfg.nms_iou;

  ordered_json eval;
  eval["map_iou_long"] = cfg.eval.map_iou_long;
  eval["map_iou_short"] = cfg.eval.map_iou_short;
  eval["iou_2d_threshold"] = cfg.eval.iou_2d_threshold;
  eval["mae_match_iou"] = cfg.eval.mae_match_iou;
  eval["distance_bins_m"] = cfg.eval.bins.edges;
  j["eval"] = eval;
  return j;
}

inline PipelineConfig config_from_json(const json& j) {
  config_detail::reject_unknown_keys(
      j,
      {"config_version", "seed", "jobs", "camera", "lidar", "ignore_distortion",
       "backprojection_stride", "png_scale_m_per_unit",
       "distance_normalization_max_m", "fusion", "routing_profiles", "inpaint",
       "bev", "nms_iou", "eval"},
      "config root");
  if (j.value("config_version", 0) != 1)
    throw ValidationError("config: unsupported config_version");

  PipelineConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.jobs = j.value("jobs", cfg.jobs);
  cfg.camera = j.value("camera", cfg.camera);
  cfg.lidar = j.value("lidar", cfg.lidar);
  cfg.ignore_distortion = j.value("ignore_distortion", cfg.ignore_distortion);
  cfg.backprojection_stride =
      j.value("backprojection_stride", cfg.backprojection_stride);
  cfg.png_scale_m_per_unit =
      j.value("png_scale_m_per_unit", cfg.png_scale_m_per_unit);
  cfg.distance_normalization_max_m =
      j.value("distance_normalization_max_m", cfg.distance_normalization_max_m);

  if (j.contains("fusion")) {
    const auto& f = j.at("fusion");
    config_detail::reject_unknown_keys(
        f, {"centroid_weight", "centroid_statistic", "trim_fraction",
            "route_thresholds_m"},
        "fusion");
    cfg.fusion.centroid_weight =
        f.value("centroid_weight", cfg.fusion.centroid_weight);
    if (f.contains("centroid_statistic")) {
      const auto s = f.at("centroid_statistic").get<std::string>();
      if (s == "median") {
        cfg.fusion.centroid_statistic = CentroidStatistic::median;
      } else if (s == "mean") {
        cfg.fusion.centroid_statistic = CentroidStatistic::mean;
      } else {
        throw ValidationError("config: centroid_statistic must be mean|median");
      }
    }
    cfg.fusion.trim_fraction = f.value("trim_fraction", cfg.fusion.trim_fraction);
    if (f.contains("route_thresholds_m")) {
      cfg.fusion.route_thresholds_m =
          config_detail::thresholds_from_json(f.at("route_thresholds_m"));
    }
  }
  if (j.contains("routing_profiles")) {
    cfg.routing_profiles.clear();
    for (const auto& [name, thresholds] : j.at("routing_profiles").items()) {
      cfg.routing_profiles[name] =
          config_detail::thresholds_from_json(thresholds);
    }
  }
  if (j.contains("inpaint")) {
    const auto& i = j.at("inpaint");
    config_detail::reject_unknown_keys(
        i, {"sigma_floor", "neighborhood", "solver_tolerance", "max_iterations"},
        "inpaint");
    cfg.inpaint.sigma_floor = i.value("sigma_floor", cfg.inpaint.sigma_floor);
    cfg.inpaint.neighborhood = i.value("neighborhood", cfg.inpaint.neighborhood);
    cfg.inpaint.solver_tolerance =
        i.value("solver_tolerance", cfg.inpaint.solver_tolerance);
    cfg.inpaint.max_iterations =
        i.value("max_iterations", cfg.inpaint.max_iterations);
  }
  if (j.contains("bev")) {
    const auto& b = j.at("bev");
    config_detail::reject_unknown_keys(
        b, {"resolution_m", "window_length_m", "window_width_m"}, "bev");
    cfg.bev.resolution_m = b.value("resolution_m", cfg.bev.resolution_m);
    cfg.bev.window_length_m = b.value("window_length_m", cfg.bev.window_length_m);
    cfg.bev.window_width_m = b.value("window_width_m", cfg.bev.window_width_m);
  }
  cfg.nms_iou = j.value("nms_iou", cfg.nms_iou);
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    config_detail::reject_unknown_keys(
        e, {"map_iou_long", "map_iou_short", "iou_2d_threshold", "mae_match_iou",
            "distance_bins_m"},
        "eval");
    cfg.eval.map_iou_long = e.value("map_iou_long", cfg.eval.map_iou_long);
    cfg.eval.map_iou_short = e.value("map_iou_short", cfg.eval.map_iou_short);
    cfg.eval.iou_2d_threshold =
        e.value("iou_2d_threshold", cfg.eval.iou_2d_threshold);
    cfg.eval.mae_match_iou = e.value("mae_match_iou", cfg.eval.mae_match_iou);
    if (e.contains("distance_bins_m")) {
      cfg.eval.bins.edges = e.at("distance_bins_m").get<std::vector<double>>();
    }
  }
  cfg.validate();
  return cfg;
}

inline std::string config_to_text(const PipelineConfig& cfg) {
  return config_to_json(cfg).dump(2) + "\n";
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw FormatError("config parse error in " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace mff
