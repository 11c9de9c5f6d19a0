#pragma once

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "mff/adapter_io.hpp"
#include "mff/bev.hpp"
#include "mff/config.hpp"
#include "mff/depth_metrics.hpp"
#include "mff/depth_render.hpp"
#include "mff/eval_report.hpp"
#include "mff/inpaint.hpp"
#include "mff/png_io.hpp"
#include "mff/stats.hpp"
#include "mff/synth.hpp"

// Batch commands behind the CLI. Every command is a pure function of its
// inputs and configuration: rerunning with identical inputs produces
// byte-identical outputs. Frame-level work fans out over `jobs` threads;
// per-frame results land in index-addressed slots and are serialized in
// frame order afterwards, so the thread count never changes the output.

namespace mff {

namespace pipeline_detail {

template <typename Fn>
void parallel_frames(std::size_t count, int jobs, Fn&& fn) {
  jobs = std::max(1, jobs);
  if (jobs == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> workers;
  const int n_workers = std::min<std::size_t>(jobs, count);
  workers.reserve(n_workers);
  for (int t = 0; t < n_workers; ++t) {
    workers.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < count;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Frame's camera calibration under the configured stream selection.
inline const SensorCalibration& camera_for(const FrameAnnotation& frame,
                                           const PipelineConfig& cfg) {
  if (frame.calibration.empty())
    throw ValidationError("frame '" + frame.frame_id + "' has no camera calibration");
  if (!cfg.camera.empty()) {
    const auto it = frame.calibration.find(cfg.camera);
    if (it == frame.calibration.end())
      throw ValidationError("frame '" + frame.frame_id + "': no stream '" +
                            cfg.camera + "'");
    return it->second;
  }
  if (frame.calibration.size() > 1)
    throw ValidationError("frame '" + frame.frame_id +
                          "' has multiple camera streams; pass --camera");
  return frame.calibration.begin()->second;
}

}  // namespace pipeline_detail

// ---------------------------------------------------------------------------

// ingest: dataset tree + split file -> one manifest JSON per split.
inline std::map<std::string, fs::path> cmd_ingest(const fs::path& root,
                                                  const fs::path& split_file,
                                                  const fs::path& out_dir,
                                                  const PipelineConfig& cfg) {
  cfg.validate();
  fs::create_directories(out_dir);
  const auto manifests =
      build_manifest(root, split_file, cfg.ingest_options());
  std::map<std::string, fs::path> out;
  for (const auto& [split, manifest] : manifests) {
    const fs::path path = out_dir / ("manifest_" + split + ".json");
    write_text_file(path, write_manifest(manifest));
    out[split] = path;
  }
  return out;
}

// depth-gt: project each frame's cloud and inpaint it into a dense map.
struct DepthGtResult {
  std::size_t frames_processed = 0;
  std::size_t frames_skipped = 0;  // no cloud or no calibration
};

inline DepthGtResult cmd_depth_gt(const DatasetManifest& manifest,
                                  const fs::path& out_dir,
                                  const PipelineConfig& cfg) {
  cfg.validate();
  fs::create_directories(out_dir / "sparse");
  fs::create_directories(out_dir / "dense");
  std::vector<int> processed(manifest.frames.size(), 0);
  pipeline_detail::parallel_frames(
      manifest.frames.size(), cfg.jobs, [&](std::size_t i) {
        const auto& frame = manifest.frames[i];
        if (!frame.cloud_path || frame.calibration.empty()) return;
        const auto& calib = pipeline_detail::camera_for(frame, cfg);
        const PointCloud cloud =
            read_point_cloud(manifest.resolve(*frame.cloud_path));
        const SparseDepth sparse =
            render_sparse_depth(cloud, calib.sensor_to_camera, calib.intrinsics);
        write_dmap(out_dir / "sparse" / (frame.frame_id + ".dmap"), sparse.map);

        GrayImage guide;
        const GrayImage* guide_ptr = nullptr;
        if (frame.image_path) {
          guide = read_guide_png(manifest.resolve(*frame.image_path));
          guide_ptr = &guide;
        }
        const DepthMap dense = inpaint_depth(sparse, guide_ptr, cfg.inpaint);
        write_dmap(out_dir / "dense" / (frame.frame_id + ".dmap"), dense);
        processed[i] = 1;
      });
  DepthGtResult result;
  for (int p : processed) {
    if (p) ++result.frames_processed;
  }
  result.frames_skipped = manifest.frames.size() - result.frames_processed;
  return result;
}

// ---------------------------------------------------------------------------

struct RoutingLogEntry {
  std::string frame_id;
  int frustum_ref = -1;
  ObjectClass class_id = ObjectClass::other;
  std::string status;  // "short" | "long" | "error"
  double fused_distance = 0.0;
  double threshold = 0.0;
  bool synthetic = false;
  std::string error;
};

inline std::string routing_entry_to_jsonl(const RoutingLogEntry& e) {
  ordered_json j;
  j["frame_id"] = e.frame_id;
  j["frustum_ref"] = e.frustum_ref;
  j["class"] = std::string(class_name(e.class_id));
  j["status"] = e.status;
  if (e.status != "error") {
    j["fused_distance"] = e.fused_distance;
    j["threshold"] = e.threshold;
    j["synthetic"] = e.synthetic;
  } else {
    j["error"] = e.error;
  }
  return j.dump();
}

struct FrameFrustums {
  std::vector<Frustum> frustums;  // frustum frame
  std::vector<Route> routes;
  std::vector<RoutingLogEntry> log;
};

// Shared frustumization step: detections + depth -> routed frustum-frame
// clouds plus the routing log. Detections whose box contains no valid depth
// fall back to a synthetic single-point frustum; detections that still fail
// land in the log with status "error".
inline FrameFrustums frustumize_frame(const FrameAnnotation& frame,
                                      const std::vector<Detection25D>& dets,
                                      const DepthMap& depth,
                                      const PipelineConfig& cfg) {
  const auto& calib = pipeline_detail::camera_for(frame, cfg);
  const RigidTransform camera_to_sensor = invert(calib.sensor_to_camera);
  FrameFrustums out;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    RoutingLogEntry entry;
    entry.frame_id = frame.frame_id;
    entry.frustum_ref = static_cast<int>(i);
    entry.class_id = dets[i].class_id;
    try {
      Frustum f;
      try {
        f = extract_frustum(dets[i], depth, calib.intrinsics, camera_to_sensor,
                            cfg.fusion);
      } catch (const ValidationError&) {
        f = synthetic_frustum(dets[i], calib.intrinsics, camera_to_sensor,
                              cfg.fusion);
      }
      f.frame_id = frame.frame_id;
      f.detection_index = static_cast<int>(i);
      const RoutingDecision decision = route(f, cfg.fusion);
      entry.status = std::string(route_name(decision.route));
      entry.fused_distance = decision.fused_distance;
      entry.threshold = decision.threshold_used;
      entry.synthetic = f.synthetic;
      out.frustums.push_back(to_frustum_frame(f));
      out.routes.push_back(decision.route);
    } catch (const Error& e) {
      entry.status = "error";
      entry.error = e.what();
    }
    out.log.push_back(std::move(entry));
  }
  return out;
}

inline DepthMap load_frame_depth(const fs::path& depths_dir,
                                 const std::string& frame_id,
                                 double png_scale) {
  const fs::path dmap = depths_dir / (frame_id + ".dmap");
  if (fs::exists(dmap)) return read_dmap(dmap);
  const fs::path png = depths_dir / (frame_id + ".png");
  if (fs::exists(png)) return read_gray16_png(png, png_scale);
  throw FormatError("no depth map for frame '" + frame_id + "' under " +
                    depths_dir.string());
}

// frustumize: manifest + detections + depths -> frustum bundle + routing
// log. With `export_bev`, long-route frustums are additionally rasterized
// into `<out>/bev/<frame>_<ref>_*` channel DMAPs plus JSON sidecars, ready
// for an external long-range head.
inline void cmd_frustumize(const DatasetManifest& manifest,
                           const fs::path& detections_path,
                           const fs::path& depths_dir, const fs::path& out_dir,
                           const PipelineConfig& cfg, bool export_bev = false) {
  cfg.validate();
  const auto detections = read_detections_jsonl(detections_path);
  std::vector<FrameFrustums> results(manifest.frames.size());
  pipeline_detail::parallel_frames(
      manifest.frames.size(), cfg.jobs, [&](std::size_t i) {
        const auto& frame = manifest.frames[i];
        const auto it = detections.find(frame.frame_id);
        if (it == detections.end()) return;
        const DepthMap depth = load_frame_depth(depths_dir, frame.frame_id,
                                                cfg.png_scale_m_per_unit);
        results[i] = frustumize_frame(frame, it->second, depth, cfg);
      });

  fs::create_directories(out_dir);
  std::vector<Frustum> frustums;
  std::vector<Route> routes;
  std::ofstream log(out_dir / "routing_log.jsonl");
  if (!log)
    throw FormatError("cannot open for writing: " +
                      (out_dir / "routing_log.jsonl").string());
  for (const auto& result : results) {
    for (const auto& entry : result.log)
      log << routing_entry_to_jsonl(entry) << "\n";
    frustums.insert(frustums.end(), result.frustums.begin(),
                    result.frustums.end());
    routes.insert(routes.end(), result.routes.begin(), result.routes.end());
  }
  write_frustum_bundle(out_dir / "bundle", frustums, routes);

  if (export_bev) {
    fs::create_directories(out_dir / "bev");
    for (std::size_t i = 0; i < frustums.size(); ++i) {
      if (routes[i] != Route::long_range) continue;
      const auto grid =
          rasterize_bev(frustums[i], cfg.bev.resolution_m,
                        cfg.bev.window_length_m, cfg.bev.window_width_m);
      const std::string stem = frustums[i].frame_id + "_" +
                               std::to_string(frustums[i].detection_index);
      write_bev(out_dir / "bev" / stem, grid);
    }
  }
}

// run: full pipeline to a predictions JSONL. Routes with an adapter file
// take their boxes from it (keyed by frame_id + frustum_ref); the baseline
// geometric head covers everything else.
struct RunResult {
  std::size_t predictions = 0;
  std::size_t routed_short = 0;
  std::size_t routed_long = 0;
  std::size_t errors = 0;
};

inline RunResult cmd_run(const DatasetManifest& manifest,
                         const fs::path& detections_path,
                         const fs::path& depths_dir,
                         const fs::path& out_predictions,
                         const fs::path& out_routing_log,
                         const PipelineConfig& cfg,
                         const ClassPriorTable& priors,
                         const fs::path* adapter_short = nullptr,
                         const fs::path* adapter_long = nullptr) {
  cfg.validate();
  const auto detections = read_detections_jsonl(detections_path);
  std::vector<FrameFrustums> results(manifest.frames.size());
  pipeline_detail::parallel_frames(
      manifest.frames.size(), cfg.jobs, [&](std::size_t i) {
        const auto& frame = manifest.frames[i];
        const auto it = detections.find(frame.frame_id);
        if (it == detections.end()) return;
        const DepthMap depth = load_frame_depth(depths_dir, frame.frame_id,
                                                cfg.png_scale_m_per_unit);
        results[i] = frustumize_frame(frame, it->second, depth, cfg);
      });

  // Adapter predictions replace the baseline for their route.
  std::map<std::pair<std::string, int>, HeadPrediction> adapted;
  const auto load_adapter = [&](const fs::path* path, Route route) {
    if (!path) return;
    for (auto& p : read_adapter_predictions(*path)) {
      if (p.route != route) continue;
      adapted[{p.frame_id, p.frustum_ref}] = p;
    }
  };
  load_adapter(adapter_short, Route::short_range);
  load_adapter(adapter_long, Route::long_range);

  RunResult stats;
  std::vector<HeadPrediction> short_preds, long_preds;
  std::ofstream log(out_routing_log);
  if (!log)
    throw FormatError("cannot open for writing: " + out_routing_log.string());
  for (const auto& result : results) {
    for (const auto& entry : result.log) {
      log << routing_entry_to_jsonl(entry) << "\n";
      if (entry.status == "error") ++stats.errors;
    }
    for (std::size_t k = 0; k < result.frustums.size(); ++k) {
      const Frustum& f = result.frustums[k];
      const Route route = result.routes[k];
      (route == Route::short_range ? stats.routed_short : stats.routed_long)++;
      const bool has_adapter = (route == Route::short_range && adapter_short) ||
                               (route == Route::long_range && adapter_long);
      if (has_adapter) {
        const auto it = adapted.find({f.frame_id, f.detection_index});
        if (it == adapted.end()) continue;  // external head declined
        (route == Route::short_range ? short_preds : long_preds)
            .push_back(it->second);
      } else {
        (route == Route::short_range ? short_preds : long_preds)
            .push_back(baseline_head(f, priors, route));
      }
    }
  }
  const auto merged = merge_and_nms(short_preds, long_preds, cfg.nms_iou);
  write_predictions_jsonl(out_predictions, merged);
  stats.predictions = merged.size();
  return stats;
}

// eval: predictions and/or 2.5D detections against a manifest.
inline EvalReport cmd_eval(const fs::path* predictions_path,
                           const fs::path* detections_path,
                           const DatasetManifest& manifest,
                           const fs::path& out_json, const fs::path& out_text,
                           const PipelineConfig& cfg) {
  cfg.validate();
  std::vector<HeadPrediction> predictions;
  if (predictions_path)
    predictions = read_adapter_predictions(*predictions_path);
  std::map<std::string, std::vector<Detection25D>> detections;
  if (detections_path) detections = read_detections_jsonl(*detections_path);
  EvalReport report =
      build_eval_report(predictions, detections, manifest, cfg.eval);
  if (!predictions_path) {
    // 2.5D-only evaluation: drop the vacuous 3D section.
    report.per_class_3d.clear();
    report.map_bev.clear();
    report.map_3d.clear();
  }
  write_text_file(out_json, report_to_json(report));
  write_text_file(out_text, report_to_text(report));
  return report;
}

// stats: per-object in-box point counts vs distance (CSV) and, when prediction and
// ground-truth depth directories are provided, the mean depth-error heatmap.
struct StatsResult {
  std::size_t rows = 0;
  std::size_t skipped_frames = 0;
  std::size_t heatmap_frames = 0;
};

inline StatsResult cmd_stats(const DatasetManifest& manifest,
                             const fs::path& out_csv,
                             const PipelineConfig& cfg,
                             const fs::path* pred_depths = nullptr,
                             const fs::path* gt_depths = nullptr,
                             const fs::path* out_heatmap_stem = nullptr) {
  cfg.validate();
  StatsResult result;
  const auto rows = distance_points_stats(manifest, &result.skipped_frames);
  write_text_file(out_csv, stats_to_csv(rows));
  result.rows = rows.size();

  if (pred_depths && gt_depths && out_heatmap_stem) {
    std::vector<DepthErrorReport> reports;
    for (const auto& frame : manifest.frames) {
      const fs::path pred = *pred_depths / (frame.frame_id + ".dmap");
      const fs::path gt = *gt_depths / (frame.frame_id + ".dmap");
      if (!fs::exists(pred) || !fs::exists(gt)) continue;
      reports.push_back(depth_errors(read_dmap(pred), read_dmap(gt)));
    }
    if (reports.empty())
      throw ValidationError("stats: no frame has both predicted and GT depth");
    result.heatmap_frames = reports.size();
    const DepthMap mean = aggregate_error_heatmap(reports);
    write_dmap(out_heatmap_stem->string() + ".dmap", mean);
    float max_err = 0.0f;
    for (float v : mean.values) {
      if (std::isfinite(v)) max_err = std::max(max_err, v);
    }
    write_rgb8_png(out_heatmap_stem->string() + ".png", mean.width, mean.height,
                   heatmap_to_rgb(mean, max_err > 0 ? max_err : 1.0));
  }
  return result;
}

// synth: generate the synthetic dataset tree plus its manifests.
inline std::map<std::string, fs::path> cmd_synth(const fs::path& out_root,
                                                 const SynthConfig& synth_cfg,
                                                 const PipelineConfig& cfg) {
  cfg.validate();
  const SynthScene scene = generate_synth_scene(synth_cfg);
  write_synth_dataset(out_root, scene);
  PipelineConfig ingest_cfg = cfg;
  ingest_cfg.camera = "rgb";
  ingest_cfg.lidar = "lidar";
  return cmd_ingest(out_root, out_root / "splits.json", out_root, ingest_cfg);
}

}  // namespace mff
