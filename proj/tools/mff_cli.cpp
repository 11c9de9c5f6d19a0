// Command-line front end for the monocular faraway-frustum pipeline.
// Exit codes: 0 success, 1 validation error, 2 IO/format error,
// 3 numerical non-convergence.

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "mff/pipeline.hpp"

namespace {

using namespace mff;

struct GlobalOptions {
  std::string config_path;
  int jobs = 0;
  std::string camera;
  std::string lidar;
  double png_scale = 0.0;
  bool ignore_distortion = false;
  std::string routing_profile;

  PipelineConfig load() const {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (jobs > 0) cfg.jobs = jobs;
    if (!camera.empty()) cfg.camera = camera;
    if (!lidar.empty()) cfg.lidar = lidar;
    if (png_scale > 0.0) cfg.png_scale_m_per_unit = png_scale;
    if (ignore_distortion) cfg.ignore_distortion = true;
    if (!routing_profile.empty()) cfg.apply_routing_profile(routing_profile);
    cfg.validate();
    return cfg;
  }
};

ClassPriorTable load_priors(const std::string& priors_path,
                            const std::string& priors_manifest) {
  if (!priors_path.empty()) {
    return priors_from_json(json::parse(read_text_file(priors_path)));
  }
  if (!priors_manifest.empty()) {
    return compute_class_priors(read_manifest(priors_manifest));
  }
  std::cerr << "note: no priors given, using fallback dimension table\n";
  return fallback_priors();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monocular faraway-frustum 3D detection pipeline"};
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--config", global.config_path, "pipeline config JSON");
  app.add_option("--jobs", global.jobs,
                 "worker threads (1 = bitwise-deterministic outputs)");
  app.add_option("--camera", global.camera, "camera stream name");
  app.add_option("--lidar", global.lidar, "lidar stream name");
  app.add_option("--png-scale", global.png_scale,
                 "meters per 16-bit PNG unit (default 1/256)");
  app.add_flag("--ignore-distortion", global.ignore_distortion,
               "accept calibrations with nonzero distortion coefficients");
  app.add_option("--routing-profile", global.routing_profile,
                 "named per-class route threshold profile from the config");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "build split manifests from a dataset tree");
  std::string ingest_root, ingest_splits, ingest_out;
  ingest->add_option("--root", ingest_root, "dataset root directory")->required();
  ingest->add_option("--splits", ingest_splits, "splits JSON file")->required();
  ingest->add_option("--out", ingest_out, "output directory")->required();

  // depth-gt
  auto* depth_gt = app.add_subcommand("depth-gt", "render sparse depth and inpaint dense ground truth");
  std::string dgt_manifest, dgt_out;
  depth_gt->add_option("--manifest", dgt_manifest)->required();
  depth_gt->add_option("--out", dgt_out)->required();

  // frustumize
  auto* frustumize = app.add_subcommand("frustumize", "extract routed frustum bundles from detections");
  std::string fz_manifest, fz_detections, fz_depths, fz_out;
  frustumize->add_option("--manifest", fz_manifest)->required();
  frustumize->add_option("--detections", fz_detections)->required();
  frustumize->add_option("--depths", fz_depths)->required();
  frustumize->add_option("--out", fz_out)->required();
  bool fz_bev = false;
  frustumize->add_flag("--bev", fz_bev,
                       "also rasterize long-route frustums into BEV grids");

  // run
  auto* run = app.add_subcommand("run", "full pipeline: detections + depths -> 3D predictions");
  std::string run_manifest, run_detections, run_depths, run_out, run_log;
  std::string run_priors, run_priors_manifest, run_adapter_short, run_adapter_long;
  run->add_option("--manifest", run_manifest)->required();
  run->add_option("--detections", run_detections)->required();
  run->add_option("--depths", run_depths)->required();
  run->add_option("--out", run_out, "predictions JSONL")->required();
  run->add_option("--routing-log", run_log, "routing log JSONL (default <out>.routing.jsonl)");
  run->add_option("--priors", run_priors, "class prior table JSON");
  run->add_option("--priors-manifest", run_priors_manifest,
                  "training manifest to compute priors from");
  run->add_option("--adapter-short", run_adapter_short,
                  "external short-range head predictions JSONL");
  run->add_option("--adapter-long", run_adapter_long,
                  "external long-range head predictions JSONL");

  // eval
  auto* eval = app.add_subcommand("eval", "score predictions/detections against a manifest");
  std::string ev_predictions, ev_detections, ev_manifest, ev_json, ev_text;
  eval->add_option("--predictions", ev_predictions, "3D predictions JSONL");
  eval->add_option("--detections", ev_detections, "2.5D detections JSONL");
  eval->add_option("--manifest", ev_manifest)->required();
  eval->add_option("--out-json", ev_json, "report JSON (default report.json)");
  eval->add_option("--out-text", ev_text, "report text (default report.txt)");

  // stats
  auto* stats = app.add_subcommand("stats", "dataset statistics CSV and depth-error heatmap");
  std::string st_manifest, st_csv, st_pred, st_gt, st_heatmap;
  stats->add_option("--manifest", st_manifest)->required();
  stats->add_option("--out-csv", st_csv)->required();
  stats->add_option("--pred-depths", st_pred, "predicted depth DMAP directory");
  stats->add_option("--gt-depths", st_gt, "ground-truth depth DMAP directory");
  stats->add_option("--heatmap", st_heatmap, "output stem for <stem>.dmap/.png");

  // synth
  auto* synth = app.add_subcommand("synth", "generate the synthetic oracle dataset");
  std::string sy_out;
  SynthConfig synth_cfg;
  synth->add_option("--out", sy_out)->required();
  synth->add_option("--frames", synth_cfg.frames);
  synth->add_option("--objects", synth_cfg.objects_per_frame);
  synth->add_option("--noise-sigma", synth_cfg.distance_noise_sigma,
                    "Gaussian distance noise on emitted detections (m)");

  // priors
  auto* priors = app.add_subcommand("priors", "compute class priors from a training manifest");
  std::string pr_manifest, pr_out;
  priors->add_option("--manifest", pr_manifest)->required();
  priors->add_option("--out", pr_out)->required();

  // depth-convert
  auto* depth_convert = app.add_subcommand(
      "depth-convert", "convert depth rasters between DMAP and 16-bit PNG");
  std::string dc_in, dc_out;
  depth_convert->add_option("--in", dc_in, "input .dmap or .png")->required();
  depth_convert->add_option("--out", dc_out, "output .dmap or .png")->required();

  // config
  auto* config_cmd = app.add_subcommand("config", "print the effective configuration");
  std::string cfg_write_defaults;
  config_cmd->add_option("--write-defaults", cfg_write_defaults,
                         "write default_config.json and class_map.json into DIR");

  CLI11_PARSE(app, argc, argv);

  try {
    const PipelineConfig cfg = global.load();

    if (*ingest) {
      const auto paths = cmd_ingest(ingest_root, ingest_splits, ingest_out, cfg);
      for (const auto& [split, path] : paths) {
        std::cout << split << ": " << path.string() << "\n";
      }
    } else if (*depth_gt) {
      const auto manifest = read_manifest(dgt_manifest);
      const auto result = cmd_depth_gt(manifest, dgt_out, cfg);
      std::cout << "processed " << result.frames_processed << " frames ("
                << result.frames_skipped << " skipped)\n";
    } else if (*frustumize) {
      const auto manifest = read_manifest(fz_manifest);
      cmd_frustumize(manifest, fz_detections, fz_depths, fz_out, cfg, fz_bev);
      std::cout << "bundle written to " << fz_out << "\n";
    } else if (*run) {
      const auto manifest = read_manifest(run_manifest);
      const auto prior_table = load_priors(run_priors, run_priors_manifest);
      const fs::path log_path =
          run_log.empty() ? fs::path(run_out + ".routing.jsonl") : fs::path(run_log);
      const fs::path adapter_short(run_adapter_short), adapter_long(run_adapter_long);
      const auto result = cmd_run(
          manifest, run_detections, run_depths, run_out, log_path, cfg,
          prior_table, run_adapter_short.empty() ? nullptr : &adapter_short,
          run_adapter_long.empty() ? nullptr : &adapter_long);
      std::cout << result.predictions << " predictions ("
                << result.routed_short << " short, " << result.routed_long
                << " long, " << result.errors << " errors)\n";
    } else if (*eval) {
      if (ev_predictions.empty() && ev_detections.empty())
        throw ValidationError("eval: need --predictions and/or --detections");
      const auto manifest = read_manifest(ev_manifest);
      const fs::path pred_path(ev_predictions), det_path(ev_detections);
      const fs::path out_json =
          ev_json.empty() ? fs::path("report.json") : fs::path(ev_json);
      const fs::path out_text =
          ev_text.empty() ? fs::path("report.txt") : fs::path(ev_text);
      const auto report = cmd_eval(
          ev_predictions.empty() ? nullptr : &pred_path,
          ev_detections.empty() ? nullptr : &det_path, manifest, out_json,
          out_text, cfg);
      std::cout << report_to_text(report);
    } else if (*stats) {
      const auto manifest = read_manifest(st_manifest);
      const fs::path pred_dir(st_pred), gt_dir(st_gt), heatmap(st_heatmap);
      const bool with_heatmap =
          !st_pred.empty() && !st_gt.empty() && !st_heatmap.empty();
      const auto result = cmd_stats(
          manifest, st_csv, cfg, with_heatmap ? &pred_dir : nullptr,
          with_heatmap ? &gt_dir : nullptr, with_heatmap ? &heatmap : nullptr);
      std::cout << result.rows << " rows (" << result.skipped_frames
                << " frames skipped)";
      if (with_heatmap) std::cout << ", heatmap over " << result.heatmap_frames
                                  << " frames";
      std::cout << "\n";
    } else if (*synth) {
      synth_cfg.seed = cfg.seed;
      const auto manifests = cmd_synth(sy_out, synth_cfg, cfg);
      for (const auto& [split, path] : manifests) {
        std::cout << split << ": " << path.string() << "\n";
      }
    } else if (*priors) {
      const auto manifest = read_manifest(pr_manifest);
      const auto table = compute_class_priors(manifest);
      write_text_file(pr_out, priors_to_json(table).dump(2) + "\n");
      std::cout << "priors written to " << pr_out << "\n";
    } else if (*depth_convert) {
      const auto ext_of = [](const fs::path& p) { return p.extension().string(); };
      const fs::path in_path(dc_in), out_path(dc_out);
      DepthMap map;
      if (ext_of(in_path) == ".dmap") {
        map = read_dmap(in_path);
      } else if (ext_of(in_path) == ".png") {
        map = read_gray16_png(in_path, cfg.png_scale_m_per_unit);
      } else {
        throw ValidationError("depth-convert: input must be .dmap or .png");
      }
      if (ext_of(out_path) == ".dmap") {
        write_dmap(out_path, map);
      } else if (ext_of(out_path) == ".png") {
        write_gray16_png(out_path, map, cfg.png_scale_m_per_unit);
      } else {
        throw ValidationError("depth-convert: output must be .dmap or .png");
      }
      std::cout << dc_out << " (" << map.width << "x" << map.height << ", "
                << map.valid_count() << " valid pixels)\n";
    } else if (*config_cmd) {
      if (!cfg_write_defaults.empty()) {
        fs::create_directories(cfg_write_defaults);
        write_text_file(fs::path(cfg_write_defaults) / "default_config.json",
                        config_to_text(PipelineConfig{}));
        write_text_file(fs::path(cfg_write_defaults) / "class_map.json",
                        write_class_map(ClassNameMap{}));
        std::cout << "defaults written to " << cfg_write_defaults << "\n";
      } else {
        std::cout << config_to_text(cfg);
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
