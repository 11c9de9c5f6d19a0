#include "mff/pipeline.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace mff {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& path) { return read_text_file(path); }

SynthConfig mid_synth_config() {
  SynthConfig sc;
  sc.frames = 2;
  sc.objects_per_frame = 10;
  sc.camera = CameraIntrinsics{800.0, 800.0, 384.0, 216.0, 768, 432};
  return sc;
}

class PipelineFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("mff_pipeline_" + std::string(::testing::UnitTest::GetInstance()
                                               ->current_test_info()
                                               ->name()));
    fs::remove_all(root_);
    fs::create_directories(root_);
    cfg_ = PipelineConfig{};
  }
  void TearDown() override { fs::remove_all(root_); }

  fs::path root_;
  PipelineConfig cfg_;
};

TEST_F(PipelineFixture, SynthToEvalEndToEnd) {
  const auto manifests = cmd_synth(root_, mid_synth_config(), cfg_);
  const auto train = read_manifest(manifests.at("train"));
  const auto test = read_manifest(manifests.at("test"));
  ASSERT_EQ(train.frames.size(), 1u);
  ASSERT_EQ(test.frames.size(), 1u);
  EXPECT_EQ(train.frames[0].labels.size(), 10u);

  // Computed priors reproduce the synthetic dims exactly (identical objects
  // per class).
  const auto priors = compute_class_priors(train);
  EXPECT_FALSE(priors.for_class(ObjectClass::person).from_fallback);
  EXPECT_DOUBLE_EQ(priors.for_class(ObjectClass::person).length, 0.4);
  EXPECT_DOUBLE_EQ(priors.for_class(ObjectClass::catenary_pole).height, 6.0);

  const fs::path pred_a = root_ / "pred_a.jsonl";
  const fs::path pred_b = root_ / "pred_b.jsonl";
  const fs::path log_a = root_ / "log_a.jsonl";
  const fs::path log_b = root_ / "log_b.jsonl";
  const auto run_a = cmd_run(test, root_ / "detections.jsonl", root_ / "depths",
                             pred_a, log_a, cfg_, priors);
  const auto run_b = cmd_run(test, root_ / "detections.jsonl", root_ / "depths",
                             pred_b, log_b, cfg_, priors);
  EXPECT_EQ(run_a.errors, 0u);
  EXPECT_EQ(run_a.routed_short + run_a.routed_long, 10u);
  // Identical inputs give byte-identical outputs.
  EXPECT_EQ(slurp(pred_a), slurp(pred_b));
  EXPECT_EQ(slurp(log_a), slurp(log_b));

  // Routing log partitions the detections: one entry per detection, each
  // short or long, and long exactly when the GT sits beyond 100 m (objects
  // are placed clear of the boundary).
  std::ifstream log(log_a);
  std::string line;
  std::set<int> seen_refs;
  std::size_t entries = 0;
  while (std::getline(log, line)) {
    const auto j = json::parse(line);
    ++entries;
    EXPECT_TRUE(seen_refs.insert(j.at("frustum_ref").get<int>()).second);
    const std::string status = j.at("status").get<std::string>();
    ASSERT_TRUE(status == "short" || status == "long");
    const int ref = j.at("frustum_ref").get<int>();
    const double gt_x = test.frames[0].labels[ref].box3d->center.x();
    EXPECT_EQ(status == "long", gt_x > 100.0) << "ref " << ref << " at " << gt_x;
  }
  EXPECT_EQ(entries, 10u);

  const auto report = cmd_eval(&pred_a, nullptr, test, root_ / "report.json",
                               root_ / "report.txt", cfg_);
  for (ObjectClass cls : kEvalClasses) {
    const auto& ce = report.per_class_3d.at(std::string(class_name(cls)));
    ASSERT_GT(ce.gt_count, 0u);
    ASSERT_TRUE(ce.ap_3d.at(0.1).has_value());
    EXPECT_DOUBLE_EQ(*ce.ap_3d.at(0.1), 1.0) << class_name(cls);
    EXPECT_DOUBLE_EQ(*ce.ap_bev.at(0.1), 1.0) << class_name(cls);
  }
  EXPECT_DOUBLE_EQ(*report.map_3d.at(0.1), 1.0);

  // Center error stays within the frustum surface bias plus the pixel
  // quantization of this mid-resolution camera.
  const auto preds = read_adapter_predictions(pred_a);
  ASSERT_EQ(preds.size(), 10u);
  for (const auto& p : preds) {
    const auto& gt = *test.frames[0].labels[p.frustum_ref].box3d;
    EXPECT_LT((p.box3d.center - gt.center).norm(), 0.45)
        << "ref " << p.frustum_ref;
  }

  // Rerunning the whole evaluation yields byte-identical reports.
  const auto report_again = cmd_eval(&pred_a, nullptr, test,
                                     root_ / "report2.json",
                                     root_ / "report2.txt", cfg_);
  EXPECT_EQ(slurp(root_ / "report.json"), slurp(root_ / "report2.json"));
}

TEST_F(PipelineFixture, JobsDoNotChangeOutputs) {
  cmd_synth(root_, mid_synth_config(), cfg_);
  const auto test = read_manifest(root_ / "manifest_test.json");
  const auto priors = fallback_priors();
  PipelineConfig parallel = cfg_;
  parallel.jobs = 4;
  cmd_run(test, root_ / "detections.jsonl", root_ / "depths",
          root_ / "p1.jsonl", root_ / "l1.jsonl", cfg_, priors);
  cmd_run(test, root_ / "detections.jsonl", root_ / "depths",
          root_ / "p4.jsonl", root_ / "l4.jsonl", parallel, priors);
  EXPECT_EQ(slurp(root_ / "p1.jsonl"), slurp(root_ / "p4.jsonl"));
  EXPECT_EQ(slurp(root_ / "l1.jsonl"), slurp(root_ / "l4.jsonl"));
}

TEST_F(PipelineFixture, FrustumizeWritesBundleAndLog) {
  cmd_synth(root_, mid_synth_config(), cfg_);
  const auto test = read_manifest(root_ / "manifest_test.json");
  cmd_frustumize(test, root_ / "detections.jsonl", root_ / "depths",
                 root_ / "frustums", cfg_, /*export_bev=*/true);
  const auto index =
      read_frustum_index(root_ / "frustums" / "bundle" / "index.jsonl");
  EXPECT_EQ(index.size(), 10u);
  std::size_t long_count = 0;
  for (const auto& [key, entry] : index.entries()) {
    const auto cloud =
        read_point_cloud(root_ / "frustums" / "bundle" / entry.points_file);
    EXPECT_FALSE(cloud.empty());
    if (entry.route != Route::long_range) continue;
    ++long_count;
    // Long-route frustums also export BEV channel rasters plus a sidecar.
    const std::string stem =
        entry.frame_id + "_" + std::to_string(entry.frustum_ref);
    const auto density =
        read_dmap(root_ / "frustums" / "bev" / (stem + "_density.dmap"));
    double sum = 0.0;
    for (float v : density.values) {
      if (std::isfinite(v)) sum += v;
    }
    EXPECT_GT(sum, 0.0);
    const auto sidecar = json::parse(
        read_text_file(root_ / "frustums" / "bev" / (stem + ".json")));
    EXPECT_DOUBLE_EQ(sidecar.at("resolution").get<double>(), 0.25);
    EXPECT_EQ(sidecar.at("cells")[0].get<int>(), 192);
    double prior_sum = 0.0;
    for (const auto& v : sidecar.at("class_prior")) prior_sum += v.get<double>();
    EXPECT_DOUBLE_EQ(prior_sum, 1.0);
  }
  EXPECT_GT(long_count, 0u);
  EXPECT_TRUE(fs::exists(root_ / "frustums" / "routing_log.jsonl"));
}

TEST_F(PipelineFixture, AdapterReplacesLongRoute) {
  cmd_synth(root_, mid_synth_config(), cfg_);
  const auto test = read_manifest(root_ / "manifest_test.json");
  const auto priors = compute_class_priors(read_manifest(root_ / "manifest_train.json"));

  // Baseline run to learn the routing.
  cmd_run(test, root_ / "detections.jsonl", root_ / "depths",
          root_ / "base.jsonl", root_ / "base_log.jsonl", cfg_, priors);

  // External long head: the ground truth itself.
  std::vector<HeadPrediction> adapter;
  std::ifstream log(root_ / "base_log.jsonl");
  std::string line;
  while (std::getline(log, line)) {
    const auto j = json::parse(line);
    if (j.at("status").get<std::string>() != "long") continue;
    const int ref = j.at("frustum_ref").get<int>();
    HeadPrediction p;
    p.box3d = *test.frames[0].labels[ref].box3d;
    p.score = 1.0;
    p.route = Route::long_range;
    p.frame_id = test.frames[0].frame_id;
    p.frustum_ref = ref;
    adapter.push_back(p);
  }
  ASSERT_FALSE(adapter.empty());
  write_predictions_jsonl(root_ / "adapter_long.jsonl", adapter);

  const fs::path adapter_path = root_ / "adapter_long.jsonl";
  cmd_run(test, root_ / "detections.jsonl", root_ / "depths",
          root_ / "spliced.jsonl", root_ / "spliced_log.jsonl", cfg_, priors,
          nullptr, &adapter_path);
  const auto preds = read_adapter_predictions(root_ / "spliced.jsonl");
  std::size_t long_exact = 0;
  for (const auto& p : preds) {
    if (p.route != Route::long_range) continue;
    const auto& gt = *test.frames[0].labels[p.frustum_ref].box3d;
    EXPECT_LT((p.box3d.center - gt.center).norm(), 1e-9);
    ++long_exact;
  }
  EXPECT_EQ(long_exact, adapter.size());
}

TEST_F(PipelineFixture, DepthGtRendersAndInpaints) {
  SynthConfig sc;
  sc.frames = 1;
  sc.objects_per_frame = 5;
  sc.camera = CameraIntrinsics{100.0, 100.0, 48.0, 27.0, 96, 54};
  sc.cloud_stride = 2;
  cmd_synth(root_, sc, cfg_);
  const auto train = read_manifest(root_ / "manifest_train.json");
  const auto result = cmd_depth_gt(train, root_ / "depth_gt", cfg_);
  EXPECT_EQ(result.frames_processed, 1u);

  const auto sparse = read_dmap(root_ / "depth_gt" / "sparse" / "000000.dmap");
  const auto dense = read_dmap(root_ / "depth_gt" / "dense" / "000000.dmap");
  EXPECT_GT(sparse.valid_count(), 0u);
  // Sky pixels have no depth anywhere; ground/object pixels densify.
  EXPECT_GE(dense.valid_count(), sparse.valid_count());
  for (int r = 0; r < sparse.height; ++r) {
    for (int c = 0; c < sparse.width; ++c) {
      if (sparse.valid_at(r, c)) {
        ASSERT_EQ(dense.at(r, c), sparse.at(r, c));  // hard constraints
      }
    }
  }
}

TEST_F(PipelineFixture, StatsCsvAndHeatmap) {
  cmd_synth(root_, mid_synth_config(), cfg_);
  const auto train = read_manifest(root_ / "manifest_train.json");
  const fs::path depths = root_ / "depths";
  const fs::path heatmap = root_ / "heatmap";
  const auto result = cmd_stats(train, root_ / "stats.csv", cfg_, &depths,
                                &depths, &heatmap);
  EXPECT_EQ(result.rows, 10u);
  EXPECT_EQ(result.skipped_frames, 0u);
  EXPECT_EQ(result.heatmap_frames, 1u);
  const auto csv = slurp(root_ / "stats.csv");
  EXPECT_NE(csv.find("class,gt_x,points"), std::string::npos);
  // Identical prediction and GT depths give an all-zero mean error map.
  const auto mean = read_dmap(root_ / "heatmap.dmap");
  for (float v : mean.values) {
    if (std::isfinite(v)) ASSERT_EQ(v, 0.0f);
  }
  EXPECT_TRUE(fs::exists(root_ / "heatmap.png"));
}

// ---------------------------------------------------------------------------
// Process-level checks of the installed CLI: flag plumbing and exit codes.

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MFF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

TEST_F(PipelineFixture, CliRoundTripAndExitCodes) {
  ASSERT_EQ(run_cli("synth --out " + (root_ / "data").string() +
                    " --frames 2 --objects 5"),
            0);
  ASSERT_EQ(run_cli("priors --manifest " +
                    (root_ / "data" / "manifest_train.json").string() +
                    " --out " + (root_ / "priors.json").string()),
            0);
  ASSERT_EQ(run_cli("run --manifest " +
                    (root_ / "data" / "manifest_test.json").string() +
                    " --detections " +
                    (root_ / "data" / "detections.jsonl").string() +
                    " --depths " + (root_ / "data" / "depths").string() +
                    " --priors " + (root_ / "priors.json").string() +
                    " --out " + (root_ / "preds.jsonl").string()),
            0);
  ASSERT_EQ(run_cli("eval --predictions " + (root_ / "preds.jsonl").string() +
                    " --manifest " +
                    (root_ / "data" / "manifest_test.json").string() +
                    " --out-json " + (root_ / "r.json").string() +
                    " --out-text " + (root_ / "r.txt").string()),
            0);

  // Validation failure: prediction referencing a frame the manifest lacks.
  {
    std::ofstream bad(root_ / "bad_preds.jsonl");
    bad << R"({"frame_id": "ghost", "class": "person", "score": 1.0, "cx": 10, "cy": 0, "cz": 0, "l": 1, "w": 1, "h": 1, "yaw": 0, "frame": "sensor", "route": "short", "frustum_ref": 0})"
        << "\n";
  }
  EXPECT_EQ(run_cli("eval --predictions " + (root_ / "bad_preds.jsonl").string() +
                    " --manifest " +
                    (root_ / "data" / "manifest_test.json").string() +
                    " --out-json " + (root_ / "r2.json").string() +
                    " --out-text " + (root_ / "r2.txt").string()),
            1);

  // IO failure: missing input file.
  EXPECT_EQ(run_cli("eval --predictions " + (root_ / "missing.jsonl").string() +
                    " --manifest " +
                    (root_ / "data" / "manifest_test.json").string()),
            2);

  // Config with unknown key is a validation failure.
  write_text_file(root_ / "bad_config.json",
                  R"({"config_version": 1, "not_a_key": true})");
  EXPECT_EQ(run_cli("--config " + (root_ / "bad_config.json").string() +
                    " config"),
            1);
}

}  // namespace
}  // namespace mff
