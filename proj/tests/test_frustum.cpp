#include "mff/frustum.hpp"

#include <gtest/gtest.h>

#include "mff/bev.hpp"
#include "mff/rng.hpp"

namespace mff {
namespace {

CameraIntrinsics small_camera() {
  return CameraIntrinsics{100.0, 100.0, 32.0, 24.0, 64, 48};
}

Detection25D detection(ObjectClass cls, double distance, Box2D box,
                       double confidence = 0.9) {
  Detection25D det;
  det.box2d = box;
  det.class_id = cls;
  det.confidence = confidence;
  det.distance_m = distance;
  return det;
}

TEST(BackprojectDepthMap, AllInvalidGivesEmptyCloud) {
  DepthMap depth(4, 4);
  const auto cloud = backproject_depth_map(depth, small_camera(),
                                           RigidTransform::identity(), 1);
  EXPECT_TRUE(cloud.empty());
}

TEST(BackprojectDepthMap, ConstantDepthIdentityExtrinsics) {
  DepthMap depth(2, 2);
  for (auto& v : depth.values) v = 10.0f;
  const auto cloud = backproject_depth_map(depth, small_camera(),
                                           RigidTransform::identity(), 1);
  ASSERT_EQ(cloud.size(), 4u);
  for (const auto& p : cloud.points) EXPECT_DOUBLE_EQ(p.z(), 10.0);
}

TEST(BackprojectDepthMap, StrideSamplesEveryOtherPixel) {
  DepthMap depth(4, 4);
  for (auto& v : depth.values) v = 5.0f;
  const auto k = small_camera();
  const auto cloud =
      backproject_depth_map(depth, k, RigidTransform::identity(), 2);
  ASSERT_EQ(cloud.size(), 4u);
  // Row-major order over pixels (0,0), (0,2), (2,0), (2,2).
  const int expected[4][2] = {{0, 0}, {0, 2}, {2, 0}, {2, 2}};
  for (int i = 0; i < 4; ++i) {
    const Vec3 want = backproject_pixel(expected[i][1], expected[i][0], 5.0, k);
    EXPECT_LT((cloud.points[i] - want).norm(), 1e-12);
  }
}

// Depth rig: canonical camera at the sensor origin; sensor x equals camera z.
struct Rig {
  CameraIntrinsics k = small_camera();
  RigidTransform sensor_to_camera = canonical_sensor_to_camera();
  RigidTransform camera_to_sensor = invert(canonical_sensor_to_camera());
};

TEST(ExtractFrustum, AgreementCase) {
  Rig rig;
  DepthMap depth(rig.k.width, rig.k.height);
  for (auto& v : depth.values) v = 100.0f;
  const auto det = detection(ObjectClass::person, 100.0, Box2D{20, 15, 40, 35});
  for (double w : {0.0, 0.3, 1.0}) {
    FusionConfig cfg;
    cfg.centroid_weight = w;
    const auto f =
        extract_frustum(det, depth, rig.k, rig.camera_to_sensor, cfg);
    EXPECT_NEAR(f.fused_distance, 100.0, 1e-9);
    EXPECT_NEAR(f.centroid_distance, 100.0, 1e-9);
  }
}

TEST(ExtractFrustum, WeightedSumArithmetic) {
  // fused = 0.5 * 120 + 0.5 * 100 = 110
  Rig rig;
  DepthMap depth(rig.k.width, rig.k.height);
  for (auto& v : depth.values) v = 120.0f;
  const auto det = detection(ObjectClass::person, 100.0, Box2D{20, 15, 40, 35});
  FusionConfig cfg;
  cfg.centroid_weight = 0.5;
  const auto f = extract_frustum(det, depth, rig.k, rig.camera_to_sensor, cfg);
  EXPECT_NEAR(f.centroid_distance, 120.0, 1e-9);
  EXPECT_NEAR(f.fused_distance, 110.0, 1e-9);
}

TEST(ExtractFrustum, PureCentroidAtWOne) {
  Rig rig;
  DepthMap depth(rig.k.width, rig.k.height);
  for (auto& v : depth.values) v = 73.0f;
  const auto det = detection(ObjectClass::person, 10.0, Box2D{20, 15, 40, 35});
  FusionConfig cfg;
  cfg.centroid_weight = 1.0;
  const auto f = extract_frustum(det, depth, rig.k, rig.camera_to_sensor, cfg);
  EXPECT_NEAR(f.fused_distance, f.centroid_distance, 1e-12);
  EXPECT_NEAR(f.fused_distance, 73.0, 1e-9);
}

TEST(ExtractFrustum, EmptyBoxRejected) {
  Rig rig;
  DepthMap depth(rig.k.width, rig.k.height);  // all invalid
  const auto det = detection(ObjectClass::person, 50.0, Box2D{20, 15, 40, 35});
  EXPECT_THROW(extract_frustum(det, depth, rig.k, rig.camera_to_sensor),
               ValidationError);
}

TEST(ExtractFrustum, TrimmingRemovesBleedThrough) {
  Rig rig;
  DepthMap depth(rig.k.width, rig.k.height);
  // Box rows 15..35, cols 20..40: mostly 50 m, two background pixels at 200.
  for (int r = 15; r <= 35; ++r)
    for (int c = 20; c <= 40; ++c) depth.at(r, c) = 50.0f;
  depth.at(15, 20) = 200.0f;
  depth.at(16, 20) = 200.0f;
  const auto det = detection(ObjectClass::person, 50.0, Box2D{20, 15, 40, 35});
  FusionConfig cfg;
  cfg.centroid_statistic = CentroidStatistic::mean;
  cfg.trim_fraction = 0.01;
  const auto trimmed =
      extract_frustum(det, depth, rig.k, rig.camera_to_sensor, cfg);
  cfg.trim_fraction = 0.0;
  const auto raw = extract_frustum(det, depth, rig.k, rig.camera_to_sensor, cfg);
  EXPECT_GT(raw.centroid_distance, 50.0 + 0.1);
  EXPECT_NEAR(trimmed.centroid_distance, 50.0, 1e-6);
  EXPECT_EQ(raw.points.size(), trimmed.points.size() + 2 * 4);
}

TEST(ExtractFrustum, FusedMonotoneInCentroidWeight) {
  Rig rig;
  DepthMap depth(rig.k.width, rig.k.height);
  for (auto& v : depth.values) v = 120.0f;
  const auto det = detection(ObjectClass::person, 100.0, Box2D{20, 15, 40, 35});
  double last = -1.0;
  for (double w = 0.0; w <= 1.0; w += 0.1) {
    FusionConfig cfg;
    cfg.centroid_weight = w;
    const auto f = extract_frustum(det, depth, rig.k, rig.camera_to_sensor, cfg);
    EXPECT_GE(f.fused_distance, last);  // centroid >= detection distance
    last = f.fused_distance;
  }
}

TEST(SyntheticFrustum, PointOnCenterRayAtDetectorDistance) {
  Rig rig;
  const auto det = detection(ObjectClass::signal_pole, 150.0,
                             Box2D{40, 10, 50, 20});
  const auto f = synthetic_frustum(det, rig.k, rig.camera_to_sensor);
  ASSERT_EQ(f.points.size(), 1u);
  EXPECT_TRUE(f.synthetic);
  EXPECT_NEAR(f.points.points[0].x(), 150.0, 1e-9);
  EXPECT_NEAR(f.fused_distance, 150.0, 1e-9);
  // The point projects back to the box center.
  const auto px =
      project_point(rig.sensor_to_camera.apply(f.points.points[0]), rig.k);
  EXPECT_NEAR(px.u, 45.0, 1e-9);
  EXPECT_NEAR(px.v, 15.0, 1e-9);
}

TEST(Routing, ThresholdRules) {
  FusionConfig cfg;
  Frustum f;
  f.detection.class_id = ObjectClass::person;

  f.fused_distance = 110.0;
  EXPECT_EQ(route(f, cfg).route, Route::long_range);
  f.fused_distance = 100.0;
  EXPECT_EQ(route(f, cfg).route, Route::short_range);  // tie stays short
  f.fused_distance = 50.0;
  EXPECT_EQ(route(f, cfg).route, Route::short_range);

  f.detection.class_id = ObjectClass::other;
  EXPECT_THROW(route(f, cfg), ValidationError);
}

TEST(Routing, MonotoneInThreshold) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    Frustum f;
    f.detection.class_id = ObjectClass::road_vehicle;
    f.fused_distance = rng.uniform(0, 250);
    FusionConfig lo, hi;
    lo.route_thresholds_m[ObjectClass::road_vehicle] = rng.uniform(10, 200);
    hi.route_thresholds_m[ObjectClass::road_vehicle] =
        lo.route_thresholds_m[ObjectClass::road_vehicle] + rng.uniform(0, 50);
    const bool long_lo = route(f, lo).route == Route::long_range;
    const bool long_hi = route(f, hi).route == Route::long_range;
    // Raising the threshold can only demote long -> short.
    EXPECT_TRUE(long_lo || !long_hi);
  }
}

TEST(FrustumFrameTransform, ZeroAzimuthKeepsPoints) {
  Frustum f;
  f.azimuth = 0.0;
  f.points.points = {Vec3(5, 1, 2)};
  const auto out = to_frustum_frame(f);
  EXPECT_EQ(out.frame_tag, Frustum::FrameTag::frustum);
  EXPECT_LT((out.points.points[0] - Vec3(5, 1, 2)).norm(), 1e-15);
}

TEST(FrustumFrameTransform, CentroidMapsToForwardAxis) {
  Frustum f;
  f.azimuth = M_PI / 4;
  f.points.points = {Vec3(10, 10, 0)};
  const auto out = to_frustum_frame(f);
  EXPECT_NEAR(out.points.points[0].x(), 14.142135, 1e-5);
  EXPECT_NEAR(out.points.points[0].y(), 0.0, 1e-9);
}

TEST(FrustumFrameTransform, RigidAndInvertible) {
  Rng rng(7);
  Frustum f;
  f.azimuth = rng.uniform(-M_PI, M_PI);
  for (int i = 0; i < 30; ++i) {
    f.points.points.emplace_back(rng.uniform(10, 200), rng.uniform(-50, 50),
                                 rng.uniform(-3, 5));
  }
  const auto out = to_frustum_frame(f);
  for (std::size_t i = 0; i < f.points.size(); ++i) {
    for (std::size_t j = i + 1; j < f.points.size(); ++j) {
      const double before = (f.points.points[i] - f.points.points[j]).norm();
      const double after = (out.points.points[i] - out.points.points[j]).norm();
      ASSERT_NEAR(before, after, 1e-9);
    }
  }
  const auto back = to_sensor_frame(out);
  for (std::size_t i = 0; i < f.points.size(); ++i) {
    ASSERT_LT((back.points.points[i] - f.points.points[i]).norm(), 1e-9);
  }
  EXPECT_THROW(to_frustum_frame(out), ValidationError);
  EXPECT_THROW(to_sensor_frame(back), ValidationError);
}

TEST(RasterizeBev, DefaultWindowIs192Square) {
  Frustum f;
  f.frame_tag = Frustum::FrameTag::frustum;
  f.fused_distance = 150.0;
  f.detection.class_id = ObjectClass::catenary_pole;
  const auto grid = rasterize_bev(f);
  EXPECT_EQ(grid.cells_x, 192);
  EXPECT_EQ(grid.cells_y, 192);
  EXPECT_DOUBLE_EQ(grid.x_min, 126.0);
  EXPECT_DOUBLE_EQ(grid.x_max, 174.0);
}

TEST(RasterizeBev, SinglePointLandsInCenterCell) {
  Frustum f;
  f.frame_tag = Frustum::FrameTag::frustum;
  f.fused_distance = 150.0;
  f.detection.class_id = ObjectClass::person;
  f.points.points = {Vec3(150.0, 0.0, 1.7)};
  const auto grid = rasterize_bev(f);
  EXPECT_FLOAT_EQ(grid.density[grid.index(96, 96)], 1.0f);
  EXPECT_FLOAT_EQ(grid.occupancy[grid.index(96, 96)], 1.0f);
  EXPECT_FLOAT_EQ(grid.max_height[grid.index(96, 96)], 1.7f);
  EXPECT_EQ(grid.dropped_points, 0u);
  EXPECT_DOUBLE_EQ(grid.class_prior[0], 1.0);  // person slot
  EXPECT_DOUBLE_EQ(grid.class_prior[1], 0.0);
}

TEST(RasterizeBev, ConservesPoints) {
  Rng rng(11);
  Frustum f;
  f.frame_tag = Frustum::FrameTag::frustum;
  f.fused_distance = 120.0;
  f.detection.class_id = ObjectClass::road_vehicle;
  for (int i = 0; i < 500; ++i) {
    f.points.points.emplace_back(rng.uniform(80, 160), rng.uniform(-40, 40),
                                 rng.uniform(-2, 4));
  }
  const auto grid = rasterize_bev(f);
  EXPECT_EQ(static_cast<std::size_t>(grid.density_sum()) + grid.dropped_points,
            f.points.size());
  for (std::size_t i = 0; i < grid.density.size(); ++i) {
    EXPECT_EQ(grid.occupancy[i] > 0.0f, grid.density[i] > 0.0f);
  }
}

TEST(RasterizeBev, MaxEdgeBelongsToLastCell) {
  Frustum f;
  f.frame_tag = Frustum::FrameTag::frustum;
  f.fused_distance = 24.0;  // window [0, 48]
  f.detection.class_id = ObjectClass::person;
  f.points.points = {Vec3(48.0, 24.0, 0.5)};
  const auto grid = rasterize_bev(f);
  EXPECT_EQ(grid.dropped_points, 0u);
  EXPECT_FLOAT_EQ(grid.density[grid.index(191, 191)], 1.0f);
}

TEST(RasterizeBev, RequiresFrustumFrame) {
  Frustum f;
  f.fused_distance = 100.0;
  f.detection.class_id = ObjectClass::person;
  EXPECT_THROW(rasterize_bev(f), ValidationError);
}

TEST(DistanceNormalization, PaperRange) {
  EXPECT_DOUBLE_EQ(normalize_distance(125.0), 0.5);
  EXPECT_DOUBLE_EQ(normalize_distance(0.0), 0.0);
  EXPECT_DOUBLE_EQ(normalize_distance(250.0), 1.0);
  EXPECT_THROW(normalize_distance(-1.0), ValidationError);
  EXPECT_THROW(normalize_distance(250.01), ValidationError);
  EXPECT_THROW(denormalize_distance(1.01), ValidationError);
  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    const double d = rng.uniform(0, 250);
    EXPECT_NEAR(denormalize_distance(normalize_distance(d)), d, 1e-12);
  }
}

TEST(Huber, BranchesAndSymmetry) {
  EXPECT_DOUBLE_EQ(huber(0.5, 1.0), 0.125);
  EXPECT_DOUBLE_EQ(huber(2.0, 1.0), 1.5);
  EXPECT_THROW(huber(1.0, 0.0), ValidationError);
  Rng rng(17);
  for (int i = 0; i < 100; ++i) {
    const double r = rng.uniform(-10, 10);
    const double d = rng.uniform(0.1, 5);
    EXPECT_DOUBLE_EQ(huber(r, d), huber(-r, d));
  }
}

TEST(ExtractFrustum, CentroidMatchesObjectCenterWithinQuantization) {
  // A thin plate (depth extent below the quantization step) rendered into a
  // quantized depth map: the frustum centroid's sensor-frame x must land on
  // the object center within one quantization step.
  Rig rig;
  const double center_x = 50.0;
  const double thickness = 0.004;
  const double scale = 1.0 / 256.0;  // PNG16 quantization step
  DepthMap depth(rig.k.width, rig.k.height);
  const float face = static_cast<float>(
      std::round((center_x - thickness / 2) / scale) * scale);
  for (int r = 10; r <= 38; ++r) {
    for (int c = 12; c <= 52; ++c) depth.at(r, c) = face;
  }
  Detection25D det;
  det.box2d = Box2D{12, 10, 52, 38};
  det.class_id = ObjectClass::person;
  det.confidence = 1.0;
  det.distance_m = center_x;
  const auto f = extract_frustum(det, depth, rig.k, rig.camera_to_sensor);
  EXPECT_NEAR(f.centroid_distance, center_x, scale);
  EXPECT_NEAR(f.fused_distance, center_x, scale);
}

TEST(DetectionsJsonl, RoundTripAndValidation) {
  namespace fs = std::filesystem;
  const auto path = fs::temp_directory_path() / "mff_detections_test.jsonl";
  std::map<std::string, std::vector<Detection25D>> dets;
  dets["f0"].push_back(detection(ObjectClass::person, 42.5, Box2D{1, 2, 3, 4}));
  dets["f0"].push_back(
      detection(ObjectClass::signal_pole, 180.0, Box2D{5, 6, 9, 10}, 0.4));
  dets["f1"].push_back(
      detection(ObjectClass::road_vehicle, 30.0, Box2D{0, 0, 10, 10}));
  write_detections_jsonl(path, dets);
  const auto back = read_detections_jsonl(path);
  ASSERT_EQ(back.size(), 2u);
  ASSERT_EQ(back.at("f0").size(), 2u);
  EXPECT_EQ(back.at("f0")[1].class_id, ObjectClass::signal_pole);
  EXPECT_DOUBLE_EQ(back.at("f0")[0].distance_m, 42.5);

  std::ofstream bad(path);
  bad << R"({"frame_id": "x", "class": "person", "x1": 0, "y1": 0, "x2": 5, "y2": 5, "confidence": 0.5, "distance_m": 400})"
      << "\n";
  bad.close();
  try {
    read_detections_jsonl(path);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
  fs::remove(path);
}

}  // namespace
}  // namespace mff
