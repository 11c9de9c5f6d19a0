#include "mff/heads.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "mff/adapter_io.hpp"
#include "mff/rng.hpp"

namespace mff {
namespace {

namespace fs = std::filesystem;

Frustum frustum_frame_fixture(ObjectClass cls, double fused,
                              std::vector<Vec3> points, double azimuth = 0.0,
                              double confidence = 0.8) {
  Frustum f;
  f.detection.class_id = cls;
  f.detection.confidence = confidence;
  f.detection.box2d = Box2D{0, 0, 10, 10};
  f.detection.distance_m = std::min(fused, 250.0);
  f.fused_distance = fused;
  f.centroid_distance = fused;
  f.azimuth = azimuth;
  f.points.points = std::move(points);
  f.frame_tag = Frustum::FrameTag::frustum;
  f.frame_id = "frame0";
  f.detection_index = 0;
  return f;
}

TEST(BaselineHead, SingletonFrustumReturnsThePoint) {
  const Vec3 p(42.0, -1.25, 2.5);
  auto f = frustum_frame_fixture(ObjectClass::person, p.x(), {p});
  const auto pred = baseline_head(f, fallback_priors(), Route::short_range);
  EXPECT_LT((pred.box3d.center - p).norm(), 1e-12);
  EXPECT_DOUBLE_EQ(pred.box3d.yaw, 0.0);
  EXPECT_DOUBLE_EQ(pred.score, 0.8);
}

TEST(BaselineHead, PriorDimsPassThrough) {
  ClassPriorTable priors = fallback_priors();
  priors.entries[ObjectClass::person] = {0.6, 0.6, 1.8, 0.0, false};
  auto f = frustum_frame_fixture(ObjectClass::person, 50.0, {Vec3(50, 0, 0)});
  const auto pred = baseline_head(f, priors, Route::short_range);
  EXPECT_DOUBLE_EQ(pred.box3d.length, 0.6);
  EXPECT_DOUBLE_EQ(pred.box3d.width, 0.6);
  EXPECT_DOUBLE_EQ(pred.box3d.height, 1.8);
}

TEST(BaselineHead, SyntheticFrustumScoreIsPenalized) {
  auto f = frustum_frame_fixture(ObjectClass::person, 150.0, {Vec3(150, 0, 0)});
  f.synthetic = true;
  const auto pred = baseline_head(f, fallback_priors(), Route::long_range);
  EXPECT_DOUBLE_EQ(pred.score, 0.8 * 0.1);
  EXPECT_EQ(pred.route, Route::long_range);
}

TEST(BaselineHead, MedianCentersInFrustumFrame) {
  // Lateral/vertical medians come from the cloud, forward from the fusion.
  auto f = frustum_frame_fixture(
      ObjectClass::road_vehicle, 100.0,
      {Vec3(99, -1, 0), Vec3(100, 0, 1), Vec3(101, 2, 5)});
  const auto pred = baseline_head(f, fallback_priors(), Route::short_range);
  EXPECT_DOUBLE_EQ(pred.box3d.center.x(), 100.0);
  EXPECT_DOUBLE_EQ(pred.box3d.center.y(), 0.0);
  EXPECT_DOUBLE_EQ(pred.box3d.center.z(), 1.0);
}

TEST(BaselineHead, EquivariantUnderSceneRotation) {
  // Rotating the scene rotates the cloud, shifts the azimuth, and moves the
  // fused center as a point: its range R = fused / cos(az) is invariant, so
  // the rotated frustum carries fused' = R * cos(az + phi).
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const double az = rng.uniform(-0.6, 0.6);
    const double phi = rng.uniform(-0.6, 0.6);

    Frustum sensor_frustum;
    sensor_frustum.detection.class_id = ObjectClass::catenary_pole;
    sensor_frustum.detection.confidence = 0.9;
    sensor_frustum.detection.box2d = Box2D{0, 0, 10, 10};
    sensor_frustum.detection.distance_m = 120.0;
    sensor_frustum.fused_distance = 120.0;
    sensor_frustum.azimuth = az;
    for (int i = 0; i < 15; ++i) {
      sensor_frustum.points.points.emplace_back(
          120 + rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-3, 3));
    }

    Frustum rotated = sensor_frustum;
    const auto rot = RigidTransform::from_yaw(phi);
    rotated.points = transform_points(rot, sensor_frustum.points);
    rotated.azimuth = az + phi;
    rotated.fused_distance =
        sensor_frustum.fused_distance / std::cos(az) * std::cos(az + phi);

    const auto pred_base = baseline_head(to_frustum_frame(sensor_frustum),
                                         fallback_priors(), Route::long_range);
    const auto pred_rot = baseline_head(to_frustum_frame(rotated),
                                        fallback_priors(), Route::long_range);
    EXPECT_LT(
        (pred_rot.box3d.center - rot.apply(pred_base.box3d.center)).norm(),
        1e-9);
    EXPECT_NEAR(pred_rot.box3d.yaw,
                normalize_angle(pred_base.box3d.yaw + phi), 1e-9);
  }
}

TEST(BaselineHead, RejectsBadInputs) {
  auto sensor = frustum_frame_fixture(ObjectClass::person, 10, {Vec3(10, 0, 0)});
  sensor.frame_tag = Frustum::FrameTag::sensor;
  EXPECT_THROW(baseline_head(sensor, fallback_priors(), Route::short_range),
               ValidationError);
  auto empty = frustum_frame_fixture(ObjectClass::person, 10, {});
  EXPECT_THROW(baseline_head(empty, fallback_priors(), Route::short_range),
               ValidationError);
  auto other = frustum_frame_fixture(ObjectClass::other, 10, {Vec3(10, 0, 0)});
  EXPECT_THROW(baseline_head(other, fallback_priors(), Route::short_range),
               ValidationError);
}

HeadPrediction pred(const std::string& frame, int ref, double score, double cx,
                    double cy, ObjectClass cls = ObjectClass::person) {
  HeadPrediction p;
  p.box3d = Box3D{Vec3(cx, cy, 0), 2.0, 2.0, 2.0, 0.0, cls};
  p.score = score;
  p.route = Route::short_range;
  p.frame_id = frame;
  p.frustum_ref = ref;
  return p;
}

TEST(MergeAndNms, DisjointBoxesAllKept) {
  const auto out = merge_and_nms({pred("f", 0, 0.9, 0, 0)},
                                 {pred("f", 1, 0.8, 10, 0)}, 0.25);
  EXPECT_EQ(out.size(), 2u);
}

TEST(MergeAndNms, DuplicateKeepsHigherScore) {
  const auto out = merge_and_nms({pred("f", 0, 0.9, 0, 0)},
                                 {pred("f", 1, 0.8, 0, 0)}, 0.25);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0].score, 0.9);
  EXPECT_EQ(out[0].frustum_ref, 0);
}

TEST(MergeAndNms, GreedyChainKeepsEnds) {
  // A overlaps B, B overlaps C, A disjoint from C.
  const auto a = pred("f", 0, 0.9, 0.0, 0.0);
  const auto b = pred("f", 1, 0.8, 1.0, 0.0);
  const auto c = pred("f", 2, 0.7, 2.0, 0.0);
  ASSERT_GT(iou_bev(a.box3d, b.box3d), 0.25);
  ASSERT_GT(iou_bev(b.box3d, c.box3d), 0.25);
  ASSERT_DOUBLE_EQ(iou_bev(a.box3d, c.box3d), 0.0);
  const auto out = merge_and_nms({a, b, c}, {}, 0.25);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].frustum_ref, 0);
  EXPECT_EQ(out[1].frustum_ref, 2);
}

TEST(MergeAndNms, OrderIndependentAndRefsResolve) {
  Rng rng(7);
  std::vector<HeadPrediction> shorts, longs;
  for (int i = 0; i < 20; ++i) {
    auto p = pred("f" + std::to_string(i % 3), i, rng.uniform(0.1, 1.0),
                  rng.uniform(-10, 10), rng.uniform(-10, 10));
    (i % 2 == 0 ? shorts : longs).push_back(p);
  }
  const auto out_a = merge_and_nms(shorts, longs, 0.25);
  const auto out_b = merge_and_nms(longs, shorts, 0.25);
  ASSERT_EQ(out_a.size(), out_b.size());
  for (std::size_t i = 0; i < out_a.size(); ++i) {
    EXPECT_EQ(prediction_to_jsonl(out_a[i]), prediction_to_jsonl(out_b[i]));
  }
  for (const auto& p : out_a) {
    EXPECT_GE(p.frustum_ref, 0);
    EXPECT_LT(p.frustum_ref, 20);
  }
}

TEST(MergeAndNms, DifferentClassesNeverSuppress) {
  const auto a = pred("f", 0, 0.9, 0, 0, ObjectClass::person);
  const auto b = pred("f", 1, 0.8, 0, 0, ObjectClass::road_vehicle);
  EXPECT_EQ(merge_and_nms({a}, {b}, 0.25).size(), 2u);
}

class AdapterIO : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mff_adapter_" + std::string(::testing::UnitTest::GetInstance()
                                             ->current_test_info()
                                             ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST_F(AdapterIO, PredictionsRoundTrip) {
  Rng rng(11);
  std::vector<HeadPrediction> preds;
  for (int i = 0; i < 10; ++i) {
    HeadPrediction p;
    p.box3d = Box3D{Vec3(rng.uniform(-100, 100), rng.uniform(-50, 50),
                         rng.uniform(-3, 3)),
                    rng.uniform(0.2, 6), rng.uniform(0.2, 6),
                    rng.uniform(0.2, 6), rng.uniform(-M_PI, M_PI),
                    kEvalClasses[i % kNumEvalClasses]};
    p.score = rng.uniform(0, 1);
    p.route = i % 2 == 0 ? Route::short_range : Route::long_range;
    p.frame_id = "frame" + std::to_string(i % 2);
    p.frustum_ref = i;
    preds.push_back(p);
  }
  const auto path = dir_ / "preds.jsonl";
  write_predictions_jsonl(path, preds);
  const auto back = read_adapter_predictions(path);
  ASSERT_EQ(back.size(), preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    EXPECT_LT((back[i].box3d.center - preds[i].box3d.center).norm(), 1e-9);
    EXPECT_NEAR(back[i].box3d.yaw, preds[i].box3d.yaw, 1e-9);
    EXPECT_NEAR(back[i].box3d.length, preds[i].box3d.length, 1e-9);
    EXPECT_NEAR(back[i].score, preds[i].score, 1e-9);
    EXPECT_EQ(back[i].route, preds[i].route);
    EXPECT_EQ(back[i].frame_id, preds[i].frame_id);
    EXPECT_EQ(back[i].frustum_ref, preds[i].frustum_ref);
  }
}

TEST_F(AdapterIO, NegativeHeightNamesLineAndField) {
  const auto path = dir_ / "bad.jsonl";
  std::ofstream out(path);
  out << prediction_to_jsonl(pred("f", 0, 0.5, 0, 0)) << "\n";
  out << R"({"frame_id": "f", "class": "person", "score": 0.5, "cx": 0, "cy": 0, "cz": 0, "l": 1, "w": 1, "h": -2, "yaw": 0, "frame": "sensor", "route": "short", "frustum_ref": 1})"
      << "\n";
  out.close();
  try {
    read_adapter_predictions(path);
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("line 2"), std::string::npos);
    EXPECT_NE(what.find("'h'"), std::string::npos);
  }
}

TEST_F(AdapterIO, FrustumFrameRecordsTransformOnRead) {
  // Bundle one frustum with a known azimuth, then hand the adapter a
  // frustum-frame box and check the sensor-frame result.
  const double az = 0.7;
  Frustum f;
  f.frame_id = "f0";
  f.detection_index = 3;
  f.detection.class_id = ObjectClass::person;
  f.detection.box2d = Box2D{0, 0, 4, 4};
  f.detection.confidence = 1.0;
  f.detection.distance_m = 100.0;
  f.azimuth = az;
  f.fused_distance = 100.0;
  f.centroid_distance = 100.0;
  f.points.points = {Vec3(100, 0, 0)};
  f.frame_tag = Frustum::FrameTag::frustum;
  write_frustum_bundle(dir_ / "bundle", {f}, {Route::long_range});

  const auto index = read_frustum_index(dir_ / "bundle" / "index.jsonl");
  ASSERT_EQ(index.size(), 1u);
  ASSERT_NE(index.find("f0", 3), nullptr);
  EXPECT_DOUBLE_EQ(index.find("f0", 3)->azimuth, az);

  const auto path = dir_ / "frustum_preds.jsonl";
  std::ofstream out(path);
  out << R"({"frame_id": "f0", "class": "person", "score": 0.9, "cx": 100, "cy": 0, "cz": 1, "l": 0.6, "w": 0.6, "h": 1.8, "yaw": 0.1, "frame": "frustum", "route": "long", "frustum_ref": 3})"
      << "\n";
  out.close();
  const auto preds = read_adapter_predictions(path, &index);
  ASSERT_EQ(preds.size(), 1u);
  const Vec3 expected = RigidTransform::from_yaw(az).apply(Vec3(100, 0, 1));
  EXPECT_LT((preds[0].box3d.center - expected).norm(), 1e-9);
  EXPECT_NEAR(preds[0].box3d.yaw, 0.1 + az, 1e-12);

  // Without the index the same record is rejected.
  EXPECT_THROW(read_adapter_predictions(path), FormatError);
}

TEST_F(AdapterIO, BundlePointsRoundTrip) {
  Frustum f;
  f.frame_id = "scene_a";
  f.detection_index = 0;
  f.detection.class_id = ObjectClass::signal_pole;
  f.detection.box2d = Box2D{0, 0, 4, 4};
  f.detection.confidence = 0.7;
  f.detection.distance_m = 140.0;
  f.azimuth = -0.2;
  f.fused_distance = 141.5;
  f.centroid_distance = 143.0;
  f.points.points = {Vec3(141, 0.5, -1), Vec3(142, -0.5, 2)};
  f.frame_tag = Frustum::FrameTag::frustum;
  write_frustum_bundle(dir_ / "bundle", {f}, {Route::long_range});
  const auto index = read_frustum_index(dir_ / "bundle" / "index.jsonl");
  const auto* entry = index.find("scene_a", 0);
  ASSERT_NE(entry, nullptr);
  EXPECT_EQ(entry->route, Route::long_range);
  EXPECT_DOUBLE_EQ(entry->fused_distance, 141.5);
  const auto cloud = read_point_cloud(dir_ / "bundle" / entry->points_file);
  ASSERT_EQ(cloud.size(), 2u);
  EXPECT_NEAR(cloud.points[1].z(), 2.0, 1e-6);
}

}  // namespace
}  // namespace mff
