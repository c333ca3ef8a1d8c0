#include <sstream>

#include <gtest/gtest.h>

#include "panoptrack/config.h"
#include "panoptrack/error.h"
#include "panoptrack/io.h"
#include "panoptrack/sim.h"

namespace panoptrack {
namespace {

TEST(Toml, SubsetToJson) {
  const std::string json = toml_to_json(R"(
# comment
title = "x # not a comment"
[a]
n = 3
f = -1.5e2
b = true
arr = [1, 2, 3]
nested = [[1, 2], [3, 4]]
inl = { k = "v", m = 2 }
a.b.c = 1

[[items]]
id = 1
[[items]]
id = 2
)");
  EXPECT_EQ(json,
            R"({"title":"x # not a comment","a":{"n":3,"f":-150.0,"b":true,"arr":[1,2,3],)"
            R"("nested":[[1,2],[3,4]],"inl":{"k":"v","m":2},"a":{"b":{"c":1}}},)"
            R"("items":[{"id":1},{"id":2}]})");
}

TEST(Toml, SyntaxErrorCarriesLine) {
  try {
    toml_to_json("a = 1\nb = \n");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_EQ(e.line(), 2);
  }
  EXPECT_THROW(toml_to_json("a = 1\na = 2\n"), InputError);
  EXPECT_THROW(toml_to_json("[t\n"), InputError);
}

TEST(RunConfig, ReadsAllTables) {
  const RunConfig c = parse_run_config(R"(
[tracker]
pipeline = "track-merge"
motion_model = "kf3d"
match_threshold = 0.4
max_inactive_frames = 5
[affinity]
w_deep = 0.3
r = 8.0
clamp_cos = true
[nms]
iou_threshold = 0.2
[kf]
q_box = 0.02
[motion]
hidden = 64
weights = "w.bin"
[train]
window = 20
batch_size = 16
seed = 9
[metrics]
matcher = "iou3d:0.3"
n_points = 11
[io]
detections = "d.jsonl"
)");
  EXPECT_EQ(c.tracker.pipeline, Pipeline::kTrackThenMerge);
  EXPECT_EQ(c.tracker.motion_model, MotionModel::kKf3d);
  EXPECT_EQ(c.tracker.match_threshold, 0.4);
  EXPECT_EQ(c.tracker.max_inactive_frames, 5);
  EXPECT_EQ(c.tracker.affinity.w_deep, 0.3);
  EXPECT_TRUE(c.tracker.affinity.clamp_cos);
  EXPECT_EQ(c.tracker.nms.iou_threshold, 0.2);
  EXPECT_EQ(c.tracker.kf.q_box, 0.02);
  EXPECT_EQ(c.hidden, 64);
  EXPECT_EQ(c.weights_path, "w.bin");
  EXPECT_EQ(c.train.window, 20);
  EXPECT_EQ(c.train.batch_size, 16);
  EXPECT_EQ(c.train.seed, 9u);
  EXPECT_EQ(c.eval.matcher.kind, Matcher::Kind::kIou3d);
  EXPECT_EQ(c.eval.n_points, 11);
  EXPECT_EQ(c.detections_path, "d.jsonl");
}

TEST(RunConfig, Defaults) {
  const RunConfig c = parse_run_config("");
  EXPECT_EQ(c.train.window, 10);
  EXPECT_EQ(c.train.batch_size, 128);
  EXPECT_EQ(c.train.epochs, 100);
  EXPECT_EQ(c.train.w_linear, 0.001);
  EXPECT_EQ(c.tracker.affinity.r, 10.0);
  EXPECT_EQ(c.hidden, 128);
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_run_config("[tracker]\nmatch_treshold = 0.5\n"), InputError);
  EXPECT_THROW(parse_run_config("[bogus]\nx = 1\n"), InputError);
  EXPECT_THROW(parse_run_config("[tracker]\nmatch_threshold = 1.5\n"), InputError);
  EXPECT_THROW(parse_run_config("[tracker]\nmatch_threshold = \"high\"\n"), InputError);
  EXPECT_THROW(parse_run_config("[train]\nwindow = 2\n"), InputError);
  EXPECT_THROW(parse_run_config("[tracker]\npipeline = \"sideways\"\n"), InputError);
}

TEST(Scenario, ParsesObjectsAndRig) {
  const ScenarioSpec s = parse_scenario(R"(
name = "two"
frames = 12
frame_rate = 4.0
seed = 3
[ego]
vx = 1.0
[noise]
sigma0 = 0.1
dropout = 0.1
[[objects]]
x = 10.0
y = 2.0
speed = 1.5
hidden = [[3, 5]]
[[objects]]
path = "waypoints"
category = "pedestrian"
waypoints = [[0, 5.0, 5.0, 0.0], [11, 5.0, -5.0, 0.0]]
)");
  EXPECT_EQ(s.name, "two");
  EXPECT_EQ(s.frames, 12);
  EXPECT_EQ(s.noise.dropout, 0.1);
  ASSERT_EQ(s.objects.size(), 2u);
  EXPECT_EQ(s.objects[0].id, 0);
  EXPECT_EQ(s.objects[1].id, 1);
  EXPECT_EQ(s.objects[0].hidden.at(0), std::make_pair(int64_t(3), int64_t(5)));
  EXPECT_EQ(s.objects[1].path.kind, PathSpec::Kind::kWaypoints);
  EXPECT_EQ(s.objects[1].path.waypoints.size(), 2u);

  const RigSpec rig = parse_rig("[[cameras]]\nyaw = 0.0\nhalf_fov = 0.8\n[[cameras]]\nyaw = 3.14\n");
  ASSERT_EQ(rig.cameras.size(), 2u);
  EXPECT_EQ(rig.cameras[0].half_fov, 0.8);
  EXPECT_THROW(parse_rig("[[cameras]]\nhalf_fov = 4.0\n"), InputError);
  EXPECT_THROW(parse_scenario("[[objects]]\npath = \"spiral\"\n"), InputError);
}

FrameBundle sample_bundle() {
  FrameBundle f;
  f.frame = 4;
  f.poses[0] = RigidTransform::from_yaw(0.1, {1, 2, 3});
  f.poses[2] = RigidTransform(Eigen::Quaterniond(0.9, 0.1, -0.2, 0.3), {0.1, 0.2, 0.3});
  DetectionRecord d;
  d.box = Box3D(1.0 / 3.0, -2.5e-7, 0.1, 3.0, 4.5, 1.9, 1.6);
  d.confidence = 0.123456789012345678;
  d.camera_id = 2;
  d.frame = 4;
  d.category = "pedestrian";
  d.embedding = Embedding::Constant(4, 0.5);
  d.box2d = Box2D{1, 2, 30.5, 40.25};
  f.detections[2].push_back(d);
  DetectionRecord e;
  e.box = Box3D(5, 6, 7, -1, 2, 2, 2);
  e.frame = 4;
  f.detections[0].push_back(e);
  return f;
}

TEST(Jsonl, DetectionAndPoseRoundTripIsExact) {
  const FrameBundle f = sample_bundle();
  std::ostringstream d, p;
  write_detections({f}, d);
  write_poses({f}, p);
  std::istringstream din(d.str()), pin(p.str());
  const auto frames = assemble_frames(read_detections(din), read_poses(pin));
  ASSERT_EQ(frames.size(), 1u);
  const auto& g = frames[0];
  EXPECT_EQ(g.frame, 4);
  const auto& a = f.detections.at(2)[0];
  const auto& b = g.detections.at(2)[0];
  EXPECT_EQ(a.box, b.box);
  EXPECT_EQ(a.confidence, b.confidence);
  EXPECT_EQ(a.category, b.category);
  EXPECT_EQ(*a.embedding, *b.embedding);
  EXPECT_EQ(*a.box2d, *b.box2d);
  EXPECT_FALSE(g.detections.at(0)[0].embedding.has_value());
  EXPECT_TRUE(g.poses.at(2).rotation().isApprox(f.poses.at(2).rotation(), 1e-15));
  // Writing again gives the same bytes.
  std::ostringstream d2;
  write_detections(frames, d2);
  EXPECT_EQ(d.str(), d2.str());
}

TEST(Jsonl, ResultAndGroundTruthRoundTrip) {
  TrackingResult r;
  r.frames[0] = {{3, Box3D(0.1, 0.2, 0.3, 0.4, 1, 2, 3), 0.75, "car"}};
  r.frames[1] = {};
  std::ostringstream os;
  write_result(r, os);
  std::istringstream in(os.str());
  const TrackingResult back = read_result(in);
  EXPECT_EQ(back.frames.at(0)[0].box, r.frames.at(0)[0].box);
  EXPECT_EQ(back.frames.at(0)[0].track_id, 3);

  GroundTruth gt;
  gt.frames[2] = {{9, Box3D(1, 2, 3, 0, 4, 2, 1), "truck"}};
  std::ostringstream gs;
  write_ground_truth(gt, gs);
  std::istringstream gin(gs.str());
  EXPECT_EQ(read_ground_truth(gin).frames.at(2)[0].object_id, 9);
}

TEST(Jsonl, MalformedLineNamesLine) {
  std::istringstream in(
      "{\"frame\":0,\"camera_id\":0,\"category\":\"car\",\"box\":[0,0,0,0,1,1,1],\"score\":0.9}\n"
      "\n"
      "{\"frame\":1,\"camera_id\":0,\"box\":[0,0,0\n");
  try {
    read_detections(in);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  std::istringstream bad_box("{\"frame\":0,\"camera_id\":0,\"category\":\"car\",\"box\":[0,0],\"score\":1}\n");
  EXPECT_THROW(read_detections(bad_box), InputError);
}

TEST(Jsonl, MissingPoseIsInputError) {
  DetectionRecord d;
  d.camera_id = 5;
  EXPECT_THROW(assemble_frames({d}, {}), InputError);
}

TEST(Report, CurvesHeaderAndJson) {
  GroundTruth gt;
  TrackingResult r;
  for (int f = 0; f < 3; ++f) {
    gt.frames[f] = {{1, Box3D(f, 0, 0, 0, 4, 2, 1.5), "car"}};
    r.frames[f] = {{0, Box3D(f, 0, 0, 0, 4, 2, 1.5), 0.9, "car"}};
  }
  const MetricReport m = evaluate(r, gt);
  const std::string csv = curves_csv(m);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "category,target_recall,reachable,threshold,recall,mota_r,motp_r,tp,fp,fn,ids");
  const std::string json = report_json(m);
  EXPECT_NE(json.find("\"amota\": 1.0"), std::string::npos);
  EXPECT_NE(report_table(m).find("car"), std::string::npos);
}

}  // namespace
}  // namespace panoptrack
