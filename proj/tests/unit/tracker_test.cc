#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.h"
#include "panoptrack/error.h"
#include "panoptrack/tracker.h"

namespace panoptrack {
namespace {

DetectionRecord det(int64_t frame, double x, double y, double conf,
                    std::optional<Embedding> e = std::nullopt, int cam = 0) {
  DetectionRecord d;
  d.box = Box3D(x, y, 0, 0, 4, 1.8, 1.5);
  d.confidence = conf;
  d.embedding = std::move(e);
  d.frame = frame;
  d.camera_id = cam;
  return d;
}

Embedding axis(int i) {
  Embedding e = Embedding::Zero(2);
  e[i] = 1.0;
  return e;
}

TEST(GreedyAssign, EmptyMatrix) {
  AffinityMatrix a;
  const auto out = greedy_assign(a, 0.5);
  EXPECT_TRUE(out.matches.empty());
  EXPECT_TRUE(out.unmatched_tracks.empty());
  EXPECT_TRUE(out.unmatched_detections.empty());
}

TEST(GreedyAssign, BelowThreshold) {
  AffinityMatrix a;
  a.values = Eigen::MatrixXd::Constant(1, 1, 0.4);
  a.track_ids = {0};
  const auto out = greedy_assign(a, 0.5);
  EXPECT_TRUE(out.matches.empty());
  EXPECT_EQ(out.unmatched_tracks, std::vector<int64_t>{0});
  EXPECT_EQ(out.unmatched_detections, std::vector<size_t>{0});
}

TEST(GreedyAssign, HandTrace) {
  AffinityMatrix a;
  a.values.resize(2, 2);
  a.values << 0.9, 0.8, 0.85, 0.2;
  a.track_ids = {0, 1};
  const auto out = greedy_assign(a, 0.5);
  EXPECT_EQ(out.matches, (std::vector<std::pair<int64_t, size_t>>{{0, 0}}));
  EXPECT_EQ(out.unmatched_tracks, std::vector<int64_t>{1});
  EXPECT_EQ(out.unmatched_detections, std::vector<size_t>{1});
}

TEST(GreedyAssign, MatchesBruteForce) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 500; ++i) {
    const auto a = oracle::random_affinity(rng, 6);
    ASSERT_TRUE(oracle::same(greedy_assign(a, 0.5), oracle::greedy(a, 0.5))) << "instance " << i;
  }
}

TEST(Tracker, NewTrackFromConfidentDetection) {
  Tracker t({});
  const auto out = t.step(0, {det(0, 3, 4, 0.9)});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].track_id, 0);
  EXPECT_EQ(out[0].box, Box3D(3, 4, 0, 0, 4, 1.8, 1.5));
  EXPECT_EQ(out[0].confidence, 0.9);
}

TEST(Tracker, LowConfidenceDoesNotStartTrack) {
  Tracker t({});
  EXPECT_TRUE(t.step(0, {det(0, 3, 4, 0.7)}).empty());
  EXPECT_EQ(t.next_id(), 0);
}

TEST(Tracker, InactiveThenDead) {
  TrackerConfig cfg;
  cfg.max_inactive_frames = 10;
  Tracker t(cfg);
  t.step(0, {det(0, 0, 0, 0.9)});
  for (int f = 1; f <= 10; ++f) {
    EXPECT_TRUE(t.step(f, {}).empty());
    ASSERT_EQ(t.tracks().size(), 1u);
    EXPECT_EQ(t.tracks()[0].status, TrackStatus::kInactive);
  }
  EXPECT_TRUE(t.step(11, {}).empty());
  EXPECT_TRUE(t.tracks().empty());
}

TEST(Tracker, InactiveTrackIsRecovered) {
  Tracker t({});
  t.step(0, {det(0, 0, 0, 0.9)});
  t.step(1, {});
  const auto out = t.step(2, {det(2, 0.3, 0, 0.6)});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].track_id, 0);
}

TEST(Tracker, RejectsNonIncreasingFrames) {
  Tracker t({});
  t.step(3, {});
  EXPECT_THROW(t.step(3, {}), InputError);
  EXPECT_THROW(t.step(4, {det(5, 0, 0, 0.9)}), InputError);
}

TEST(Tracker, DuplicateOfActiveTrackIsSuppressed) {
  Tracker t({});
  t.step(0, {det(0, 0, 0, 0.9, axis(0))});
  // The second detection overlaps the matched track and must not spawn.
  const auto out = t.step(1, {det(1, 0, 0, 0.95, axis(0)), det(1, 0.2, 0, 0.9, axis(1))});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(t.next_id(), 1);
}

// Two objects pass each other with 2 m lateral separation. Motion none, so
// outputs are the matched detection boxes; the hand-computed affinities are
// checked in CrossingAffinityHandValues.
TEST(Tracker, GoldenCrossingTrace) {
  Tracker t({});
  struct Row {
    int64_t id;
    double x, y, conf;
  };
  const std::vector<std::vector<DetectionRecord>> input{
      {det(0, 0, 0, 0.9, axis(0)), det(0, 6, 2, 0.85, axis(1))},
      {det(1, 4, 2, 0.85, axis(1)), det(1, 2, 0, 0.9, axis(0))},
      {det(2, 2, 2, 0.85, axis(1)), det(2, 4, 0, 0.9, axis(0))},
  };
  const std::vector<std::vector<Row>> expected{
      {{0, 0, 0, 0.9}, {1, 6, 2, 0.85}},
      {{0, 2, 0, 0.9}, {1, 4, 2, 0.85}},
      {{0, 4, 0, 0.9}, {1, 2, 2, 0.85}},
  };
  for (int64_t f = 0; f < 3; ++f) {
    const auto out = t.step(f, input[size_t(f)]);
    ASSERT_EQ(out.size(), expected[size_t(f)].size()) << "frame " << f;
    for (size_t i = 0; i < out.size(); ++i) {
      const Row& r = expected[size_t(f)][i];
      EXPECT_EQ(out[i].track_id, r.id) << "frame " << f;
      EXPECT_EQ(out[i].box, Box3D(r.x, r.y, 0, 0, 4, 1.8, 1.5)) << "frame " << f;
      EXPECT_EQ(out[i].confidence, r.conf);
      EXPECT_EQ(out[i].category, "car");
    }
  }
  EXPECT_EQ(t.next_id(), 2);
}

TEST(Tracker, CrossingAffinityHandValues) {
  // Frame 2 of the golden trace: tracks at (2,0) and (4,2), stationary
  // prediction; detections at (4,0) and (2,2).
  auto cue = [](int64_t id, double x, double y, int e) {
    TrackCue c;
    c.id = id;
    c.category = "car";
    c.embedding = axis(e);
    c.predicted = Box3D(x, y, 0, 0, 4, 1.8, 1.5);
    c.prev_center = c.predicted.center();
    return c;
  };
  const auto a = combined_affinity({cue(0, 2, 0, 0), cue(1, 4, 2, 1)},
                                   {det(2, 4, 0, 0.9, axis(0)), det(2, 2, 2, 0.85, axis(1))}, {});
  const double e = std::exp(1.0);
  const double same = 0.5 * e / (e + 1) + 0.5 * std::exp(-0.4);
  const double cross = 0.5 / (e + 1) + 0.5 * std::exp(-0.4);
  EXPECT_NEAR(a.values(0, 0), same, 1e-12);
  EXPECT_NEAR(a.values(1, 1), same, 1e-12);
  EXPECT_NEAR(a.values(0, 1), cross, 1e-12);
  EXPECT_NEAR(a.values(1, 0), cross, 1e-12);
  EXPECT_NEAR(same, 0.70069, 1e-5);
  EXPECT_NEAR(cross, 0.46963, 1e-5);
}

std::vector<FrameBundle> one_camera_frames() {
  std::vector<FrameBundle> frames;
  for (int64_t f = 0; f < 6; ++f) {
    FrameBundle b;
    b.frame = f;
    b.poses[0] = RigidTransform::from_yaw(0.3, {1, 2, 0});
    b.detections[0] = {det(f, 10 + f, 0, 0.9), det(f, 20 - f, 5, 0.85)};
    frames.push_back(b);
  }
  return frames;
}

TEST(RunPipeline, SingleCameraDegeneracy) {
  const auto frames = one_camera_frames();
  TrackerConfig cfg;
  cfg.pipeline = Pipeline::kSingleCamera;
  const auto single = run_pipeline(frames, cfg);
  cfg.pipeline = Pipeline::kMergeThenTrack;
  const auto merged = run_pipeline(frames, cfg);
  ASSERT_EQ(single.frames.size(), merged.frames.size());
  for (const auto& [f, objs] : single.frames) {
    const auto& other = merged.frames.at(f);
    ASSERT_EQ(objs.size(), other.size());
    for (size_t i = 0; i < objs.size(); ++i) {
      EXPECT_EQ(objs[i].track_id, other[i].track_id);
      EXPECT_EQ(objs[i].box, other[i].box);
    }
  }
}

TEST(RunPipeline, KalmanKeepsIdentities) {
  TrackerConfig cfg;
  cfg.motion_model = MotionModel::kKf3d;
  const auto r = run_pipeline(one_camera_frames(), cfg);
  for (const auto& [f, objs] : r.frames) {
    ASSERT_EQ(objs.size(), 2u);
    EXPECT_EQ(objs[0].track_id, 0);
    EXPECT_EQ(objs[1].track_id, 1);
  }
}

TEST(RunPipeline, RejectsUnorderedFrames) {
  auto frames = one_camera_frames();
  std::swap(frames[1], frames[2]);
  EXPECT_THROW(run_pipeline(frames, {}), InputError);
}

TEST(TrackerConfig, ValidatesRanges) {
  TrackerConfig cfg;
  cfg.match_threshold = 1.5;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg = {};
  cfg.motion_model = MotionModel::kLstm;
  EXPECT_THROW(cfg.validate(), ArgumentError);
}

TEST(PipelineNames, ParseBothSpellings) {
  EXPECT_EQ(parse_pipeline("merge-track"), Pipeline::kMergeThenTrack);
  EXPECT_EQ(parse_pipeline("track_then_merge"), Pipeline::kTrackThenMerge);
  EXPECT_EQ(parse_motion_model("kf3d"), MotionModel::kKf3d);
  EXPECT_THROW(parse_pipeline("bogus"), ArgumentError);
}

}  // namespace
}  // namespace panoptrack
