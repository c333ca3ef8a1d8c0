#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "panoptrack/affinity.h"
#include "panoptrack/fusion.h"
#include "panoptrack/motion.h"
#include "panoptrack/result.h"

namespace panoptrack {

enum class TrackStatus { kActive, kInactive, kDead };
enum class Pipeline { kSingleCamera, kTrackThenMerge, kMergeThenTrack };
enum class MotionModel { kNone, kKf3d, kLstm };

const char* to_string(Pipeline p);
const char* to_string(MotionModel m);
// Accepts both the long names (merge_then_track) and the CLI names (merge-track).
Pipeline parse_pipeline(const std::string& s);
MotionModel parse_motion_model(const std::string& s);

struct TrackerConfig {
  double match_threshold = 0.5;
  double start_score = 0.8;
  double continue_score = 0.5;
  int max_inactive_frames = 10;
  int backdrop_frames = 1;
  double embed_momentum = 0.8;
  double dup_iou2d_new = 0.7;
  double dup_iou2d_backdrop = 0.3;
  // Duplicate test used when 2D boxes are unavailable.
  double dup_iou3d = 0.1;
  Pipeline pipeline = Pipeline::kMergeThenTrack;
  MotionModel motion_model = MotionModel::kNone;

  AffinityConfig affinity;
  NmsOptions nms;
  KfParams kf;
  std::shared_ptr<const LstmWeights> lstm_weights;

  // Throws ArgumentError on out-of-range values or missing LSTM weights.
  void validate() const;
};

struct TrackSnapshot {
  int64_t frame = 0;
  std::optional<Embedding> embedding;
  Box3D box;
  double confidence = 0.0;
};

struct Track {
  int64_t id = 0;
  std::string category;
  std::vector<TrackSnapshot> history;
  TrackStatus status = TrackStatus::kActive;
  int frames_since_update = 0;

  // Current refined (or propagated, while inactive) state.
  Box3D box;
  std::optional<Embedding> embedding;
  double confidence = 0.0;
  std::variant<std::monostate, KfState, LstmState> motion;

  int camera_id = 0;
  std::optional<Box2D> box2d;
};

// Result of greedy matching. Pairs are (track id, detection column).
struct Assignment {
  std::vector<std::pair<int64_t, size_t>> matches;
  std::vector<int64_t> unmatched_tracks;
  std::vector<size_t> unmatched_detections;
};

// Repeatedly commits the largest remaining entry while it is >= threshold.
// Ties go to the lower track id, then the lower detection index.
Assignment greedy_assign(const AffinityMatrix& affinity, double threshold);

// One online tracker: association, lifecycle, motion, duplicate removal.
class Tracker {
 public:
  explicit Tracker(TrackerConfig config);

  // Detections must be in world frame and carry `frame`. Returns the active
  // tracks after the step, sorted by id.
  std::vector<TrackedObject> step(int64_t frame, const std::vector<DetectionRecord>& detections);

  // Live (active or inactive) tracks, sorted by id.
  const std::vector<Track>& tracks() const { return tracks_; }
  const TrackerConfig& config() const { return config_; }
  int64_t next_id() const { return next_id_; }

 private:
  struct Prediction {
    Box3D prev_box;
    Box3D predicted;
    Velocity7 predicted_velocity = Velocity7::Zero();
    std::variant<std::monostate, KfState, LstmState> motion;
  };
  struct Backdrop {
    int64_t frame;
    DetectionRecord detection;
  };

  Prediction predict(const Track& track) const;
  void refine(Track& track, const Prediction& pred, const DetectionRecord& det) const;
  Track spawn(int64_t frame, const DetectionRecord& det);
  bool duplicates(const DetectionRecord& det, const Box3D& box,
                  const std::optional<Box2D>& box2d, int camera_id,
                  const std::string& category, double iou2d_threshold) const;

  TrackerConfig config_;
  std::vector<Track> tracks_;
  std::vector<Backdrop> backdrops_;
  int64_t next_id_ = 0;
  std::optional<int64_t> last_frame_;
};

// Runs one of the three pipelines over a frame sequence (ascending frames).
TrackingResult run_pipeline(const std::vector<FrameBundle>& frames, const TrackerConfig& config);

}  // namespace panoptrack
