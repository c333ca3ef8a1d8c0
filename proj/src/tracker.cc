#include "panoptrack/tracker.h"

#include <algorithm>
#include <numeric>
#include <set>
#include <string>
#include <tuple>

#include "panoptrack/error.h"

namespace panoptrack {

const char* to_string(Pipeline p) {
  switch (p) {
    case Pipeline::kSingleCamera: return "single_camera";
    case Pipeline::kTrackThenMerge: return "track_then_merge";
    case Pipeline::kMergeThenTrack: return "merge_then_track";
  }
  return "?";
}

const char* to_string(MotionModel m) {
  switch (m) {
    case MotionModel::kNone: return "none";
    case MotionModel::kKf3d: return "kf3d";
    case MotionModel::kLstm: return "lstm";
  }
  return "?";
}

Pipeline parse_pipeline(const std::string& s) {
  if (s == "single" || s == "single_camera") return Pipeline::kSingleCamera;
  if (s == "track-merge" || s == "track_then_merge") return Pipeline::kTrackThenMerge;
  if (s == "merge-track" || s == "merge_then_track") return Pipeline::kMergeThenTrack;
  throw ArgumentError("unknown pipeline '" + s + "'");
}

MotionModel parse_motion_model(const std::string& s) {
  if (s == "none") return MotionModel::kNone;
  if (s == "kf3d") return MotionModel::kKf3d;
  if (s == "lstm") return MotionModel::kLstm;
  throw ArgumentError("unknown motion model '" + s + "'");
}

void TrackerConfig::validate() const {
  auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw ArgumentError(std::string(name) + " must lie in [0, 1], got " + std::to_string(v));
    }
  };
  unit(match_threshold, "match_threshold");
  unit(start_score, "start_score");
  unit(continue_score, "continue_score");
  unit(embed_momentum, "embed_momentum");
  unit(dup_iou2d_new, "dup_iou2d_new");
  unit(dup_iou2d_backdrop, "dup_iou2d_backdrop");
  unit(dup_iou3d, "dup_iou3d");
  unit(affinity.w_deep, "w_deep");
  unit(nms.iou_threshold, "nms iou_threshold");
  if (max_inactive_frames < 1) throw ArgumentError("max_inactive_frames must be >= 1");
  if (backdrop_frames < 0) throw ArgumentError("backdrop_frames must be >= 0");
  if (!(affinity.r > 0.0)) throw ArgumentError("affinity r must be positive");
  if (motion_model == MotionModel::kLstm && !lstm_weights) {
    throw ArgumentError("motion model lstm requires weights");
  }
}

Assignment greedy_assign(const AffinityMatrix& affinity, double threshold) {
  const auto& a = affinity.values;
  struct Entry {
    double value;
    int64_t track_id;
    Eigen::Index row;
    Eigen::Index col;
  };
  std::vector<Entry> entries;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) >= threshold) entries.push_back({a(i, j), affinity.track_ids[i], i, j});
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
    if (x.value != y.value) return x.value > y.value;
    if (x.track_id != y.track_id) return x.track_id < y.track_id;
    return x.col < y.col;
  });

  std::vector<bool> row_used(a.rows(), false), col_used(a.cols(), false);
  Assignment out;
  for (const auto& e : entries) {
    if (row_used[e.row] || col_used[e.col]) continue;
    row_used[e.row] = true;
    col_used[e.col] = true;
    out.matches.emplace_back(e.track_id, static_cast<size_t>(e.col));
  }
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (!row_used[i]) out.unmatched_tracks.push_back(affinity.track_ids[i]);
  }
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    if (!col_used[j]) out.unmatched_detections.push_back(static_cast<size_t>(j));
  }
  return out;
}

Tracker::Tracker(TrackerConfig config) : config_(std::move(config)) { config_.validate(); }

Tracker::Prediction Tracker::predict(const Track& track) const {
  Prediction p;
  p.prev_box = track.box;
  switch (config_.motion_model) {
    case MotionModel::kNone:
      p.predicted = track.box;
      break;
    case MotionModel::kKf3d: {
      KfState next = kf_predict(std::get<KfState>(track.motion), config_.kf);
      p.predicted = next.box();
      p.predicted_velocity = p.predicted.minus(track.box);
      p.motion = std::move(next);
      break;
    }
    case MotionModel::kLstm: {
      LstmStep step = lstm_predict(std::get<LstmState>(track.motion), *config_.lstm_weights);
      p.predicted_velocity = step.velocity;
      p.predicted = track.box.plus(step.velocity);
      p.motion = std::move(step.state);
      break;
    }
  }
  return p;
}

void Tracker::refine(Track& track, const Prediction& pred, const DetectionRecord& det) const {
  switch (config_.motion_model) {
    case MotionModel::kNone:
      track.box = det.box;
      break;
    case MotionModel::kKf3d: {
      KfState next = kf_update(std::get<KfState>(pred.motion), det.box, det.confidence, config_.kf);
      track.box = next.box();
      track.motion = std::move(next);
      break;
    }
    case MotionModel::kLstm: {
      const Velocity7 observed = det.box.minus(pred.prev_box);
      LstmStep step = lstm_update(std::get<LstmState>(pred.motion), pred.predicted_velocity,
                                  observed, det.confidence, *config_.lstm_weights);
      track.box = pred.prev_box.plus(step.velocity);
      track.motion = std::move(step.state);
      break;
    }
  }
}

Track Tracker::spawn(int64_t frame, const DetectionRecord& det) {
  Track t;
  t.id = next_id_++;
  t.category = det.category;
  t.status = TrackStatus::kActive;
  t.frames_since_update = 0;
  t.box = det.box;
  t.embedding = det.embedding;
  t.confidence = det.confidence;
  t.camera_id = det.camera_id;
  t.box2d = det.box2d;
  switch (config_.motion_model) {
    case MotionModel::kNone: break;
    case MotionModel::kKf3d: t.motion = KfState::from_box(det.box, config_.kf); break;
    case MotionModel::kLstm: t.motion = LstmState::initial(config_.lstm_weights->hidden); break;
  }
  t.history.push_back({frame, t.embedding, t.box, t.confidence});
  return t;
}

bool Tracker::duplicates(const DetectionRecord& det, const Box3D& box,
                         const std::optional<Box2D>& box2d, int camera_id,
                         const std::string& category, double iou2d_threshold) const {
  if (det.box2d && box2d && det.camera_id == camera_id) {
    return iou_2d(*det.box2d, *box2d) >= iou2d_threshold;
  }
  return det.category == category && iou_3d(det.box, box) >= config_.dup_iou3d;
}

std::vector<TrackedObject> Tracker::step(int64_t frame,
                                         const std::vector<DetectionRecord>& detections) {
  if (last_frame_ && frame <= *last_frame_) {
    throw InputError("tracker frames must be strictly increasing: got " + std::to_string(frame) +
                     " after " + std::to_string(*last_frame_));
  }
  for (const auto& d : detections) {
    if (d.frame != frame) {
      throw InputError("detection for frame " + std::to_string(d.frame) +
                       " passed to tracker step at frame " + std::to_string(frame));
    }
  }
  last_frame_ = frame;

  // Canonical order: confidence descending, camera ascending, input order.
  std::vector<DetectionRecord> dets = detections;
  std::stable_sort(dets.begin(), dets.end(), [](const auto& a, const auto& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.camera_id < b.camera_id;
  });

  // (1) motion prediction for every live track.
  std::vector<Prediction> preds;
  preds.reserve(tracks_.size());
  for (const auto& t : tracks_) preds.push_back(predict(t));

  // (2) affinity against detections that may continue a track.
  std::vector<size_t> candidates;
  for (size_t j = 0; j < dets.size(); ++j) {
    if (dets[j].confidence >= config_.continue_score) candidates.push_back(j);
  }
  std::vector<TrackCue> cues;
  for (size_t i = 0; i < tracks_.size(); ++i) {
    cues.push_back({tracks_[i].id, tracks_[i].category, tracks_[i].embedding,
                    preds[i].prev_box.center(), preds[i].predicted});
  }
  std::vector<DetectionRecord> candidate_dets;
  for (size_t j : candidates) candidate_dets.push_back(dets[j]);
  const AffinityMatrix affinity = combined_affinity(cues, candidate_dets, config_.affinity);

  // (3) greedy assignment.
  const Assignment assignment = greedy_assign(affinity, config_.match_threshold);

  std::vector<int> match_of_track(tracks_.size(), -1);
  std::vector<bool> det_used(dets.size(), false);
  for (const auto& [track_id, col] : assignment.matches) {
    const auto it = std::lower_bound(tracks_.begin(), tracks_.end(), track_id,
                                     [](const Track& t, int64_t id) { return t.id < id; });
    const size_t row = static_cast<size_t>(it - tracks_.begin());
    match_of_track[row] = static_cast<int>(candidates[col]);
    det_used[candidates[col]] = true;
  }

  // (4) matched tracks and (5) unmatched tracks.
  const double m = config_.embed_momentum;
  for (size_t i = 0; i < tracks_.size(); ++i) {
    Track& t = tracks_[i];
    if (match_of_track[i] >= 0) {
      const DetectionRecord& det = dets[match_of_track[i]];
      refine(t, preds[i], det);
      if (det.embedding) {
        if (t.embedding) {
          Embedding f = m * *t.embedding + (1.0 - m) * *det.embedding;
          const double n = f.norm();
          t.embedding = n > 0.0 ? Embedding(f / n) : *det.embedding;
        } else {
          t.embedding = det.embedding;
        }
      }
      t.confidence = det.confidence;
      t.camera_id = det.camera_id;
      t.box2d = det.box2d;
      t.status = TrackStatus::kActive;
      t.frames_since_update = 0;
      t.history.push_back({frame, t.embedding, t.box, t.confidence});
    } else {
      t.box = preds[i].predicted;
      if (config_.motion_model == MotionModel::kKf3d) {
        t.motion = preds[i].motion;
      } else if (config_.motion_model == MotionModel::kLstm) {
        LstmState s = std::get<LstmState>(preds[i].motion);
        s.push_velocity(preds[i].predicted_velocity);
        t.motion = std::move(s);
      }
      t.frames_since_update += 1;
      t.status = t.frames_since_update > config_.max_inactive_frames ? TrackStatus::kDead
                                                                      : TrackStatus::kInactive;
    }
  }
  std::erase_if(tracks_, [](const Track& t) { return t.status == TrackStatus::kDead; });

  // (6) new tracks and backdrops from unmatched detections, highest confidence first.
  std::erase_if(backdrops_, [&](const Backdrop& b) {
    return b.frame <= frame - config_.backdrop_frames;
  });
  std::vector<Track> spawned;
  for (size_t j = 0; j < dets.size(); ++j) {
    if (det_used[j]) continue;
    const DetectionRecord& det = dets[j];
    bool keep = det.confidence >= config_.start_score;
    for (const auto& t : tracks_) {
      if (!keep) break;
      if (t.status == TrackStatus::kActive &&
          duplicates(det, t.box, t.box2d, t.camera_id, t.category, config_.dup_iou2d_new)) {
        keep = false;
      }
    }
    for (const auto& t : spawned) {
      if (!keep) break;
      if (duplicates(det, t.box, t.box2d, t.camera_id, t.category, config_.dup_iou2d_new)) {
        keep = false;
      }
    }
    for (const auto& b : backdrops_) {
      if (!keep) break;
      const auto& bd = b.detection;
      if (duplicates(det, bd.box, bd.box2d, bd.camera_id, bd.category,
                     config_.dup_iou2d_backdrop)) {
        keep = false;
      }
    }
    if (keep) {
      spawned.push_back(spawn(frame, det));
    } else if (config_.backdrop_frames > 0) {
      backdrops_.push_back({frame, det});
    }
  }
  for (auto& t : spawned) tracks_.push_back(std::move(t));
  // Ids are handed out in increasing order, so tracks_ stays sorted by id.

  // (7) emit active tracks.
  std::vector<TrackedObject> out;
  for (const auto& t : tracks_) {
    if (t.status == TrackStatus::kActive) {
      out.push_back({t.id, t.box, t.confidence, t.category});
    }
  }
  return out;
}

namespace {

std::vector<int> camera_ids(const std::vector<FrameBundle>& frames) {
  std::set<int> ids;
  for (const auto& f : frames) {
    for (const auto& [cam, dets] : f.detections) ids.insert(cam);
    for (const auto& [cam, pose] : f.poses) ids.insert(cam);
  }
  return {ids.begin(), ids.end()};
}

FrameBundle single_camera_view(const FrameBundle& f, int camera) {
  FrameBundle view;
  view.frame = f.frame;
  if (auto it = f.detections.find(camera); it != f.detections.end()) {
    view.detections.emplace(camera, it->second);
  }
  if (auto it = f.poses.find(camera); it != f.poses.end()) view.poses.emplace(camera, it->second);
  return view;
}

}  // namespace

TrackingResult run_pipeline(const std::vector<FrameBundle>& frames, const TrackerConfig& config) {
  config.validate();
  for (size_t i = 1; i < frames.size(); ++i) {
    if (frames[i].frame <= frames[i - 1].frame) {
      throw InputError("frames must be in strictly ascending order: frame " +
                       std::to_string(frames[i].frame) + " follows " +
                       std::to_string(frames[i - 1].frame));
    }
  }

  TrackingResult result;
  if (config.pipeline == Pipeline::kMergeThenTrack) {
    Tracker tracker(config);
    for (const auto& f : frames) {
      result.frames[f.frame] = tracker.step(f.frame, nms_3d(lift_frame(f), config.nms));
    }
    return result;
  }

  // Independent per-camera trackers; ids are interleaved as local * M + rank
  // so they stay unique and a single camera keeps its local ids.
  const std::vector<int> cams = camera_ids(frames);
  const int64_t m = static_cast<int64_t>(cams.size());
  std::vector<Tracker> trackers;
  for (size_t k = 0; k < cams.size(); ++k) trackers.emplace_back(config);

  for (const auto& f : frames) {
    std::vector<TrackedObject> objects;
    for (size_t k = 0; k < cams.size(); ++k) {
      for (auto t : trackers[k].step(f.frame, lift_frame(single_camera_view(f, cams[k])))) {
        t.track_id = t.track_id * m + static_cast<int64_t>(k);
        objects.push_back(std::move(t));
      }
    }
    if (config.pipeline == Pipeline::kSingleCamera) {
      result.frames[f.frame] = std::move(objects);
      continue;
    }
    // Merge per-camera outputs; the higher-confidence identity survives.
    std::vector<DetectionRecord> as_dets;
    for (size_t i = 0; i < objects.size(); ++i) {
      DetectionRecord d;
      d.box = objects[i].box;
      d.confidence = objects[i].confidence;
      d.camera_id = static_cast<int>(objects[i].track_id % m);
      d.frame = f.frame;
      d.category = objects[i].category;
      as_dets.push_back(std::move(d));
    }
    std::vector<TrackedObject> merged;
    for (size_t idx : nms_3d_indices(as_dets, config.nms)) merged.push_back(objects[idx]);
    result.frames[f.frame] = std::move(merged);
  }
  return result;
}

}  // namespace panoptrack
