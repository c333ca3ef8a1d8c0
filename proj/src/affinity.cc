#include "panoptrack/affinity.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "panoptrack/error.h"

namespace panoptrack {

namespace {

void check_scale(double r) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw ArgumentError("affinity scale r must be positive, got " + std::to_string(r));
  }
}

}  // namespace

Eigen::MatrixXd appearance_affinity(const std::vector<Embedding>& track_embeddings,
                                    const std::vector<Embedding>& det_embeddings) {
  const Eigen::Index n_tracks = static_cast<Eigen::Index>(track_embeddings.size());
  const Eigen::Index n_dets = static_cast<Eigen::Index>(det_embeddings.size());
  Eigen::MatrixXd scores(n_tracks, n_dets);
  for (Eigen::Index i = 0; i < n_tracks; ++i) {
    for (Eigen::Index j = 0; j < n_dets; ++j) {
      scores(i, j) = track_embeddings[i].dot(det_embeddings[j]);
    }
  }
  if (n_tracks == 0 || n_dets == 0) return scores;

  // Softmax over detections (per row) and over tracks (per column), each
  // shifted by its own max.
  Eigen::MatrixXd over_dets(n_tracks, n_dets);
  for (Eigen::Index i = 0; i < n_tracks; ++i) {
    const double m = scores.row(i).maxCoeff();
    const Eigen::RowVectorXd e = (scores.row(i).array() - m).exp().matrix();
    over_dets.row(i) = e / e.sum();
  }
  Eigen::MatrixXd over_tracks(n_tracks, n_dets);
  for (Eigen::Index j = 0; j < n_dets; ++j) {
    const double m = scores.col(j).maxCoeff();
    const Eigen::VectorXd e = (scores.col(j).array() - m).exp().matrix();
    over_tracks.col(j) = e / e.sum();
  }
  return 0.5 * (over_dets + over_tracks);
}

Eigen::MatrixXd location_affinity(const std::vector<Box3D>& predicted_boxes,
                                  const std::vector<Box3D>& det_boxes, double r) {
  check_scale(r);
  Eigen::MatrixXd out(predicted_boxes.size(), det_boxes.size());
  for (size_t i = 0; i < predicted_boxes.size(); ++i) {
    for (size_t j = 0; j < det_boxes.size(); ++j) {
      const double l1 = predicted_boxes[i].minus(det_boxes[j]).cwiseAbs().sum();
      out(i, j) = std::exp(-l1 / r);
    }
  }
  return out;
}

Eigen::MatrixXd motion_affinity(const std::vector<Eigen::Vector3d>& track_prev_centers,
                                const std::vector<Eigen::Vector3d>& track_pred_centers,
                                const std::vector<Eigen::Vector3d>& det_centers,
                                double r, bool clamp_cos) {
  check_scale(r);
  if (track_prev_centers.size() != track_pred_centers.size()) {
    throw ArgumentError("motion_affinity: previous and predicted center counts differ");
  }
  Eigen::MatrixXd out(track_prev_centers.size(), det_centers.size());
  for (size_t i = 0; i < track_prev_centers.size(); ++i) {
    const Eigen::Vector3d v_track = track_pred_centers[i] - track_prev_centers[i];
    for (size_t j = 0; j < det_centers.size(); ++j) {
      const Eigen::Vector3d v_det = det_centers[j] - track_prev_centers[i];
      const double norms = v_track.norm() * v_det.norm();
      double w_cos = norms > 0.0 ? v_track.dot(v_det) / norms : 0.0;
      if (clamp_cos) w_cos = std::clamp(w_cos, 0.0, 1.0);
      const double a_centroid =
          std::exp(-(track_pred_centers[i] - det_centers[j]).norm() / r);
      const double a_pseudo = std::exp(-(v_track - v_det).norm() / r);
      out(i, j) = w_cos * a_centroid + (1.0 - w_cos) * a_pseudo;
    }
  }
  return out;
}

AffinityMatrix combined_affinity(const std::vector<TrackCue>& tracks,
                                 const std::vector<DetectionRecord>& detections,
                                 const AffinityConfig& config) {
  if (!(config.w_deep >= 0.0 && config.w_deep <= 1.0)) {
    throw ArgumentError("w_deep must lie in [0, 1]");
  }
  AffinityMatrix result;
  for (const auto& t : tracks) result.track_ids.push_back(t.id);

  std::vector<Box3D> predicted;
  std::vector<Eigen::Vector3d> prev_centers, pred_centers, det_centers;
  std::vector<Box3D> det_boxes;
  for (const auto& t : tracks) {
    predicted.push_back(t.predicted);
    prev_centers.push_back(t.prev_center);
    pred_centers.push_back(t.predicted.center());
  }
  for (const auto& d : detections) {
    det_boxes.push_back(d.box);
    det_centers.push_back(d.box.center());
  }

  const Eigen::MatrixXd loc = location_affinity(predicted, det_boxes, config.r);
  const Eigen::MatrixXd motion =
      motion_affinity(prev_centers, pred_centers, det_centers, config.r, config.clamp_cos);

  bool have_embeddings = true;
  for (const auto& t : tracks) have_embeddings &= t.embedding.has_value();
  for (const auto& d : detections) have_embeddings &= d.embedding.has_value();

  Eigen::MatrixXd values = motion.cwiseProduct(loc);
  if (have_embeddings && config.w_deep > 0.0) {
    std::vector<Embedding> te, de;
    for (const auto& t : tracks) te.push_back(*t.embedding);
    for (const auto& d : detections) de.push_back(*d.embedding);
    values = config.w_deep * appearance_affinity(te, de) + (1.0 - config.w_deep) * values;
  }

  for (size_t i = 0; i < tracks.size(); ++i) {
    for (size_t j = 0; j < detections.size(); ++j) {
      if (tracks[i].category != detections[j].category) values(i, j) = kNoMatch;
    }
  }
  result.values = std::move(values);
  return result;
}

}  // namespace panoptrack
