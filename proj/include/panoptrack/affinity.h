#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "panoptrack/fusion.h"
#include "panoptrack/geom.h"

namespace panoptrack {

struct AffinityConfig {
  double w_deep = 0.5;
  // Distance scale of the exponential location and motion terms.
  double r = 10.0;
  // Clamp the motion cosine weight to [0, 1] instead of using it raw.
  bool clamp_cos = false;
};

// Marks track/detection pairs that may never be matched.
inline constexpr double kNoMatch = -std::numeric_limits<double>::infinity();

// Rows follow `track_ids`, columns index the detection list it was built from.
struct AffinityMatrix {
  Eigen::MatrixXd values;
  std::vector<int64_t> track_ids;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

// Bi-directional softmax of embedding dot products, averaged.
Eigen::MatrixXd appearance_affinity(const std::vector<Embedding>& track_embeddings,
                                    const std::vector<Embedding>& det_embeddings);

// exp(-|b_track - b_det|_1 / r) over the 7 box parameters, yaw wrapped.
Eigen::MatrixXd location_affinity(const std::vector<Box3D>& predicted_boxes,
                                  const std::vector<Box3D>& det_boxes, double r);

// Mix of centroid distance and pseudo-motion agreement weighted by the cosine
// between predicted and pseudo motion. A zero-length motion vector gives a
// zero cosine weight.
Eigen::MatrixXd motion_affinity(const std::vector<Eigen::Vector3d>& track_prev_centers,
                                const std::vector<Eigen::Vector3d>& track_pred_centers,
                                const std::vector<Eigen::Vector3d>& det_centers,
                                double r, bool clamp_cos = false);

// What the affinity needs to know about a live track.
struct TrackCue {
  int64_t id = 0;
  std::string category;
  std::optional<Embedding> embedding;
  Eigen::Vector3d prev_center = Eigen::Vector3d::Zero();
  Box3D predicted;
};

// w_deep * A_deep + (1 - w_deep) * A_motion .* A_loc. Pairs with different
// categories get kNoMatch. If any track or detection lacks an embedding the
// appearance term is dropped for the whole matrix (w_deep treated as 0).
AffinityMatrix combined_affinity(const std::vector<TrackCue>& tracks,
                                 const std::vector<DetectionRecord>& detections,
                                 const AffinityConfig& config);

}  // namespace panoptrack
