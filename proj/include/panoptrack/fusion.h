#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "panoptrack/geom.h"

namespace panoptrack {

inline constexpr int kEmbeddingDim = 256;
using Embedding = Eigen::VectorXd;

// One detection, in camera or world frame depending on the pipeline stage.
struct DetectionRecord {
  Box3D box;
  double confidence = 1.0;
  std::optional<Embedding> embedding;  // unit norm when present
  int camera_id = 0;
  int64_t frame = 0;
  std::string category = "car";
  // Image-space box, only available for externally produced detections.
  std::optional<Box2D> box2d;
};

// Everything observed at one time index: per-camera detections in camera
// frame plus the camera-to-world pose of every camera.
struct FrameBundle {
  int64_t frame = 0;
  std::map<int, std::vector<DetectionRecord>> detections;
  std::map<int, RigidTransform> poses;
};

// Moves all detections of a bundle into the world frame. Output order is
// ascending camera id, then input order. Throws InputError when a camera
// with detections has no pose.
std::vector<DetectionRecord> lift_frame(const FrameBundle& bundle);

struct NmsOptions {
  double iou_threshold = 0.1;
  bool category_aware = true;
};

// Greedy 3D NMS. Candidates are ranked by confidence (descending), then lower
// camera id, then input position. Output is in that rank order.
std::vector<DetectionRecord> nms_3d(const std::vector<DetectionRecord>& detections,
                                    const NmsOptions& options = {});

// Indices (into `detections`) kept by nms_3d, in rank order.
std::vector<size_t> nms_3d_indices(const std::vector<DetectionRecord>& detections,
                                   const NmsOptions& options = {});

}  // namespace panoptrack
