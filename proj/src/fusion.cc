#include "panoptrack/fusion.h"

#include <algorithm>
#include <numeric>
#include <string>

#include "panoptrack/error.h"

namespace panoptrack {

std::vector<DetectionRecord> lift_frame(const FrameBundle& bundle) {
  std::vector<DetectionRecord> out;
  for (const auto& [camera_id, dets] : bundle.detections) {
    if (dets.empty()) continue;
    auto pose = bundle.poses.find(camera_id);
    if (pose == bundle.poses.end()) {
      throw InputError("missing pose for camera " + std::to_string(camera_id) +
                       " at frame " + std::to_string(bundle.frame));
    }
    for (const auto& det : dets) {
      DetectionRecord lifted = det;
      lifted.box = transform_box(det.box, pose->second);
      out.push_back(std::move(lifted));
    }
  }
  return out;
}

std::vector<size_t> nms_3d_indices(const std::vector<DetectionRecord>& detections,
                                   const NmsOptions& options) {
  if (!(options.iou_threshold >= 0.0 && options.iou_threshold <= 1.0)) {
    throw ArgumentError("nms iou_threshold must lie in [0, 1], got " +
                        std::to_string(options.iou_threshold));
  }
  std::vector<size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    const auto& da = detections[a];
    const auto& db = detections[b];
    if (da.confidence != db.confidence) return da.confidence > db.confidence;
    return da.camera_id < db.camera_id;
  });

  std::vector<bool> removed(detections.size(), false);
  std::vector<size_t> keep;
  for (size_t i = 0; i < order.size(); ++i) {
    const size_t top = order[i];
    if (removed[top]) continue;
    keep.push_back(top);
    for (size_t j = i + 1; j < order.size(); ++j) {
      const size_t other = order[j];
      if (removed[other]) continue;
      if (options.category_aware &&
          detections[other].category != detections[top].category) {
        continue;
      }
      if (iou_3d(detections[top].box, detections[other].box) >=
          options.iou_threshold) {
        removed[other] = true;
      }
    }
  }
  return keep;
}

std::vector<DetectionRecord> nms_3d(const std::vector<DetectionRecord>& detections,
                                    const NmsOptions& options) {
  std::vector<DetectionRecord> out;
  for (size_t idx : nms_3d_indices(detections, options)) {
    out.push_back(detections[idx]);
  }
  return out;
}

}  // namespace panoptrack
