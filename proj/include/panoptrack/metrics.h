#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "panoptrack/result.h"

namespace panoptrack {

// Gate used to pair predictions with ground truth.
struct Matcher {
  enum class Kind { kBevDistance, kIou3d };
  Kind kind = Kind::kBevDistance;
  // Max BEV distance (meters) or min 3D IoU.
  double threshold = 2.0;

  static Matcher bev(double max_distance) { return {Kind::kBevDistance, max_distance}; }
  static Matcher iou3d(double min_iou) { return {Kind::kIou3d, min_iou}; }
  // "bev:2.0", "iou3d:0.3"
  static Matcher parse(const std::string& spec);
  std::string to_string() const;
};

struct FrameMatch {
  std::vector<std::pair<size_t, size_t>> pairs;  // (prediction index, gt index)
  std::vector<size_t> false_positives;           // prediction indices
  std::vector<size_t> false_negatives;           // gt indices
};

// Greedy one-to-one matching by best score under the gate, same category
// only. Ties prefer pairs that continue `previous` (gt id -> track id), then
// lower gt index, then lower prediction index.
FrameMatch match_frame(const std::vector<TrackedObject>& preds,
                       const std::vector<GroundTruthObject>& gts, const Matcher& matcher,
                       const std::map<int64_t, int64_t>& previous = {});

struct ClearCounts {
  int64_t num_gt = 0;
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;
  int64_t ids = 0;
  // Sum of BEV distances over matched pairs.
  double distance_sum = 0.0;

  double recall() const { return num_gt > 0 ? double(tp) / double(num_gt) : 0.0; }
  double mota() const {
    return num_gt > 0 ? 1.0 - double(fn + fp + ids) / double(num_gt) : 0.0;
  }
  double motp() const { return tp > 0 ? distance_sum / double(tp) : 0.0; }
};

// CLEAR-MOT counts over a sequence, keeping predictions with
// confidence >= min_confidence. An empty category means all categories.
ClearCounts evaluate_clear(const TrackingResult& result, const GroundTruth& gt,
                           const Matcher& matcher, double min_confidence = 0.0,
                           const std::string& category = "");

struct RecallPoint {
  double target_recall = 0.0;
  bool reachable = false;
  double threshold = 0.0;
  double recall = 0.0;  // achieved
  double mota_r = 0.0;
  double motp_r = 0.0;
  ClearCounts counts;
};

// MOTA_r = max(0, 1 - (IDS + FP + FN - (1 - r)P) / (rP)) at the highest
// confidence threshold whose sequence-wide recall reaches the target, with r
// the recall achieved at that threshold. Unreachable targets give 0.
RecallPoint mota_at_recall(const TrackingResult& result, const GroundTruth& gt,
                           double target_recall, const Matcher& matcher,
                           const std::string& category = "");

struct EvalSettings {
  Matcher matcher = Matcher::bev(2.0);
  int n_points = 40;
  // AMOTP contribution of recall points without true positives.
  double amotp_miss_distance = 2.0;
};

struct CategoryReport {
  std::string category;
  double amota = 0.0;
  double amotp = 0.0;
  // Classic counts over all predictions.
  double recall = 0.0;
  double mota = 0.0;
  int64_t ids = 0;
  int64_t fp = 0;
  int64_t fn = 0;
  int64_t num_gt = 0;
  int unreachable_points = 0;
  std::vector<RecallPoint> curve;
};

struct MetricReport {
  std::string matcher;
  int n_points = 0;
  // Category means (amota, amotp, recall, mota) and sums (ids, fp, fn).
  double amota = 0.0;
  double amotp = 0.0;
  double recall = 0.0;
  double mota = 0.0;
  int64_t ids = 0;
  int64_t fp = 0;
  int64_t fn = 0;
  std::vector<CategoryReport> categories;
};

double amota(const TrackingResult& result, const GroundTruth& gt, int n_points,
             const Matcher& matcher, const std::string& category = "");
double amotp(const TrackingResult& result, const GroundTruth& gt, int n_points,
             const Matcher& matcher, double miss_distance = 2.0,
             const std::string& category = "");

MetricReport evaluate(const TrackingResult& result, const GroundTruth& gt,
                      const EvalSettings& settings = {});

struct IouMota {
  double mota = 0.0;
  double mismatch_ratio = 0.0;
  ClearCounts counts;
};

// Single-threshold CLEAR-MOT over all predictions with 3D IoU gating.
IouMota mota_iou(const TrackingResult& result, const GroundTruth& gt, double iou_threshold);

}  // namespace panoptrack
