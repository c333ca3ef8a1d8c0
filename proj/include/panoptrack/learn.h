#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "panoptrack/fusion.h"
#include "panoptrack/motion.h"
#include "panoptrack/result.h"

namespace panoptrack {

// World-frame detections per frame, already merged across cameras.
using DetectionsByFrame = std::map<int64_t, std::vector<DetectionRecord>>;

struct TrajectoryStep {
  int64_t frame = 0;
  Box3D gt_box;
  // Empty for a gap (no detection within the match threshold).
  std::optional<DetectionRecord> detection;

  int camera_id() const { return detection ? detection->camera_id : -1; }
};

struct TrajectorySample {
  int64_t object_id = 0;
  std::string category;
  std::vector<TrajectoryStep> steps;
};

struct TrainConfig {
  int window = 10;  // >= 3
  int batch_size = 128;
  int epochs = 100;
  double w_linear = 0.001;
  double bev_match_threshold = 2.0;
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double huber_delta = 1.0;
  // Share of object ids held out for the validation loss.
  double validation_fraction = 0.2;
  uint64_t seed = 0;
};

// Per-frame one-to-one matching of gt boxes to same-category detections,
// greedy by ascending BEV distance, gated at `threshold`. Returns, per frame,
// gt object id -> detection index.
std::map<int64_t, std::map<int64_t, size_t>> match_ground_truth(
    const GroundTruth& gt, const DetectionsByFrame& detections, double threshold);

// All windows of `window` consecutive frames of each gt trajectory whose
// first step has a matched detection.
std::vector<TrajectorySample> build_trajectory_dataset(const GroundTruth& gt,
                                                       const DetectionsByFrame& detections,
                                                       double threshold, int window);

double huber(double error, double delta);

// mean_t [ huber(v_hat_t, v_gt_t) + huber(v_t, v_gt_t) ], summed over components.
double trajectory_loss(const std::vector<Velocity7>& refined,
                       const std::vector<Velocity7>& predicted,
                       const std::vector<Velocity7>& ground_truth, double delta = 1.0);

// Mean L1 norm of the second difference of the predicted velocities.
double linearity_loss(const std::vector<Velocity7>& predicted);

double motion_loss(const std::vector<Velocity7>& refined,
                   const std::vector<Velocity7>& predicted,
                   const std::vector<Velocity7>& ground_truth, double w_linear,
                   double delta = 1.0);

// ground_truth[t] is gt_t - b_{t-1}, measured from the track's own previous
// refined box.
struct WindowResult {
  double loss = 0.0;
  double traj_term = 0.0;
  double linear_term = 0.0;
  std::vector<Velocity7> refined, predicted, ground_truth;
};

// Replays a window through the motion networks exactly as the tracker does
// (gaps reuse the prediction). When `grad` is non-null the gradient of the
// window's motion loss is accumulated into it.
WindowResult simulate_window(const TrajectorySample& sample, const LstmWeights& weights,
                             const TrainConfig& config, LstmWeights* grad = nullptr);

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double traj_term = 0.0;
  double linear_term = 0.0;
  double validation_loss = 0.0;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;
  // epoch,mean_loss,traj_term,linear_term
  std::string to_csv() const;
};

// Mini-batch Adam (AMSGrad) with L2 weight decay. Throws NumericError naming
// the sample if a loss turns NaN.
TrainingLog train_motion_model(const std::vector<TrajectorySample>& dataset,
                               LstmWeights& weights, const TrainConfig& config);

// log(1 + sum_p sum_n exp(f.n - f.p)).
double embed_loss(const Embedding& key, const std::vector<Embedding>& positives,
                  const std::vector<Embedding>& negatives);
Embedding embed_loss_grad(const Embedding& key, const std::vector<Embedding>& positives,
                          const std::vector<Embedding>& negatives);

// (cos(key, ref) - [same_object])^2.
double aux_loss(const Embedding& key, const Embedding& ref, bool same_object);

double similarity_loss(double embed_term, double aux_term, double lambda_embed = 0.25);

}  // namespace panoptrack
