#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "panoptrack/geom.h"

namespace panoptrack {

// Per-frame change of a box, yaw component wrapped.
using Velocity7 = Vector7d;

inline constexpr int kProjectionDim = 64;
inline constexpr int kVelocityHistory = 5;

struct Linear {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const { return weight * x + bias; }
};

// Gate rows are stacked [input, forget, cell, output].
struct LstmCell {
  Eigen::MatrixXd w_input;   // 4H x in
  Eigen::MatrixXd w_hidden;  // 4H x H
  Eigen::VectorXd bias;      // 4H
};

// Parameters of the predict network (velocity history -> next velocity) and
// the update network ([predicted, observed, confidence] -> refined velocity).
struct LstmWeights {
  int hidden = 128;

  Linear pred_in;    // 7 -> 64
  LstmCell pred_cell;
  Linear pred_out;   // H -> 7

  Linear update_in_pred;  // 7 -> 64
  Linear update_in_obs;   // 7 -> 64
  Linear update_in_conf;  // 1 -> 64
  LstmCell update_cell;   // 192 -> H
  Linear update_out;      // H -> 7

  static LstmWeights zeros(int hidden = 128);
  // Uniform in [-1/sqrt(H), 1/sqrt(H)], forget-gate bias 1.
  static LstmWeights random(int hidden, uint64_t seed);

  // Visits every tensor in a fixed order as (name, column-major map).
  template <class F>
  void for_each_tensor(F&& f);
  template <class F>
  void for_each_tensor(F&& f) const;

  size_t parameter_count() const;
  bool all_finite() const;
};

// Recurrent state of one track.
struct LstmState {
  Eigen::VectorXd h_pred, c_pred, h_update, c_update;
  // Most recent refined velocities, oldest first, at most kVelocityHistory.
  std::vector<Velocity7> velocities;

  static LstmState initial(int hidden);
  void push_velocity(const Velocity7& v);
  // Buffer padded with zeros at the oldest positions.
  std::array<Velocity7, kVelocityHistory> padded_history() const;
};

struct LstmStep {
  Velocity7 velocity;
  LstmState state;
};

// Rolls the predict LSTM over the five buffered velocities, continuing from
// the stored predict hidden state.
LstmStep lstm_predict(const LstmState& state, const LstmWeights& weights);

// One update-LSTM step; the refined velocity is pushed into the buffer of the
// returned state. The caller applies b_t = b_{t-1} + v_t.
LstmStep lstm_update(const LstmState& state, const Velocity7& predicted,
                     const Velocity7& observed, double confidence,
                     const LstmWeights& weights);

// Differentiable forms used by the trainer and gradient checks.
namespace lstm_detail {

struct CellTrace {
  Eigen::VectorXd x, h_prev, c_prev, i, f, g, o, c, tanh_c;
};

void cell_forward(const LstmCell& p, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev,
                  Eigen::VectorXd& h, Eigen::VectorXd& c, CellTrace* trace);

// Accumulates parameter gradients into `grad`; returns dL/dx and writes the
// gradients w.r.t. the previous hidden and cell states.
Eigen::VectorXd cell_backward(const LstmCell& p, const CellTrace& trace,
                              const Eigen::VectorXd& dh, const Eigen::VectorXd& dc,
                              LstmCell& grad, Eigen::VectorXd& dh_prev,
                              Eigen::VectorXd& dc_prev);

struct PredictTrace {
  std::array<Velocity7, kVelocityHistory> inputs;
  std::array<CellTrace, kVelocityHistory> cells;
};

struct UpdateTrace {
  Velocity7 predicted, observed;
  double confidence = 0.0;
  CellTrace cell;
};

Velocity7 predict_forward(const LstmState& state, const LstmWeights& w,
                          LstmState& next, PredictTrace& trace);
Velocity7 update_forward(const LstmState& state, const Velocity7& predicted,
                         const Velocity7& observed, double confidence,
                         const LstmWeights& w, LstmState& next, UpdateTrace& trace);

struct PredictGrad {
  std::array<Velocity7, kVelocityHistory> d_inputs;
  Eigen::VectorXd dh_prev, dc_prev;
};

struct UpdateGrad {
  Velocity7 d_predicted, d_observed;
  double d_confidence = 0.0;
  Eigen::VectorXd dh_prev, dc_prev;
};

// dh_next/dc_next: gradient arriving at the predict state produced by this call.
PredictGrad predict_backward(const LstmWeights& w, const PredictTrace& trace,
                             const Velocity7& d_out, const Eigen::VectorXd& dh_next,
                             const Eigen::VectorXd& dc_next, LstmWeights& grad);
UpdateGrad update_backward(const LstmWeights& w, const UpdateTrace& trace,
                           const Velocity7& d_out, const Eigen::VectorXd& dh_next,
                           const Eigen::VectorXd& dc_next, LstmWeights& grad);

}  // namespace lstm_detail

// Flat binary container: magic, version, H, then named row-major float64
// tensors. See README for the exact layout.
void save_weights(const LstmWeights& weights, std::ostream& out);
LstmWeights load_weights(std::istream& in);
void save_weights(const LstmWeights& weights, const std::string& path);
LstmWeights load_weights(const std::string& path);
// One "name rows cols" line per tensor.
std::string weights_manifest(const LstmWeights& weights);

// Constant-velocity Kalman filter over [x y z theta l w h vx vy vz vtheta].
struct KfParams {
  double q_box = 0.01;
  double q_velocity = 0.1;
  double r_box = 0.5;
  double r_theta = 0.1;
  // Measurement noise is scaled by (1 - confidence + epsilon).
  double epsilon = 1e-3;
  double p0_box = 1.0;
  double p0_velocity = 10.0;
};

using KfVector = Eigen::Matrix<double, 11, 1>;
using KfMatrix = Eigen::Matrix<double, 11, 11>;

struct KfState {
  KfVector mean = KfVector::Zero();
  KfMatrix covariance = KfMatrix::Identity();

  // Box at rest with the initial covariance.
  static KfState from_box(const Box3D& box, const KfParams& params = {});
  Box3D box() const;
};

KfState kf_predict(const KfState& state, const KfParams& params = {});
// Throws NumericError if the covariance cannot be kept positive definite.
KfState kf_update(const KfState& state, const Box3D& observation, double confidence,
                  const KfParams& params = {});

template <class F>
void LstmWeights::for_each_tensor(F&& f) {
  auto mat = [&](const char* name, Eigen::MatrixXd& m) {
    f(std::string(name), Eigen::Map<Eigen::MatrixXd>(m.data(), m.rows(), m.cols()));
  };
  auto vec = [&](const char* name, Eigen::VectorXd& v) {
    f(std::string(name), Eigen::Map<Eigen::MatrixXd>(v.data(), v.size(), 1));
  };
  mat("pred_in.weight", pred_in.weight);
  vec("pred_in.bias", pred_in.bias);
  mat("pred_cell.w_input", pred_cell.w_input);
  mat("pred_cell.w_hidden", pred_cell.w_hidden);
  vec("pred_cell.bias", pred_cell.bias);
  mat("pred_out.weight", pred_out.weight);
  vec("pred_out.bias", pred_out.bias);
  mat("update_in_pred.weight", update_in_pred.weight);
  vec("update_in_pred.bias", update_in_pred.bias);
  mat("update_in_obs.weight", update_in_obs.weight);
  vec("update_in_obs.bias", update_in_obs.bias);
  mat("update_in_conf.weight", update_in_conf.weight);
  vec("update_in_conf.bias", update_in_conf.bias);
  mat("update_cell.w_input", update_cell.w_input);
  mat("update_cell.w_hidden", update_cell.w_hidden);
  vec("update_cell.bias", update_cell.bias);
  mat("update_out.weight", update_out.weight);
  vec("update_out.bias", update_out.bias);
}

template <class F>
void LstmWeights::for_each_tensor(F&& f) const {
  const_cast<LstmWeights*>(this)->for_each_tensor(
      [&](const std::string& name, Eigen::Map<Eigen::MatrixXd> m) {
        f(name, Eigen::Map<const Eigen::MatrixXd>(m.data(), m.rows(), m.cols()));
      });
}

}  // namespace panoptrack
