#include <cmath>
#include <random>

#include "panoptrack/motion.h"

namespace panoptrack {

namespace {

Linear make_linear(int out, int in) {
  return Linear{Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)};
}

LstmCell make_cell(int hidden, int in) {
  return LstmCell{Eigen::MatrixXd::Zero(4 * hidden, in),
                  Eigen::MatrixXd::Zero(4 * hidden, hidden),
                  Eigen::VectorXd::Zero(4 * hidden)};
}

Eigen::VectorXd sigmoid(const Eigen::VectorXd& z) {
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

}  // namespace

LstmWeights LstmWeights::zeros(int hidden) {
  LstmWeights w;
  w.hidden = hidden;
  w.pred_in = make_linear(kProjectionDim, 7);
  w.pred_cell = make_cell(hidden, kProjectionDim);
  w.pred_out = make_linear(7, hidden);
  w.update_in_pred = make_linear(kProjectionDim, 7);
  w.update_in_obs = make_linear(kProjectionDim, 7);
  w.update_in_conf = make_linear(kProjectionDim, 1);
  w.update_cell = make_cell(hidden, 3 * kProjectionDim);
  w.update_out = make_linear(7, hidden);
  return w;
}

LstmWeights LstmWeights::random(int hidden, uint64_t seed) {
  LstmWeights w = zeros(hidden);
  std::mt19937_64 rng(seed);
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> uni(-k, k);
  w.for_each_tensor([&](const std::string&, Eigen::Map<Eigen::MatrixXd> m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = uni(rng);
    }
  });
  w.pred_cell.bias.segment(hidden, hidden).setOnes();
  w.update_cell.bias.segment(hidden, hidden).setOnes();
  return w;
}

size_t LstmWeights::parameter_count() const {
  size_t n = 0;
  for_each_tensor([&](const std::string&, Eigen::Map<const Eigen::MatrixXd> m) {
    n += static_cast<size_t>(m.size());
  });
  return n;
}

bool LstmWeights::all_finite() const {
  bool ok = true;
  for_each_tensor([&](const std::string&, Eigen::Map<const Eigen::MatrixXd> m) {
    ok = ok && m.allFinite();
  });
  return ok;
}

LstmState LstmState::initial(int hidden) {
  LstmState s;
  s.h_pred = Eigen::VectorXd::Zero(hidden);
  s.c_pred = Eigen::VectorXd::Zero(hidden);
  s.h_update = Eigen::VectorXd::Zero(hidden);
  s.c_update = Eigen::VectorXd::Zero(hidden);
  return s;
}

void LstmState::push_velocity(const Velocity7& v) {
  velocities.push_back(v);
  if (velocities.size() > kVelocityHistory) velocities.erase(velocities.begin());
}

std::array<Velocity7, kVelocityHistory> LstmState::padded_history() const {
  std::array<Velocity7, kVelocityHistory> out;
  const size_t pad = kVelocityHistory - velocities.size();
  for (size_t i = 0; i < kVelocityHistory; ++i) {
    out[i] = i < pad ? Velocity7::Zero() : velocities[i - pad];
  }
  return out;
}

namespace lstm_detail {

void cell_forward(const LstmCell& p, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev,
                  Eigen::VectorXd& h, Eigen::VectorXd& c, CellTrace* trace) {
  const Eigen::Index n = h_prev.size();
  const Eigen::VectorXd z = p.w_input * x + p.w_hidden * h_prev + p.bias;
  Eigen::VectorXd i = sigmoid(z.segment(0, n));
  Eigen::VectorXd f = sigmoid(z.segment(n, n));
  Eigen::VectorXd g = z.segment(2 * n, n).array().tanh().matrix();
  Eigen::VectorXd o = sigmoid(z.segment(3 * n, n));
  c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
  Eigen::VectorXd tanh_c = c.array().tanh().matrix();
  h = o.cwiseProduct(tanh_c);
  if (trace != nullptr) {
    trace->x = x;
    trace->h_prev = h_prev;
    trace->c_prev = c_prev;
    trace->i = std::move(i);
    trace->f = std::move(f);
    trace->g = std::move(g);
    trace->o = std::move(o);
    trace->c = c;
    trace->tanh_c = std::move(tanh_c);
  }
}

Eigen::VectorXd cell_backward(const LstmCell& p, const CellTrace& t,
                              const Eigen::VectorXd& dh, const Eigen::VectorXd& dc_in,
                              LstmCell& grad, Eigen::VectorXd& dh_prev,
                              Eigen::VectorXd& dc_prev) {
  const Eigen::Index n = t.h_prev.size();
  const Eigen::ArrayXd d_o = dh.array() * t.tanh_c.array();
  const Eigen::ArrayXd dc =
      dc_in.array() + dh.array() * t.o.array() * (1.0 - t.tanh_c.array().square());
  Eigen::VectorXd dz(4 * n);
  dz.segment(0, n) = (dc * t.g.array() * t.i.array() * (1.0 - t.i.array())).matrix();
  dz.segment(n, n) = (dc * t.c_prev.array() * t.f.array() * (1.0 - t.f.array())).matrix();
  dz.segment(2 * n, n) = (dc * t.i.array() * (1.0 - t.g.array().square())).matrix();
  dz.segment(3 * n, n) = (d_o * t.o.array() * (1.0 - t.o.array())).matrix();
  dc_prev = (dc * t.f.array()).matrix();

  grad.w_input.noalias() += dz * t.x.transpose();
  grad.w_hidden.noalias() += dz * t.h_prev.transpose();
  grad.bias += dz;
  dh_prev.noalias() = p.w_hidden.transpose() * dz;
  return p.w_input.transpose() * dz;
}

Velocity7 predict_forward(const LstmState& state, const LstmWeights& w,
                          LstmState& next, PredictTrace& trace) {
  next = state;
  trace.inputs = state.padded_history();
  Eigen::VectorXd h = state.h_pred;
  Eigen::VectorXd c = state.c_pred;
  for (int k = 0; k < kVelocityHistory; ++k) {
    const Eigen::VectorXd x = w.pred_in(trace.inputs[k]);
    Eigen::VectorXd h_new, c_new;
    cell_forward(w.pred_cell, x, h, c, h_new, c_new, &trace.cells[k]);
    h = std::move(h_new);
    c = std::move(c_new);
  }
  next.h_pred = h;
  next.c_pred = c;
  return w.pred_out(h);
}

Velocity7 update_forward(const LstmState& state, const Velocity7& predicted,
                         const Velocity7& observed, double confidence,
                         const LstmWeights& w, LstmState& next, UpdateTrace& trace) {
  next = state;
  trace.predicted = predicted;
  trace.observed = observed;
  trace.confidence = confidence;
  Eigen::VectorXd x(3 * kProjectionDim);
  x << w.update_in_pred(predicted), w.update_in_obs(observed),
      w.update_in_conf(Eigen::VectorXd::Constant(1, confidence));
  cell_forward(w.update_cell, x, state.h_update, state.c_update, next.h_update,
               next.c_update, &trace.cell);
  const Velocity7 v = w.update_out(next.h_update);
  next.push_velocity(v);
  return v;
}

PredictGrad predict_backward(const LstmWeights& w, const PredictTrace& trace,
                             const Velocity7& d_out, const Eigen::VectorXd& dh_next,
                             const Eigen::VectorXd& dc_next, LstmWeights& grad) {
  PredictGrad out;
  const CellTrace& last = trace.cells[kVelocityHistory - 1];
  const Eigen::VectorXd h_final = last.o.cwiseProduct(last.tanh_c);
  grad.pred_out.weight.noalias() += d_out * h_final.transpose();
  grad.pred_out.bias += d_out;
  Eigen::VectorXd dh = dh_next + w.pred_out.weight.transpose() * d_out;
  Eigen::VectorXd dc = dc_next;
  for (int k = kVelocityHistory - 1; k >= 0; --k) {
    Eigen::VectorXd dh_prev, dc_prev;
    const Eigen::VectorXd dx =
        cell_backward(w.pred_cell, trace.cells[k], dh, dc, grad.pred_cell, dh_prev, dc_prev);
    grad.pred_in.weight.noalias() += dx * trace.inputs[k].transpose();
    grad.pred_in.bias += dx;
    out.d_inputs[k] = w.pred_in.weight.transpose() * dx;
    dh = std::move(dh_prev);
    dc = std::move(dc_prev);
  }
  out.dh_prev = std::move(dh);
  out.dc_prev = std::move(dc);
  return out;
}

UpdateGrad update_backward(const LstmWeights& w, const UpdateTrace& trace,
                           const Velocity7& d_out, const Eigen::VectorXd& dh_next,
                           const Eigen::VectorXd& dc_next, LstmWeights& grad) {
  UpdateGrad out;
  const Eigen::VectorXd h = trace.cell.o.cwiseProduct(trace.cell.tanh_c);
  grad.update_out.weight.noalias() += d_out * h.transpose();
  grad.update_out.bias += d_out;
  const Eigen::VectorXd dh = dh_next + w.update_out.weight.transpose() * d_out;
  const Eigen::VectorXd dx =
      cell_backward(w.update_cell, trace.cell, dh, dc_next, grad.update_cell,
                    out.dh_prev, out.dc_prev);
  const auto dx_pred = dx.segment(0, kProjectionDim);
  const auto dx_obs = dx.segment(kProjectionDim, kProjectionDim);
  const auto dx_conf = dx.segment(2 * kProjectionDim, kProjectionDim);
  grad.update_in_pred.weight.noalias() += dx_pred * trace.predicted.transpose();
  grad.update_in_pred.bias += dx_pred;
  grad.update_in_obs.weight.noalias() += dx_obs * trace.observed.transpose();
  grad.update_in_obs.bias += dx_obs;
  grad.update_in_conf.weight.col(0) += dx_conf * trace.confidence;
  grad.update_in_conf.bias += dx_conf;
  out.d_predicted = w.update_in_pred.weight.transpose() * dx_pred;
  out.d_observed = w.update_in_obs.weight.transpose() * dx_obs;
  out.d_confidence = w.update_in_conf.weight.col(0).dot(dx_conf);
  return out;
}

}  // namespace lstm_detail

LstmStep lstm_predict(const LstmState& state, const LstmWeights& weights) {
  LstmStep step;
  lstm_detail::PredictTrace trace;
  step.velocity = lstm_detail::predict_forward(state, weights, step.state, trace);
  return step;
}

LstmStep lstm_update(const LstmState& state, const Velocity7& predicted,
                     const Velocity7& observed, double confidence,
                     const LstmWeights& weights) {
  LstmStep step;
  lstm_detail::UpdateTrace trace;
  step.velocity = lstm_detail::update_forward(state, predicted, observed, confidence,
                                              weights, step.state, trace);
  return step;
}

}  // namespace panoptrack
