#include "panoptrack/learn.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "panoptrack/error.h"

namespace panoptrack {

namespace {

double huber_grad(double e, double delta) {
  if (std::abs(e) <= delta) return e;
  return e > 0 ? delta : -delta;
}

double sign(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

void check_lengths(const std::vector<Velocity7>& a, const std::vector<Velocity7>& b,
                   const std::vector<Velocity7>& c) {
  if (a.size() != b.size() || a.size() != c.size()) {
    throw ArgumentError("velocity sequences differ in length");
  }
}

std::vector<Eigen::Map<Eigen::MatrixXd>> tensors(LstmWeights& w) {
  std::vector<Eigen::Map<Eigen::MatrixXd>> out;
  w.for_each_tensor([&](const std::string&, Eigen::Map<Eigen::MatrixXd> m) { out.push_back(m); });
  return out;
}

std::string describe(const TrajectorySample& s) {
  std::ostringstream os;
  os << "object " << s.object_id;
  if (!s.steps.empty()) os << " window starting at frame " << s.steps.front().frame;
  return os.str();
}

}  // namespace

std::map<int64_t, std::map<int64_t, size_t>> match_ground_truth(
    const GroundTruth& gt, const DetectionsByFrame& detections, double threshold) {
  std::map<int64_t, std::map<int64_t, size_t>> out;
  for (const auto& [frame, objs] : gt.frames) {
    auto& matched = out[frame];
    auto it = detections.find(frame);
    if (it == detections.end()) continue;
    const auto& dets = it->second;
    std::vector<std::tuple<double, size_t, size_t>> cands;
    for (size_t gi = 0; gi < objs.size(); ++gi) {
      for (size_t di = 0; di < dets.size(); ++di) {
        if (dets[di].category != objs[gi].category) continue;
        const double d = bev_distance(objs[gi].box, dets[di].box);
        if (d <= threshold) cands.emplace_back(d, gi, di);
      }
    }
    std::sort(cands.begin(), cands.end());
    std::vector<bool> gt_used(objs.size(), false), det_used(dets.size(), false);
    for (const auto& [d, gi, di] : cands) {
      if (gt_used[gi] || det_used[di]) continue;
      gt_used[gi] = det_used[di] = true;
      matched[objs[gi].object_id] = di;
    }
  }
  return out;
}

std::vector<TrajectorySample> build_trajectory_dataset(const GroundTruth& gt,
                                                       const DetectionsByFrame& detections,
                                                       double threshold, int window) {
  if (window < 3) throw ArgumentError("window must be >= 3");
  const auto matches = match_ground_truth(gt, detections, threshold);

  // object id -> frame -> step
  std::map<int64_t, std::map<int64_t, TrajectoryStep>> tracks;
  std::map<int64_t, std::string> categories;
  for (const auto& [frame, objs] : gt.frames) {
    const auto& m = matches.at(frame);
    for (const auto& g : objs) {
      TrajectoryStep st;
      st.frame = frame;
      st.gt_box = g.box;
      if (auto it = m.find(g.object_id); it != m.end()) {
        st.detection = detections.at(frame)[it->second];
      }
      tracks[g.object_id][frame] = std::move(st);
      categories[g.object_id] = g.category;
    }
  }

  std::vector<TrajectorySample> out;
  for (const auto& [id, steps] : tracks) {
    for (const auto& [start, first] : steps) {
      if (!first.detection) continue;
      TrajectorySample s;
      s.object_id = id;
      s.category = categories[id];
      for (int k = 0; k < window; ++k) {
        auto it = steps.find(start + k);
        if (it == steps.end()) break;
        s.steps.push_back(it->second);
      }
      if (static_cast<int>(s.steps.size()) == window) out.push_back(std::move(s));
    }
  }
  return out;
}

double huber(double error, double delta) {
  const double a = std::abs(error);
  return a <= delta ? 0.5 * error * error : delta * (a - 0.5 * delta);
}

double trajectory_loss(const std::vector<Velocity7>& refined,
                       const std::vector<Velocity7>& predicted,
                       const std::vector<Velocity7>& ground_truth, double delta) {
  check_lengths(refined, predicted, ground_truth);
  if (refined.empty()) return 0.0;
  double acc = 0.0;
  for (size_t t = 0; t < refined.size(); ++t) {
    for (int c = 0; c < 7; ++c) {
      acc += huber(predicted[t][c] - ground_truth[t][c], delta);
      acc += huber(refined[t][c] - ground_truth[t][c], delta);
    }
  }
  return acc / double(refined.size());
}

double linearity_loss(const std::vector<Velocity7>& predicted) {
  if (predicted.size() < 3) throw ArgumentError("linearity loss needs at least 3 velocities");
  double acc = 0.0;
  for (size_t t = 1; t + 1 < predicted.size(); ++t) {
    acc += (predicted[t + 1] - 2.0 * predicted[t] + predicted[t - 1]).lpNorm<1>();
  }
  return acc / double(predicted.size() - 2);
}

double motion_loss(const std::vector<Velocity7>& refined,
                   const std::vector<Velocity7>& predicted,
                   const std::vector<Velocity7>& ground_truth, double w_linear, double delta) {
  return trajectory_loss(refined, predicted, ground_truth, delta) +
         w_linear * linearity_loss(predicted);
}

WindowResult simulate_window(const TrajectorySample& sample, const LstmWeights& weights,
                             const TrainConfig& config, LstmWeights* grad) {
  const size_t n = sample.steps.size();
  if (n < 2) throw ArgumentError("window needs at least two steps");
  if (!sample.steps.front().detection) {
    throw ArgumentError("window must start at a matched step");
  }

  // Index k runs over steps 1..n-1; slot k-1 in the output vectors.
  std::vector<Box3D> boxes(n);
  boxes[0] = sample.steps[0].detection->box;
  std::vector<lstm_detail::PredictTrace> ptrace(n);
  std::vector<lstm_detail::UpdateTrace> utrace(n);
  std::vector<bool> matched(n, false);

  WindowResult r;
  LstmState state = LstmState::initial(weights.hidden);
  for (size_t k = 1; k < n; ++k) {
    const TrajectoryStep& st = sample.steps[k];
    LstmState after_pred;
    const Velocity7 vh = lstm_detail::predict_forward(state, weights, after_pred, ptrace[k]);
    Velocity7 v;
    if (st.detection) {
      matched[k] = true;
      const Velocity7 observed = st.detection->box.minus(boxes[k - 1]);
      LstmState after_update;
      v = lstm_detail::update_forward(after_pred, vh, observed, st.detection->confidence,
                                      weights, after_update, utrace[k]);
      state = std::move(after_update);
    } else {
      v = vh;
      after_pred.push_velocity(vh);
      state = std::move(after_pred);
    }
    boxes[k] = boxes[k - 1].plus(v);
    r.predicted.push_back(vh);
    r.refined.push_back(v);
    // Target is the move that lands on the gt box from where the track
    // actually is, so accumulated drift is penalized.
    r.ground_truth.push_back(st.gt_box.minus(boxes[k - 1]));
  }

  r.traj_term = trajectory_loss(r.refined, r.predicted, r.ground_truth, config.huber_delta);
  r.linear_term = r.predicted.size() >= 3 ? linearity_loss(r.predicted) : 0.0;
  r.loss = r.traj_term + config.w_linear * r.linear_term;
  if (grad == nullptr) return r;

  // Loss gradients w.r.t. refined (dv) and predicted (dvh) velocities.
  const double m = static_cast<double>(n - 1);
  std::vector<Velocity7> dv(n, Velocity7::Zero()), dvh(n, Velocity7::Zero()),
      db(n, Velocity7::Zero());
  for (size_t k = 1; k < n; ++k) {
    for (int c = 0; c < 7; ++c) {
      dvh[k][c] = huber_grad(r.predicted[k - 1][c] - r.ground_truth[k - 1][c],
                             config.huber_delta) / m;
      dv[k][c] = huber_grad(r.refined[k - 1][c] - r.ground_truth[k - 1][c],
                            config.huber_delta) / m;
    }
    // target = gt_k - b_{k-1}
    db[k - 1] += dv[k] + dvh[k];
  }
  if (r.predicted.size() >= 3) {
    const double scale = config.w_linear / double(r.predicted.size() - 2);
    for (size_t t = 1; t + 1 < r.predicted.size(); ++t) {
      const Velocity7 d2 = r.predicted[t + 1] - 2.0 * r.predicted[t] + r.predicted[t - 1];
      const Velocity7 s = d2.unaryExpr([](double x) { return sign(x); }) * scale;
      dvh[t + 2] += s;
      dvh[t + 1] -= 2.0 * s;
      dvh[t] += s;
    }
  }

  const int h = weights.hidden;
  Eigen::VectorXd dh_pred = Eigen::VectorXd::Zero(h), dc_pred = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd dh_upd = Eigen::VectorXd::Zero(h), dc_upd = Eigen::VectorXd::Zero(h);
  for (size_t k = n - 1; k >= 1; --k) {
    // b_k = b_{k-1} + v_k
    dv[k] += db[k];
    db[k - 1] += db[k];
    if (matched[k]) {
      lstm_detail::UpdateGrad ug =
          lstm_detail::update_backward(weights, utrace[k], dv[k], dh_upd, dc_upd, *grad);
      dh_upd = std::move(ug.dh_prev);
      dc_upd = std::move(ug.dc_prev);
      dvh[k] += ug.d_predicted;
      // observed = det - b_{k-1}
      db[k - 1] -= ug.d_observed;
    } else {
      dvh[k] += dv[k];
    }
    lstm_detail::PredictGrad pg =
        lstm_detail::predict_backward(weights, ptrace[k], dvh[k], dh_pred, dc_pred, *grad);
    dh_pred = std::move(pg.dh_prev);
    dc_pred = std::move(pg.dc_prev);
    // Buffer slot j at step k holds v_{k-5+j}; earlier slots are zero padding.
    for (int j = 0; j < kVelocityHistory; ++j) {
      const long src = static_cast<long>(k) - kVelocityHistory + j;
      if (src >= 1) dv[src] += pg.d_inputs[j];
    }
  }
  return r;
}

std::string TrainingLog::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,mean_loss,traj_term,linear_term,validation_loss\n";
  for (const auto& e : epochs) {
    os << e.epoch << ',' << e.mean_loss << ',' << e.traj_term << ',' << e.linear_term << ','
       << e.validation_loss << '\n';
  }
  return os.str();
}

TrainingLog train_motion_model(const std::vector<TrajectorySample>& dataset,
                               LstmWeights& weights, const TrainConfig& config) {
  if (config.batch_size < 1) throw ArgumentError("batch_size must be >= 1");
  if (config.epochs < 0) throw ArgumentError("epochs must be >= 0");
  if (!(config.learning_rate >= 0.0)) throw ArgumentError("learning_rate must be >= 0");
  if (!(config.validation_fraction >= 0.0 && config.validation_fraction < 1.0)) {
    throw ArgumentError("validation_fraction must lie in [0, 1)");
  }
  if (dataset.empty()) throw ArgumentError("training dataset is empty");

  // Hold out whole objects so overlapping windows do not leak across the split.
  std::set<int64_t> ids;
  for (const auto& s : dataset) ids.insert(s.object_id);
  std::vector<int64_t> id_order(ids.begin(), ids.end());
  std::mt19937_64 rng(config.seed);
  std::shuffle(id_order.begin(), id_order.end(), rng);
  size_t n_val = static_cast<size_t>(std::floor(config.validation_fraction * id_order.size()));
  if (n_val >= id_order.size()) n_val = id_order.size() - 1;
  const std::set<int64_t> val_ids(id_order.begin(), id_order.begin() + n_val);
  std::vector<size_t> train_idx, val_idx;
  for (size_t i = 0; i < dataset.size(); ++i) {
    (val_ids.count(dataset[i].object_id) ? val_idx : train_idx).push_back(i);
  }

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  LstmWeights m1 = LstmWeights::zeros(weights.hidden);
  LstmWeights m2 = LstmWeights::zeros(weights.hidden);
  LstmWeights m2max = LstmWeights::zeros(weights.hidden);
  auto w_t = tensors(weights);
  auto m1_t = tensors(m1);
  auto m2_t = tensors(m2);
  auto mx_t = tensors(m2max);
  int64_t step = 0;

  auto check = [](const TrajectorySample& s, const WindowResult& r) {
    if (!std::isfinite(r.loss)) throw NumericError("motion loss is not finite for " + describe(s));
  };

  TrainingLog log;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    EpochLog e;
    e.epoch = epoch;
    for (size_t b0 = 0; b0 < train_idx.size(); b0 += config.batch_size) {
      const size_t b1 = std::min(train_idx.size(), b0 + config.batch_size);
      LstmWeights grad = LstmWeights::zeros(weights.hidden);
      for (size_t i = b0; i < b1; ++i) {
        const auto& s = dataset[train_idx[i]];
        const WindowResult r = simulate_window(s, weights, config, &grad);
        check(s, r);
        e.mean_loss += r.loss;
        e.traj_term += r.traj_term;
        e.linear_term += r.linear_term;
      }
      ++step;
      const double inv = 1.0 / double(b1 - b0);
      const double bc1 = 1.0 - std::pow(kBeta1, double(step));
      const double bc2 = 1.0 - std::pow(kBeta2, double(step));
      auto g_t = tensors(grad);
      for (size_t t = 0; t < w_t.size(); ++t) {
        const Eigen::ArrayXXd g =
            g_t[t].array() * inv + config.weight_decay * w_t[t].array();
        m1_t[t].array() = kBeta1 * m1_t[t].array() + (1.0 - kBeta1) * g;
        m2_t[t].array() = kBeta2 * m2_t[t].array() + (1.0 - kBeta2) * g.square();
        mx_t[t].array() = mx_t[t].array().max(m2_t[t].array());
        w_t[t].array() -= config.learning_rate * (m1_t[t].array() / bc1) /
                          ((mx_t[t].array() / bc2).sqrt() + kEps);
      }
      if (!weights.all_finite()) {
        throw NumericError("weights diverged after batch ending at " +
                           describe(dataset[train_idx[b1 - 1]]));
      }
    }
    const double nt = train_idx.empty() ? 1.0 : double(train_idx.size());
    e.mean_loss /= nt;
    e.traj_term /= nt;
    e.linear_term /= nt;

    if (val_idx.empty()) {
      e.validation_loss = e.mean_loss;
    } else {
      for (size_t i : val_idx) {
        const WindowResult r = simulate_window(dataset[i], weights, config);
        check(dataset[i], r);
        e.validation_loss += r.loss;
      }
      e.validation_loss /= double(val_idx.size());
    }
    log.epochs.push_back(e);
  }
  return log;
}

double embed_loss(const Embedding& key, const std::vector<Embedding>& positives,
                  const std::vector<Embedding>& negatives) {
  // log(1 + sum exp(s)) as a log-sum-exp with an implicit zero term.
  std::vector<double> s;
  for (const auto& p : positives) {
    for (const auto& q : negatives) s.push_back(key.dot(q) - key.dot(p));
  }
  double mx = 0.0;
  for (double v : s) mx = std::max(mx, v);
  double acc = std::exp(-mx);
  for (double v : s) acc += std::exp(v - mx);
  return mx + std::log(acc);
}

Embedding embed_loss_grad(const Embedding& key, const std::vector<Embedding>& positives,
                          const std::vector<Embedding>& negatives) {
  double mx = 0.0;
  for (const auto& p : positives) {
    for (const auto& q : negatives) mx = std::max(mx, key.dot(q) - key.dot(p));
  }
  double z = std::exp(-mx);
  Embedding g = Embedding::Zero(key.size());
  for (const auto& p : positives) {
    for (const auto& q : negatives) {
      const double w = std::exp(key.dot(q) - key.dot(p) - mx);
      z += w;
      g += w * (q - p);
    }
  }
  return g / z;
}

double aux_loss(const Embedding& key, const Embedding& ref, bool same_object) {
  const double nk = key.norm(), nr = ref.norm();
  if (nk == 0.0 || nr == 0.0) throw ArgumentError("aux loss needs nonzero embeddings");
  const double c = key.dot(ref) / (nk * nr) - (same_object ? 1.0 : 0.0);
  return c * c;
}

double similarity_loss(double embed_term, double aux_term, double lambda_embed) {
  return lambda_embed * embed_term + aux_term;
}

}  // namespace panoptrack
