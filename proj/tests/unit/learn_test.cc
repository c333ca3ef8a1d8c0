#include <cmath>
#include <random>
#include <utility>

#include <gtest/gtest.h>

#include "fixtures.h"
#include "panoptrack/error.h"
#include "panoptrack/learn.h"

namespace panoptrack {
namespace {

Velocity7 vel(double x) {
  Velocity7 v = Velocity7::Zero();
  v[0] = x;
  return v;
}

TEST(Huber, Branches) {
  EXPECT_DOUBLE_EQ(huber(0.5, 1.0), 0.125);
  EXPECT_DOUBLE_EQ(huber(-2.0, 1.0), 1.5);
  EXPECT_DOUBLE_EQ(huber(1.0, 1.0), 0.5);
}

TEST(TrajectoryLoss, HandValues) {
  const std::vector<Velocity7> g{vel(0.3)};
  EXPECT_EQ(trajectory_loss(g, g, g), 0.0);
  EXPECT_NEAR(trajectory_loss(g, {vel(0.8)}, g), 0.125, 1e-9);
  EXPECT_NEAR(trajectory_loss(g, {vel(2.3)}, g), 1.5, 1e-9);
  EXPECT_THROW(trajectory_loss(g, {}, g), ArgumentError);
}

TEST(LinearityLoss, HandValues) {
  EXPECT_EQ(linearity_loss({vel(1), vel(1), vel(1)}), 0.0);
  EXPECT_NEAR(linearity_loss({vel(0), vel(1), vel(2), vel(3)}), 0.0, 1e-12);
  EXPECT_NEAR(linearity_loss({vel(0), vel(1), vel(0)}), 2.0, 1e-9);
  EXPECT_THROW(linearity_loss({vel(0), vel(1)}), ArgumentError);
}

TEST(MotionLoss, HandValues) {
  const std::vector<Velocity7> z{vel(0), vel(0), vel(0)};
  EXPECT_EQ(motion_loss(z, z, z, 0.001), 0.0);
  // Trajectory term 0.125 (one step error 0.5, averaged over 3 steps: scale
  // the error so the mean is exactly 0.125) and linearity 2.
  const std::vector<Velocity7> pred{vel(0), vel(1), vel(0)};
  const std::vector<Velocity7> gt = pred;
  std::vector<Velocity7> refined = pred;
  refined[1][1] = std::sqrt(0.75);  // 0.5 * 0.75 / 3 = 0.125
  EXPECT_NEAR(trajectory_loss(refined, pred, gt), 0.125, 1e-12);
  EXPECT_NEAR(motion_loss(refined, pred, gt, 0.001), 0.127, 1e-9);
  EXPECT_NEAR(motion_loss(refined, pred, gt, 0.0), trajectory_loss(refined, pred, gt), 1e-15);
}

TEST(EmbedLoss, HandValues) {
  Embedding key(2), p(2), n(2);
  key << 1, 0;
  p << 1, 0;
  n << 0, 1;
  EXPECT_EQ(embed_loss(key, {p}, {}), 0.0);
  EXPECT_NEAR(embed_loss(key, {p}, {n}), std::log(1 + std::exp(-1.0)), 1e-12);
  EXPECT_NEAR(embed_loss(key, {p}, {n}), 0.3133, 1e-4);
}

TEST(EmbedLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  auto rnd = [&] {
    Embedding e(5);
    for (int i = 0; i < 5; ++i) e[i] = g(rng);
    return e;
  };
  const Embedding key = rnd();
  const std::vector<Embedding> pos{rnd(), rnd()}, neg{rnd(), rnd(), rnd()};
  const Embedding grad = embed_loss_grad(key, pos, neg);
  for (int i = 0; i < 5; ++i) {
    Embedding a = key, b = key;
    a[i] += 1e-6;
    b[i] -= 1e-6;
    EXPECT_NEAR((embed_loss(a, pos, neg) - embed_loss(b, pos, neg)) / 2e-6, grad[i], 1e-7);
  }
}

TEST(AuxLoss, HandValues) {
  Embedding a(2), b(2), c(2);
  a << 1, 0;
  b << 0, 3;
  c << 1, std::sqrt(3.0);  // cos(a, c) = 0.5
  EXPECT_EQ(aux_loss(a, a, true), 0.0);
  EXPECT_EQ(aux_loss(a, b, false), 0.0);
  EXPECT_NEAR(aux_loss(a, c, true), 0.25, 1e-12);
}

TEST(SimilarityLoss, HandValues) {
  EXPECT_EQ(similarity_loss(0, 0), 0.0);
  // 0.25 * 0.3133 + 0.25 = 0.328325, listed as 0.3283 to four places.
  EXPECT_NEAR(similarity_loss(0.3133, 0.25, 0.25), 0.328325, 1e-9);
  EXPECT_NEAR(similarity_loss(0.3133, 0.25, 0.25), 0.3283, 5e-5);
  EXPECT_EQ(similarity_loss(0.7, 0.25, 0.0), 0.25);
}

GroundTruth one_object_gt(int frames) {
  GroundTruth gt;
  for (int f = 0; f < frames; ++f) gt.frames[f].push_back({7, Box3D(f, 0, 0, 0, 4, 2, 1.5), "car"});
  return gt;
}

DetectionRecord det_at(double x, double y) {
  DetectionRecord d;
  d.box = Box3D(x, y, 0, 0, 4, 2, 1.5);
  return d;
}

TEST(MatchGroundTruth, GateAndExactHit) {
  const GroundTruth gt = one_object_gt(2);
  DetectionsByFrame dets;
  dets[0] = {det_at(0, 0)};
  dets[1] = {det_at(1, 2.5)};
  const auto m = match_ground_truth(gt, dets, 2.0);
  EXPECT_EQ(m.at(0).at(7), 0u);
  EXPECT_TRUE(m.at(1).empty());
}

TEST(MatchGroundTruth, CrossingConfigurationIsGreedyByDistance) {
  // Greedy picks (g1,d1) at 0.1 first, which forces the rest.
  GroundTruth gt;
  gt.frames[0] = {{0, Box3D(0, 0, 0, 0, 1, 1, 1), "car"},
                  {1, Box3D(1, 0, 0, 0, 1, 1, 1), "car"},
                  {2, Box3D(2, 0, 0, 0, 1, 1, 1), "car"}};
  DetectionsByFrame dets;
  dets[0] = {det_at(1.1, 0), det_at(0.5, 0), det_at(2.9, 0)};
  const auto m = match_ground_truth(gt, dets, 2.0).at(0);
  EXPECT_EQ(m.at(1), 0u);
  EXPECT_EQ(m.at(0), 1u);
  EXPECT_EQ(m.at(2), 2u);
}

TEST(TrajectoryDataset, WindowsStartAtMatchedSteps) {
  const GroundTruth gt = one_object_gt(6);
  DetectionsByFrame dets;
  for (int f : {0, 2, 3, 4}) dets[f] = {det_at(f + 0.1, 0)};
  const auto ds = build_trajectory_dataset(gt, dets, 2.0, 3);
  // Starts at 0, 2, 3 (3 steps fit); frame 4 would run past the end.
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds[0].steps.front().frame, 0);
  EXPECT_FALSE(ds[0].steps[1].detection.has_value());
  EXPECT_EQ(ds[1].steps.front().frame, 2);
  EXPECT_EQ(ds[2].steps.front().frame, 3);
  for (const auto& s : ds) {
    EXPECT_EQ(s.steps.size(), 3u);
    EXPECT_EQ(s.object_id, 7);
  }
  EXPECT_THROW(build_trajectory_dataset(gt, dets, 2.0, 2), ArgumentError);
}

TEST(SimulateWindow, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  const int H = 5;
  TrainConfig cfg;
  for (int draw = 0; draw < 3; ++draw) {
    const TrajectorySample s = fixture::random_window(rng, 10);
    const LstmWeights w = LstmWeights::random(H, 100 + draw);
    LstmWeights grad = LstmWeights::zeros(H);
    const WindowResult r = simulate_window(s, w, cfg, &grad);
    const double floor = fixture::gradient_floor(r.loss);
    EXPECT_NEAR(r.loss, r.traj_term + cfg.w_linear * r.linear_term, 1e-12);

    LstmWeights probe = w;
    std::vector<Eigen::Map<Eigen::MatrixXd>> params;
    std::vector<Eigen::Map<const Eigen::MatrixXd>> grads;
    probe.for_each_tensor([&](const std::string&, Eigen::Map<Eigen::MatrixXd> m) { params.push_back(m); });
    std::as_const(grad).for_each_tensor([&](const std::string&, Eigen::Map<const Eigen::MatrixXd> m) { grads.push_back(m); });
    double worst = 0.0;
    for (size_t t = 0; t < params.size(); ++t) {
      for (Eigen::Index i = 0; i < params[t].size(); i += 7) {
        double& p = params[t].data()[i];
        const double saved = p;
        auto loss_at = [&](double d) {
          p = saved + d;
          return simulate_window(s, probe, cfg).loss;
        };
        const double fd = fixture::five_point(loss_at);
        p = saved;
        const double an = grads[t].data()[i];
        worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), floor}));
      }
    }
    EXPECT_LT(worst, 1e-4) << "draw " << draw;
  }
}

TEST(SimulateWindow, GroundTruthVelocityFollowsOwnTrack) {
  std::mt19937_64 rng(3);
  const TrajectorySample s = fixture::random_window(rng, 6);
  const WindowResult r = simulate_window(s, LstmWeights::zeros(8), {});
  // Zero weights never move the box, so every target is measured from the
  // first detection.
  ASSERT_EQ(r.ground_truth.size(), 5u);
  const Box3D b0 = s.steps[0].detection->box;
  for (size_t k = 0; k < r.ground_truth.size(); ++k) {
    EXPECT_TRUE(r.ground_truth[k].isApprox(s.steps[k + 1].gt_box.minus(b0), 1e-12));
  }
}

TEST(Train, ZeroLearningRateKeepsWeights) {
  std::mt19937_64 rng(4);
  std::vector<TrajectorySample> ds;
  for (int i = 0; i < 6; ++i) {
    ds.push_back(fixture::random_window(rng, 5));
    ds.back().object_id = i;
  }
  LstmWeights w = LstmWeights::random(8, 4);
  const LstmWeights before = w;
  TrainConfig cfg;
  cfg.window = 5;
  cfg.learning_rate = 0.0;
  cfg.epochs = 3;
  cfg.batch_size = 2;
  train_motion_model(ds, w, cfg);
  EXPECT_EQ(w.update_cell.w_input, before.update_cell.w_input);
  EXPECT_EQ(w.pred_out.bias, before.pred_out.bias);
}

TEST(Train, OverfitsSingleWindow) {
  std::mt19937_64 rng(5);
  const std::vector<TrajectorySample> ds{fixture::random_window(rng, 10)};
  LstmWeights w = LstmWeights::random(32, 5);
  TrainConfig cfg;
  cfg.batch_size = 1;
  cfg.epochs = 2000;
  cfg.validation_fraction = 0.0;
  const TrainingLog log = train_motion_model(ds, w, cfg);
  EXPECT_LT(simulate_window(ds[0], w, cfg).loss, 1e-3);
  EXPECT_EQ(log.epochs.size(), 2000u);
}

TEST(Train, ReducesLossOnConstantVelocityData) {
  std::mt19937_64 rng(6);
  std::vector<TrajectorySample> ds;
  for (int i = 0; i < 40; ++i) {
    ds.push_back(fixture::random_window(rng, 10));
    ds.back().object_id = i;
  }
  LstmWeights w = LstmWeights::random(16, 6);
  TrainConfig cfg;
  cfg.batch_size = 8;
  const TrainingLog log = train_motion_model(ds, w, cfg);
  ASSERT_EQ(log.epochs.size(), 100u);
  EXPECT_LT(log.epochs.back().mean_loss, 0.5 * log.epochs.front().mean_loss);
  EXPECT_LT(log.epochs.back().validation_loss, 0.5 * log.epochs.front().validation_loss);
  const std::string csv = log.to_csv();
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,mean_loss,traj_term,linear_term,validation_loss");
}

TEST(Train, RejectsBadConfig) {
  std::mt19937_64 rng(7);
  std::vector<TrajectorySample> ds{fixture::random_window(rng, 5)};
  LstmWeights w = LstmWeights::random(4, 7);
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(train_motion_model(ds, w, cfg), ArgumentError);
  EXPECT_THROW(train_motion_model({}, w, TrainConfig{}), ArgumentError);
}

TEST(Train, NonFiniteLossIsNumericError) {
  std::mt19937_64 rng(8);
  std::vector<TrajectorySample> ds{fixture::random_window(rng, 5)};
  ds[0].steps[1].gt_box.x = std::nan("");
  LstmWeights w = LstmWeights::random(4, 8);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.validation_fraction = 0.0;
  EXPECT_THROW(train_motion_model(ds, w, cfg), NumericError);
}

}  // namespace
}  // namespace panoptrack
