#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "panoptrack/affinity.h"
#include "panoptrack/error.h"

namespace panoptrack {
namespace {

Embedding unit(int dim, int axis) {
  Embedding e = Embedding::Zero(dim);
  e[axis] = 1.0;
  return e;
}

Embedding random_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> n;
  Embedding e(dim);
  for (int i = 0; i < dim; ++i) e[i] = n(rng);
  return e / e.norm();
}

TEST(AppearanceAffinity, SingleElementIsOne) {
  const auto a = appearance_affinity({unit(4, 0)}, {unit(4, 3)});
  ASSERT_EQ(a.rows(), 1);
  EXPECT_EQ(a(0, 0), 1.0);
}

TEST(AppearanceAffinity, TwoEqualScores) {
  const auto a = appearance_affinity({unit(4, 0)}, {unit(4, 1), unit(4, 2)});
  EXPECT_DOUBLE_EQ(a(0, 0), 0.75);
  EXPECT_DOUBLE_EQ(a(0, 1), 0.75);
}

TEST(AppearanceAffinity, MatchesTwoLoopEvaluation) {
  std::mt19937_64 rng(5);
  std::vector<Embedding> t, d;
  for (int i = 0; i < 4; ++i) t.push_back(random_unit(rng, 16));
  for (int j = 0; j < 5; ++j) d.push_back(random_unit(rng, 16));
  const auto a = appearance_affinity(t, d);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 5; ++j) {
      double row = 0.0, col = 0.0;
      for (int k = 0; k < 5; ++k) row += std::exp(t[i].dot(d[k]));
      for (int k = 0; k < 4; ++k) col += std::exp(t[k].dot(d[j]));
      const double s = std::exp(t[i].dot(d[j]));
      EXPECT_NEAR(a(i, j), 0.5 * (s / row + s / col), 1e-12);
    }
  }
}

TEST(LocationAffinity, Examples) {
  const Box3D b(1, 2, 3, 0.5, 4, 2, 1);
  EXPECT_EQ(location_affinity({b}, {b}, 10)(0, 0), 1.0);
  Box3D shifted = b;
  shifted.x += 10;
  EXPECT_NEAR(location_affinity({b}, {shifted}, 10)(0, 0), std::exp(-1.0), 1e-12);
  Box3D p = b, q = b;
  p.theta = 3.1;
  q.theta = -3.1;
  EXPECT_NEAR(2 * kPi - 6.2, 0.0832, 1e-4);
  EXPECT_NEAR(location_affinity({p}, {q}, 10)(0, 0), std::exp(-(2 * kPi - 6.2) / 10), 1e-12);
  EXPECT_THROW(location_affinity({b}, {b}, 0.0), ArgumentError);
}

TEST(MotionAffinity, DetectionAtPrediction) {
  const auto m = motion_affinity({{0, 0, 0}}, {{1, 0, 0}}, {{1, 0, 0}}, 10);
  EXPECT_DOUBLE_EQ(m(0, 0), 1.0);
}

TEST(MotionAffinity, OpposingMotion) {
  const auto m = motion_affinity({{0, 0, 0}}, {{1, 0, 0}}, {{-1, 0, 0}}, 10);
  const double e = std::exp(-0.2);
  EXPECT_NEAR(m(0, 0), -e + 2 * e, 1e-12);
  EXPECT_NEAR(m(0, 0), 0.8187, 1e-4);
  // Clamping the cosine weight to [0, 1] leaves only the pseudo-motion term.
  EXPECT_NEAR(motion_affinity({{0, 0, 0}}, {{1, 0, 0}}, {{-1, 0, 0}}, 10, true)(0, 0), e, 1e-12);
}

TEST(MotionAffinity, StationaryTrackUsesPseudoTerm) {
  const auto m = motion_affinity({{2, 2, 0}}, {{2, 2, 0}}, {{5, 6, 0}}, 10);
  EXPECT_NEAR(m(0, 0), std::exp(-5.0 / 10), 1e-12);
}

TrackCue cue(int64_t id, const Box3D& prev, const Box3D& pred, const Embedding& e) {
  TrackCue c;
  c.id = id;
  c.category = "car";
  c.embedding = e;
  c.prev_center = prev.center();
  c.predicted = pred;
  return c;
}

DetectionRecord det(const Box3D& b, const Embedding& e) {
  DetectionRecord d;
  d.box = b;
  d.embedding = e;
  return d;
}

TEST(CombinedAffinity, ComposesTheThreeTerms) {
  const Box3D p0(0, 0, 0, 0, 4, 2, 1.5), q0(1, 0, 0, 0, 4, 2, 1.5);
  const Box3D p1(10, 3, 0, 1, 4, 2, 1.5), q1(9, 4, 0, 1.1, 4, 2, 1.5);
  const Box3D d0(1.2, 0.1, 0, 0.05, 4.1, 2, 1.5), d1(8.8, 4.2, 0, 1.2, 4, 1.9, 1.5);
  std::mt19937_64 rng(6);
  const Embedding e0 = random_unit(rng, 8), e1 = random_unit(rng, 8), f0 = random_unit(rng, 8),
                  f1 = random_unit(rng, 8);
  const std::vector<TrackCue> tracks{cue(3, p0, q0, e0), cue(7, p1, q1, e1)};
  const std::vector<DetectionRecord> dets{det(d0, f0), det(d1, f1)};

  const auto deep = appearance_affinity({e0, e1}, {f0, f1});
  const auto loc = location_affinity({q0, q1}, {d0, d1}, 10);
  const auto mot = motion_affinity({p0.center(), p1.center()}, {q0.center(), q1.center()},
                                   {d0.center(), d1.center()}, 10);

  AffinityConfig cfg;
  cfg.w_deep = 0.5;
  const auto a = combined_affinity(tracks, dets, cfg);
  EXPECT_EQ(a.track_ids, (std::vector<int64_t>{3, 7}));
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      EXPECT_NEAR(a.values(i, j), 0.5 * deep(i, j) + 0.5 * mot(i, j) * loc(i, j), 1e-12);
    }
  }
  cfg.w_deep = 1.0;
  EXPECT_TRUE(combined_affinity(tracks, dets, cfg).values.isApprox(deep, 1e-14));
  cfg.w_deep = 0.0;
  EXPECT_TRUE(combined_affinity(tracks, dets, cfg).values.isApprox(mot.cwiseProduct(loc), 1e-14));
}

TEST(CombinedAffinity, CategoryMismatchNeverMatches) {
  const Box3D b(0, 0, 0, 0, 1, 1, 1);
  auto d = det(b, unit(4, 0));
  d.category = "pedestrian";
  const auto a = combined_affinity({cue(0, b, b, unit(4, 0))}, {d}, {});
  EXPECT_EQ(a.values(0, 0), kNoMatch);
}

TEST(CombinedAffinity, MissingEmbeddingDropsAppearance) {
  const Box3D b(0, 0, 0, 0, 1, 1, 1), c(0.5, 0, 0, 0, 1, 1, 1);
  DetectionRecord d;
  d.box = c;
  const auto a = combined_affinity({cue(0, b, b, unit(4, 0))}, {d}, {});
  const double expected = motion_affinity({b.center()}, {b.center()}, {c.center()}, 10)(0, 0) *
                          location_affinity({b}, {c}, 10)(0, 0);
  EXPECT_NEAR(a.values(0, 0), expected, 1e-12);
}

}  // namespace
}  // namespace panoptrack
