#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "panoptrack/learn.h"

namespace panoptrack::fixture {

// A noisy constant-velocity trajectory window. Every third step after the
// first is a gap when `gaps` is set.
inline TrajectorySample random_window(std::mt19937_64& rng, int window, bool gaps = true) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> conf(0.3, 1.0);
  TrajectorySample s;
  s.object_id = 1;
  s.category = "car";
  Box3D b(10 * n(rng), 10 * n(rng), 0.2 * n(rng), n(rng), 4.5, 1.9, 1.6);
  Vector7d v = Vector7d::Zero();
  v[0] = 0.5 * n(rng);
  v[1] = 0.5 * n(rng);
  v[3] = 0.02 * n(rng);
  for (int k = 0; k < window; ++k) {
    TrajectoryStep st;
    st.frame = k;
    st.gt_box = b;
    if (k == 0 || !gaps || k % 3 != 2) {
      DetectionRecord d;
      d.box = Box3D(b.x + 0.1 * n(rng), b.y + 0.1 * n(rng), b.z + 0.05 * n(rng),
                    b.theta + 0.02 * n(rng), b.l + 0.05 * n(rng), b.w + 0.05 * n(rng),
                    b.h + 0.05 * n(rng));
      d.confidence = conf(rng);
      d.frame = k;
      st.detection = d;
    }
    s.steps.push_back(st);
    b = b.plus(v);
  }
  return s;
}

// Fourth-order central difference of f around 0. A step of 1e-4 keeps the
// truncation error far below the round-off of a loss summed over many terms.
template <class F>
double five_point(F&& f, double h = 1e-4) {
  return (8.0 * (f(h) - f(-h)) - (f(2 * h) - f(-2 * h))) / (12.0 * h);
}

// Denominator floor for relative gradient errors: finite differences cannot
// resolve components much below the loss's own round-off.
inline double gradient_floor(double loss) { return 1e-6 * std::max(1.0, std::abs(loss)); }

}  // namespace panoptrack::fixture
