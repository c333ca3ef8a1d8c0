#include <Eigen/Cholesky>

#include "panoptrack/error.h"
#include "panoptrack/motion.h"

namespace panoptrack {

namespace {

KfMatrix transition() {
  KfMatrix f = KfMatrix::Identity();
  for (int i = 0; i < 4; ++i) f(i, 7 + i) = 1.0;
  return f;
}

Eigen::Matrix<double, 7, 11> measurement() {
  Eigen::Matrix<double, 7, 11> h = Eigen::Matrix<double, 7, 11>::Zero();
  h.leftCols<7>().setIdentity();
  return h;
}

bool is_pd(const KfMatrix& p) {
  Eigen::LLT<KfMatrix> llt(p);
  return llt.info() == Eigen::Success && (p.diagonal().array() > 0.0).all();
}

}  // namespace

KfState KfState::from_box(const Box3D& box, const KfParams& params) {
  KfState s;
  const auto b = box.to_array();
  for (int i = 0; i < 7; ++i) s.mean(i) = b[i];
  s.covariance.setZero();
  s.covariance.diagonal().head<7>().setConstant(params.p0_box);
  s.covariance.diagonal().tail<4>().setConstant(params.p0_velocity);
  return s;
}

Box3D KfState::box() const {
  return Box3D(mean(0), mean(1), mean(2), mean(3), mean(4), mean(5), mean(6));
}

KfState kf_predict(const KfState& state, const KfParams& params) {
  static const KfMatrix f = transition();
  KfMatrix q = KfMatrix::Zero();
  q.diagonal().head<7>().setConstant(params.q_box);
  q.diagonal().tail<4>().setConstant(params.q_velocity);

  KfState out;
  out.mean = f * state.mean;
  out.mean(3) = wrap_angle(out.mean(3));
  const KfMatrix p = f * state.covariance * f.transpose() + q;
  out.covariance = 0.5 * (p + p.transpose());
  return out;
}

KfState kf_update(const KfState& state, const Box3D& observation, double confidence,
                  const KfParams& params) {
  static const Eigen::Matrix<double, 7, 11> h = measurement();
  Eigen::Matrix<double, 7, 7> r = Eigen::Matrix<double, 7, 7>::Zero();
  r.diagonal().setConstant(params.r_box);
  r(3, 3) = params.r_theta;
  r *= (1.0 - confidence + params.epsilon);

  Vector7d innovation = observation.minus(state.box());
  // minus() wraps yaw; the remaining components are plain differences.
  const Eigen::Matrix<double, 7, 7> s = h * state.covariance * h.transpose() + r;
  const Eigen::Matrix<double, 11, 7> k =
      state.covariance * h.transpose() * s.ldlt().solve(Eigen::Matrix<double, 7, 7>::Identity());

  KfState out;
  out.mean = state.mean + k * innovation;
  out.mean(3) = wrap_angle(out.mean(3));
  // Joseph form keeps the covariance symmetric positive semi-definite.
  const KfMatrix ikh = KfMatrix::Identity() - k * h;
  const KfMatrix p = ikh * state.covariance * ikh.transpose() + k * r * k.transpose();
  out.covariance = 0.5 * (p + p.transpose());
  if (!is_pd(out.covariance)) {
    out.covariance.diagonal().array() += 1e-9;
    if (!is_pd(out.covariance)) {
      throw NumericError("kf_update: covariance is not positive definite after update");
    }
  }
  return out;
}

}  // namespace panoptrack
