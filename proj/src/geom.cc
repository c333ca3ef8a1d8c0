#include "panoptrack/geom.h"

#include <algorithm>
#include <cmath>

namespace panoptrack {

double wrap_angle(double theta) {
  constexpr double kTwoPi = 2.0 * kPi;
  double r = std::fmod(theta + kPi, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  double out = r - kPi;
  // fmod lands on [-pi, pi); the closed end belongs to +pi.
  if (out <= -kPi) out = kPi;
  return out;
}

Box3D::Box3D(double x, double y, double z, double theta, double l, double w,
             double h)
    : x(x), y(y), z(z), theta(wrap_angle(theta)), l(l), w(w), h(h) {}

Box3D Box3D::from_array(const std::array<double, 7>& v) {
  return Box3D(v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
}

Vector7d Box3D::minus(const Box3D& o) const {
  Vector7d d;
  d << x - o.x, y - o.y, z - o.z, angle_diff(theta, o.theta), l - o.l,
      w - o.w, h - o.h;
  return d;
}

Box3D Box3D::plus(const Vector7d& d) const {
  return Box3D(x + d[0], y + d[1], z + d[2], theta + d[3], l + d[4], w + d[5],
               h + d[6]);
}

RigidTransform::RigidTransform()
    : rotation_(Eigen::Quaterniond::Identity()),
      translation_(Eigen::Vector3d::Zero()) {}

RigidTransform::RigidTransform(const Eigen::Quaterniond& rotation,
                               const Eigen::Vector3d& translation)
    : rotation_(rotation.normalized()), translation_(translation) {}

RigidTransform RigidTransform::from_yaw(double yaw, const Eigen::Vector3d& t) {
  return RigidTransform(
      Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ())), t);
}

double RigidTransform::yaw() const {
  const auto& q = rotation_;
  return std::atan2(2.0 * (q.w() * q.z() + q.x() * q.y()),
                    1.0 - 2.0 * (q.y() * q.y() + q.z() * q.z()));
}

RigidTransform RigidTransform::inverse() const {
  const Eigen::Quaterniond inv = rotation_.conjugate();
  return RigidTransform(inv, -(inv * translation_));
}

Eigen::Vector3d RigidTransform::apply(const Eigen::Vector3d& p) const {
  return rotation_ * p + translation_;
}

RigidTransform RigidTransform::operator*(const RigidTransform& other) const {
  return RigidTransform(rotation_ * other.rotation_,
                        rotation_ * other.translation_ + translation_);
}

Box3D transform_box(const Box3D& box, const RigidTransform& pose) {
  const Eigen::Vector3d c = pose.apply(box.center());
  return Box3D(c.x(), c.y(), c.z(), box.theta + pose.yaw(), box.l, box.w,
               box.h);
}

double bev_distance(const Box3D& a, const Box3D& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

std::array<Eigen::Vector2d, 4> bev_corners(const Box3D& box) {
  const double c = std::cos(box.theta);
  const double s = std::sin(box.theta);
  const double hl = 0.5 * box.l;
  const double hw = 0.5 * box.w;
  const std::array<Eigen::Vector2d, 4> local = {
      Eigen::Vector2d(hl, hw), Eigen::Vector2d(-hl, hw),
      Eigen::Vector2d(-hl, -hw), Eigen::Vector2d(hl, -hw)};
  std::array<Eigen::Vector2d, 4> out;
  for (size_t i = 0; i < 4; ++i) {
    out[i] = Eigen::Vector2d(box.x + c * local[i].x() - s * local[i].y(),
                             box.y + s * local[i].x() + c * local[i].y());
  }
  return out;
}

namespace {

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

double polygon_area(const std::vector<Eigen::Vector2d>& poly) {
  if (poly.size() < 3) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < poly.size(); ++i) {
    acc += cross(poly[i], poly[(i + 1) % poly.size()]);
  }
  return 0.5 * std::abs(acc);
}

}  // namespace

// Sutherland-Hodgman: clip the subject against every edge of the clip polygon.
double convex_intersection_area(const std::vector<Eigen::Vector2d>& subject,
                                const std::vector<Eigen::Vector2d>& clip) {
  std::vector<Eigen::Vector2d> output = subject;
  for (size_t e = 0; e < clip.size() && !output.empty(); ++e) {
    const Eigen::Vector2d& a = clip[e];
    const Eigen::Vector2d& b = clip[(e + 1) % clip.size()];
    const Eigen::Vector2d edge = b - a;
    std::vector<Eigen::Vector2d> input;
    input.swap(output);
    for (size_t i = 0; i < input.size(); ++i) {
      const Eigen::Vector2d& cur = input[i];
      const Eigen::Vector2d& prev = input[(i + input.size() - 1) % input.size()];
      const double side_cur = cross(edge, cur - a);
      const double side_prev = cross(edge, prev - a);
      if (side_cur >= 0.0) {
        if (side_prev < 0.0) {
          const double t = side_prev / (side_prev - side_cur);
          output.push_back(prev + t * (cur - prev));
        }
        output.push_back(cur);
      } else if (side_prev >= 0.0) {
        const double t = side_prev / (side_prev - side_cur);
        output.push_back(prev + t * (cur - prev));
      }
    }
  }
  return polygon_area(output);
}

double iou_3d(const Box3D& a_in, const Box3D& b_in) {
  // Evaluate in a canonical argument order so the result is exactly symmetric.
  const bool swap = b_in.to_array() < a_in.to_array();
  const Box3D& a = swap ? b_in : a_in;
  const Box3D& b = swap ? a_in : b_in;

  const double z_low = std::max(a.z - 0.5 * a.h, b.z - 0.5 * b.h);
  const double z_high = std::min(a.z + 0.5 * a.h, b.z + 0.5 * b.h);
  const double dz = z_high - z_low;
  if (dz <= 0.0) return 0.0;

  // Bounding-circle rejection.
  const double ra = 0.5 * std::hypot(a.l, a.w);
  const double rb = 0.5 * std::hypot(b.l, b.w);
  if (bev_distance(a, b) >= ra + rb) return 0.0;

  const auto ca = bev_corners(a);
  const auto cb = bev_corners(b);
  const double area = convex_intersection_area({ca.begin(), ca.end()},
                                               {cb.begin(), cb.end()});
  const double inter = area * dz;
  if (inter <= 0.0) return 0.0;
  const double uni = a.volume() + b.volume() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou_2d(const Box2D& a, const Box2D& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

}  // namespace panoptrack
