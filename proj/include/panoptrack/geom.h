#pragma once

#include <array>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace panoptrack {

inline constexpr double kPi = 3.14159265358979323846;

// Wraps an angle into (-pi, pi].
double wrap_angle(double theta);

// Signed difference a - b wrapped into (-pi, pi].
inline double angle_diff(double a, double b) { return wrap_angle(a - b); }

// 7-DoF box: center (x, y, z), yaw about the up axis, extent (l, w, h).
struct Box3D {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double theta = 0.0;
  double l = 1.0;
  double w = 1.0;
  double h = 1.0;

  Box3D() = default;
  Box3D(double x, double y, double z, double theta, double l, double w,
        double h);

  Eigen::Vector3d center() const { return {x, y, z}; }
  double volume() const { return l * w * h; }

  // [x, y, z, theta, l, w, h]
  std::array<double, 7> to_array() const { return {x, y, z, theta, l, w, h}; }
  static Box3D from_array(const std::array<double, 7>& v);

  // Component-wise b - other with the yaw component wrapped.
  Eigen::Matrix<double, 7, 1> minus(const Box3D& other) const;
  // b + delta with the yaw component wrapped.
  Box3D plus(const Eigen::Matrix<double, 7, 1>& delta) const;

  bool operator==(const Box3D&) const = default;
};

using Vector7d = Eigen::Matrix<double, 7, 1>;

// Image-space axis-aligned box in pixels.
struct Box2D {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 1.0;
  double y_max = 1.0;

  double area() const { return (x_max - x_min) * (y_max - y_min); }
  bool operator==(const Box2D&) const = default;
};

// Camera-to-world (or any frame-to-frame) rigid transform.
class RigidTransform {
 public:
  RigidTransform();
  // The quaternion is normalized on construction.
  RigidTransform(const Eigen::Quaterniond& rotation,
                 const Eigen::Vector3d& translation);

  static RigidTransform from_yaw(double yaw, const Eigen::Vector3d& t = {0, 0, 0});

  const Eigen::Quaterniond& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }

  // Rotation angle about the up (z) axis.
  double yaw() const;
  RigidTransform inverse() const;
  Eigen::Vector3d apply(const Eigen::Vector3d& p) const;
  // (this * other)(p) = this(other(p))
  RigidTransform operator*(const RigidTransform& other) const;

 private:
  Eigen::Quaterniond rotation_;
  Eigen::Vector3d translation_;
};

// Moves a box by a rigid transform. Only the up-axis component of the
// rotation is composed into the yaw; poses are expected to be yaw-only.
Box3D transform_box(const Box3D& box, const RigidTransform& pose);

double bev_distance(const Box3D& a, const Box3D& b);

// BEV footprint corners, counter-clockwise.
std::array<Eigen::Vector2d, 4> bev_corners(const Box3D& box);

// Area of the intersection of two convex polygons given counter-clockwise.
double convex_intersection_area(const std::vector<Eigen::Vector2d>& subject,
                                const std::vector<Eigen::Vector2d>& clip);

double iou_3d(const Box3D& a, const Box3D& b);
double iou_2d(const Box2D& a, const Box2D& b);

}  // namespace panoptrack
