#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "panoptrack/fusion.h"
#include "panoptrack/result.h"

namespace panoptrack {

struct CameraSpec {
  double yaw = 0.0;        // radians, world frame relative to the ego heading
  double half_fov = 0.6;   // radians, in (0, pi)
  double max_range = 60.0; // meters
};

// Cameras all sit at the ego origin.
struct RigSpec {
  std::vector<CameraSpec> cameras;

  void validate() const;
  // n cameras spaced evenly around the ego, the first looking forward.
  static RigSpec ring(int n, double half_fov, double max_range = 60.0);
};

struct Waypoint {
  int64_t frame = 0;
  double x = 0.0, y = 0.0, z = 0.0;
};

struct PathSpec {
  enum class Kind { kConstantVelocity, kConstantTurn, kWaypoints };
  Kind kind = Kind::kConstantVelocity;
  // Pose at the object's start frame.
  double x = 0.0, y = 0.0, z = 0.0, heading = 0.0;
  double speed = 0.0;      // m/s along the heading
  double turn_rate = 0.0;  // rad/s, kConstantTurn only
  // Linear interpolation between waypoints; heading follows the segment.
  std::vector<Waypoint> waypoints;
};

struct ObjectSpec {
  int64_t id = 0;
  std::string category = "car";
  double l = 4.5, w = 1.9, h = 1.6;
  PathSpec path;
  int64_t start_frame = 0;
  int64_t end_frame = -1;  // exclusive; -1 runs to the end of the scenario
  // Frames [first, last] in which the object is never detected.
  std::vector<std::pair<int64_t, int64_t>> hidden;
};

struct NoiseSpec {
  double sigma0 = 0.0;        // center noise at zero range, meters
  double sigma_slope = 0.0;   // extra center noise per meter of range
  double sigma_theta = 0.0;
  double sigma_dim = 0.0;
  double dropout = 0.0;
  double truncation_margin = 0.0;      // radians from a FOV border
  double truncation_multiplier = 1.0;  // noise scale inside that margin
  double embedding_sigma = 0.0;
};

struct EgoSpec {
  double vx = 0.0, vy = 0.0;  // m/s in the world frame
  double yaw_rate = 0.0;      // rad/s
};

struct ScenarioSpec {
  std::string name;
  int64_t frames = 20;
  double frame_rate = 2.0;
  EgoSpec ego;
  std::vector<ObjectSpec> objects;
  NoiseSpec noise;
  uint64_t seed = 0;

  void validate() const;
};

struct SimOutput {
  GroundTruth gt;
  std::vector<FrameBundle> frames;
};

// Detections are in camera frame; every camera gets a pose every frame.
SimOutput generate(const ScenarioSpec& scenario, const RigSpec& rig);

struct BuiltinScenario {
  ScenarioSpec scenario;
  RigSpec rig;
};

// zero_noise, boundary_crossing, overlap_duplicate, occlusion_gap, crowd,
// constant_velocity_train.
std::vector<BuiltinScenario> builtin_scenarios();
// Throws ArgumentError for an unknown name.
BuiltinScenario builtin_scenario(const std::string& name);

}  // namespace panoptrack
