#include "panoptrack/sim.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "panoptrack/error.h"

namespace panoptrack {

namespace {

enum Stream : uint64_t { kDropout = 1, kCenter, kShape, kEmbedding, kLatent, kLayout, kConfidence };

uint64_t splitmix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Distributions are written out by hand: the standard ones are not
// bit-identical across library implementations.
class KeyedRng {
 public:
  KeyedRng(uint64_t seed, int64_t frame, int64_t camera, int64_t object, Stream stream) {
    uint64_t h = splitmix(seed);
    for (uint64_t v : {uint64_t(frame), uint64_t(camera), uint64_t(object), uint64_t(stream)}) {
      h = splitmix(h ^ v);
    }
    gen_.seed(h);
  }

  // [0, 1)
  double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * kPi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * kPi * u2);
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

Embedding unit_gaussian(KeyedRng& rng, double scale, const Embedding* base) {
  Embedding e(kEmbeddingDim);
  for (int i = 0; i < kEmbeddingDim; ++i) e[i] = scale * rng.normal();
  if (base != nullptr) e += *base;
  return e / e.norm();
}

Box3D object_box(const ObjectSpec& o, int64_t frame, double dt) {
  const PathSpec& p = o.path;
  const double tau = double(frame - o.start_frame) * dt;
  double x = p.x, y = p.y, z = p.z, heading = p.heading;
  switch (p.kind) {
    case PathSpec::Kind::kConstantVelocity:
      x += p.speed * std::cos(heading) * tau;
      y += p.speed * std::sin(heading) * tau;
      break;
    case PathSpec::Kind::kConstantTurn:
      if (p.turn_rate == 0.0) {
        x += p.speed * std::cos(heading) * tau;
        y += p.speed * std::sin(heading) * tau;
      } else {
        const double h1 = p.heading + p.turn_rate * tau;
        const double rad = p.speed / p.turn_rate;
        x += rad * (std::sin(h1) - std::sin(p.heading));
        y -= rad * (std::cos(h1) - std::cos(p.heading));
        heading = h1;
      }
      break;
    case PathSpec::Kind::kWaypoints: {
      const auto& wp = p.waypoints;
      size_t k = 0;
      while (k + 2 < wp.size() && wp[k + 1].frame <= frame) ++k;
      const Waypoint& a = wp[k];
      const Waypoint& b = wp.size() > 1 ? wp[k + 1] : wp[k];
      double s = 0.0;
      if (b.frame != a.frame) s = std::clamp(double(frame - a.frame) / double(b.frame - a.frame), 0.0, 1.0);
      x = a.x + s * (b.x - a.x);
      y = a.y + s * (b.y - a.y);
      z = a.z + s * (b.z - a.z);
      if (b.x != a.x || b.y != a.y) heading = std::atan2(b.y - a.y, b.x - a.x);
      break;
    }
  }
  return Box3D(x, y, z, heading, o.l, o.w, o.h);
}

bool alive(const ObjectSpec& o, int64_t frame, int64_t frames) {
  const int64_t end = o.end_frame < 0 ? frames : o.end_frame;
  return frame >= o.start_frame && frame < end;
}

bool hidden(const ObjectSpec& o, int64_t frame) {
  for (const auto& [a, b] : o.hidden) {
    if (frame >= a && frame <= b) return true;
  }
  return false;
}

ObjectSpec car(int64_t id, double x, double y, double heading, double speed) {
  ObjectSpec o;
  o.id = id;
  o.path.x = x;
  o.path.y = y;
  o.path.heading = heading;
  o.path.speed = speed;
  return o;
}

NoiseSpec moderate_noise() {
  NoiseSpec n;
  n.sigma0 = 0.1;
  n.sigma_slope = 0.005;
  n.sigma_theta = 0.02;
  n.sigma_dim = 0.03;
  n.truncation_margin = 0.05;
  n.truncation_multiplier = 2.0;
  n.embedding_sigma = 0.02;
  return n;
}

}  // namespace

void RigSpec::validate() const {
  if (cameras.empty()) throw ArgumentError("rig has no cameras");
  for (const auto& c : cameras) {
    if (!(c.half_fov > 0.0 && c.half_fov < kPi)) {
      throw ArgumentError("camera half FOV must lie in (0, pi)");
    }
    if (!(c.max_range > 0.0)) throw ArgumentError("camera range must be positive");
    if (!std::isfinite(c.yaw)) throw ArgumentError("camera yaw must be finite");
  }
}

RigSpec RigSpec::ring(int n, double half_fov, double max_range) {
  RigSpec rig;
  for (int i = 0; i < n; ++i) {
    rig.cameras.push_back({wrap_angle(2.0 * kPi * i / n), half_fov, max_range});
  }
  return rig;
}

void ScenarioSpec::validate() const {
  if (frames < 1) throw ArgumentError("scenario needs at least one frame");
  if (!(frame_rate > 0.0)) throw ArgumentError("frame_rate must be positive");
  const NoiseSpec& n = noise;
  for (double s : {n.sigma0, n.sigma_slope, n.sigma_theta, n.sigma_dim, n.truncation_margin,
                   n.embedding_sigma}) {
    if (!(s >= 0.0)) throw ArgumentError("noise parameters must be >= 0");
  }
  if (!(n.truncation_multiplier >= 0.0)) throw ArgumentError("truncation multiplier must be >= 0");
  if (!(n.dropout >= 0.0 && n.dropout < 1.0)) throw ArgumentError("dropout must lie in [0, 1)");
  for (const auto& o : objects) {
    if (!(o.l > 0.0 && o.w > 0.0 && o.h > 0.0)) {
      throw ArgumentError("object " + std::to_string(o.id) + " needs positive dimensions");
    }
    if (o.path.kind == PathSpec::Kind::kWaypoints) {
      if (o.path.waypoints.empty()) {
        throw ArgumentError("object " + std::to_string(o.id) + " has no waypoints");
      }
      for (size_t i = 1; i < o.path.waypoints.size(); ++i) {
        if (o.path.waypoints[i].frame <= o.path.waypoints[i - 1].frame) {
          throw ArgumentError("waypoint frames must increase");
        }
      }
    }
  }
  for (size_t i = 0; i < objects.size(); ++i) {
    for (size_t j = i + 1; j < objects.size(); ++j) {
      if (objects[i].id == objects[j].id) {
        throw ArgumentError("duplicate object id " + std::to_string(objects[i].id));
      }
    }
  }
}

SimOutput generate(const ScenarioSpec& scenario, const RigSpec& rig) {
  scenario.validate();
  rig.validate();
  const double dt = 1.0 / scenario.frame_rate;
  const NoiseSpec& noise = scenario.noise;
  double coverage = 0.0;
  for (const auto& c : rig.cameras) coverage = std::max(coverage, c.max_range);

  std::vector<Embedding> latents;
  for (const auto& o : scenario.objects) {
    KeyedRng rng(scenario.seed, -1, -1, o.id, kLatent);
    latents.push_back(unit_gaussian(rng, 1.0, nullptr));
  }

  SimOutput out;
  for (int64_t t = 0; t < scenario.frames; ++t) {
    const double time = double(t) * dt;
    const Eigen::Vector3d ego(scenario.ego.vx * time, scenario.ego.vy * time, 0.0);
    const double ego_yaw = scenario.ego.yaw_rate * time;

    FrameBundle bundle;
    bundle.frame = t;
    std::vector<RigidTransform> to_camera;
    for (size_t c = 0; c < rig.cameras.size(); ++c) {
      const RigidTransform pose = RigidTransform::from_yaw(ego_yaw + rig.cameras[c].yaw, ego);
      bundle.poses[int(c)] = pose;
      bundle.detections[int(c)];
      to_camera.push_back(pose.inverse());
    }

    auto& gts = out.gt.frames[t];
    for (size_t oi = 0; oi < scenario.objects.size(); ++oi) {
      const ObjectSpec& o = scenario.objects[oi];
      if (!alive(o, t, scenario.frames)) continue;
      const Box3D world = object_box(o, t, dt);
      if (std::hypot(world.x - ego.x(), world.y - ego.y()) > coverage) continue;
      gts.push_back({o.id, world, o.category});
      if (hidden(o, t)) continue;

      for (size_t c = 0; c < rig.cameras.size(); ++c) {
        const CameraSpec& cam = rig.cameras[c];
        const Box3D local = transform_box(world, to_camera[c]);
        const double bearing = std::atan2(local.y, local.x);
        const double range = std::hypot(local.x, local.y);
        if (std::abs(bearing) > cam.half_fov || range > cam.max_range) continue;

        KeyedRng drop(scenario.seed, t, int64_t(c), o.id, kDropout);
        if (drop.uniform() < noise.dropout) continue;

        const bool truncated = cam.half_fov - std::abs(bearing) < noise.truncation_margin;
        const double sigma = noise.sigma0 + noise.sigma_slope * range;
        const double sigma_eff = sigma * (truncated ? noise.truncation_multiplier : 1.0);

        KeyedRng center(scenario.seed, t, int64_t(c), o.id, kCenter);
        const double magnitude = std::abs(center.normal()) * sigma_eff;
        Eigen::Vector3d dir(center.normal(), center.normal(), center.normal());
        dir = dir.norm() > 0.0 ? Eigen::Vector3d(dir / dir.norm()) : Eigen::Vector3d::UnitX();
        const Eigen::Vector3d offset = magnitude * dir;

        KeyedRng shape(scenario.seed, t, int64_t(c), o.id, kShape);
        const double d_theta = noise.sigma_theta * shape.normal();
        const double d_l = noise.sigma_dim * shape.normal();
        const double d_w = noise.sigma_dim * shape.normal();
        const double d_h = noise.sigma_dim * shape.normal();

        DetectionRecord det;
        if (magnitude == 0.0 && d_theta == 0.0 && d_l == 0.0 && d_w == 0.0 && d_h == 0.0) {
          det.box = local;
        } else {
          det.box = Box3D(local.x + offset.x(), local.y + offset.y(), local.z + offset.z(),
                          local.theta + d_theta, std::max(0.1, local.l + d_l),
                          std::max(0.1, local.w + d_w), std::max(0.1, local.h + d_h));
        }
        // The score reflects how hard the view is (range, truncation) plus its own
        // jitter, never the realised error, so it cannot leak the noise draw.
        double score = 1.0 - (truncated ? 0.1 : 0.0);
        if (sigma > 0.0) {
          KeyedRng conf(scenario.seed, t, int64_t(c), o.id, kConfidence);
          score += -0.3 * range / cam.max_range + 0.05 * conf.normal();
        }
        det.confidence = std::clamp(score, 0.05, 1.0);
        KeyedRng emb(scenario.seed, t, int64_t(c), o.id, kEmbedding);
        det.embedding = noise.embedding_sigma > 0.0
                            ? unit_gaussian(emb, noise.embedding_sigma, &latents[oi])
                            : latents[oi];
        det.camera_id = int(c);
        det.frame = t;
        det.category = o.category;
        bundle.detections[int(c)].push_back(std::move(det));
      }
    }
    out.frames.push_back(std::move(bundle));
  }
  return out;
}

std::vector<BuiltinScenario> builtin_scenarios() {
  std::vector<BuiltinScenario> all;

  {
    // Perfect detections; neighbouring wedges overlap slightly so no bearing
    // falls between cameras through rounding.
    BuiltinScenario b;
    b.scenario.name = "zero_noise";
    b.scenario.frames = 20;
    b.scenario.seed = 1;
    b.scenario.objects = {car(0, 10.0, 0.0, kPi / 2, 3.0), car(1, -15.0, 5.0, 0.0, 2.0),
                          car(2, 0.0, -20.0, kPi / 4, 2.0), car(3, 20.0, -20.0, kPi, 4.0)};
    b.rig = RigSpec::ring(6, kPi / 6 + 0.01);
    all.push_back(std::move(b));
  }
  {
    // One object crossing from camera 0 into camera 1 through a narrow gap.
    BuiltinScenario b;
    b.scenario.name = "boundary_crossing";
    b.scenario.frames = 30;
    b.scenario.seed = 2;
    b.scenario.noise = moderate_noise();
    b.scenario.objects = {car(0, 12.0, -4.0, kPi / 2, 2.0)};
    b.rig = RigSpec::ring(6, 0.5);
    all.push_back(std::move(b));
  }
  {
    BuiltinScenario b;
    b.scenario.name = "overlap_duplicate";
    b.scenario.frames = 20;
    b.scenario.seed = 3;
    b.scenario.noise = moderate_noise();
    b.scenario.objects = {car(0, 18.0, 3.0, kPi / 2, 1.0)};
    b.rig.cameras = {{0.0, 0.5, 60.0}, {0.6, 0.5, 60.0}};
    all.push_back(std::move(b));
  }
  {
    BuiltinScenario b;
    b.scenario.name = "occlusion_gap";
    b.scenario.frames = 25;
    b.scenario.seed = 4;
    b.scenario.noise = moderate_noise();
    ObjectSpec o = car(0, 15.0, 0.0, kPi / 2, 2.0);
    o.hidden = {{8, 10}};
    b.scenario.objects = {o};
    b.rig = RigSpec::ring(6, kPi / 6);
    all.push_back(std::move(b));
  }
  {
    // Eight cars; two opposing pairs pass each other 3 m apart.
    BuiltinScenario b;
    b.scenario.name = "crowd";
    b.scenario.frames = 80;
    b.scenario.frame_rate = 4.0;
    b.scenario.seed = 5;
    b.scenario.noise = moderate_noise();
    b.scenario.noise.embedding_sigma = 0.05;
    b.scenario.noise.dropout = 0.05;
    b.scenario.objects = {car(0, 8.0, -20.0, kPi / 2, 2.0),    car(1, 11.0, 20.0, -kPi / 2, 2.0),
                          car(2, -10.0, -15.0, kPi / 2, 1.5),  car(3, -13.0, 15.0, -kPi / 2, 1.5),
                          car(4, 25.0, 5.0, kPi, 1.0),         car(5, -20.0, -25.0, 0.3, 2.0),
                          car(6, 0.0, 30.0, 0.0, 1.5),         car(7, -30.0, 0.0, -kPi / 2, 1.0)};
    b.rig = RigSpec::ring(6, 35.0 * kPi / 180.0);
    all.push_back(std::move(b));
  }
  {
    // Many short straight tracks with staggered starts.
    BuiltinScenario b;
    b.scenario.name = "constant_velocity_train";
    b.scenario.seed = 6;
    b.scenario.frame_rate = 4.0;
    b.scenario.noise = moderate_noise();
    b.scenario.noise.dropout = 0.05;
    constexpr int kTracks = 200;
    constexpr int kLength = 20;
    b.scenario.frames = kTracks + kLength;
    for (int i = 0; i < kTracks; ++i) {
      KeyedRng rng(b.scenario.seed, -1, -1, i, kLayout);
      const double bearing = 2.0 * kPi * rng.uniform();
      const double dist = 8.0 + 32.0 * rng.uniform();
      ObjectSpec o = car(i, dist * std::cos(bearing), dist * std::sin(bearing),
                         wrap_angle(2.0 * kPi * rng.uniform()), 3.0 * rng.uniform());
      o.start_frame = i;
      o.end_frame = i + kLength;
      b.scenario.objects.push_back(o);
    }
    b.rig = RigSpec::ring(6, 35.0 * kPi / 180.0);
    all.push_back(std::move(b));
  }
  return all;
}

BuiltinScenario builtin_scenario(const std::string& name) {
  for (auto& b : builtin_scenarios()) {
    if (b.scenario.name == name) return b;
  }
  throw ArgumentError("unknown builtin scenario '" + name + "'");
}

}  // namespace panoptrack
