#include "panoptrack/io.h"

#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "panoptrack/error.h"

namespace panoptrack {

namespace {

using Json = nlohmann::ordered_json;

// Calls f(json, line_number) for each non-blank line.
template <class F>
void for_each_record(std::istream& in, F&& f) {
  std::string line;
  long n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      throw InputError("line " + std::to_string(n) + ": invalid JSON (" + e.what() + ")", n);
    }
    if (!j.is_object()) throw InputError("line " + std::to_string(n) + ": expected an object", n);
    try {
      f(j, n);
    } catch (const InputError&) {
      throw;
    } catch (const std::exception& e) {
      throw InputError("line " + std::to_string(n) + ": " + e.what(), n);
    }
  }
}

[[noreturn]] void bad(long line, const std::string& msg) {
  throw InputError("line " + std::to_string(line) + ": " + msg, line);
}

const Json& field(const Json& j, const char* key, long line) {
  auto it = j.find(key);
  if (it == j.end()) bad(line, std::string("missing field '") + key + "'");
  return *it;
}

double number(const Json& v, const std::string& what, long line) {
  if (!v.is_number()) bad(line, what + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) bad(line, what + " must be finite");
  return x;
}

int64_t integer(const Json& j, const char* key, long line) {
  const Json& v = field(j, key, line);
  if (!v.is_number_integer()) bad(line, std::string("'") + key + "' must be an integer");
  return v.get<int64_t>();
}

std::string text(const Json& j, const char* key, long line) {
  const Json& v = field(j, key, line);
  if (!v.is_string()) bad(line, std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> numbers(const Json& v, size_t n, const char* key, long line) {
  if (!v.is_array() || (n > 0 && v.size() != n)) {
    bad(line, std::string("'") + key + "' must be an array of " + std::to_string(n) + " numbers");
  }
  std::vector<double> out;
  for (const auto& x : v) out.push_back(number(x, std::string("'") + key + "' entry", line));
  return out;
}

Box3D box_of(const Json& j, long line) {
  const auto v = numbers(field(j, "box", line), 7, "box", line);
  if (!(v[4] > 0.0 && v[5] > 0.0 && v[6] > 0.0)) bad(line, "box dimensions must be positive");
  return Box3D(v[0], v[1], v[2], v[3], v[4], v[5], v[6]);
}

double score_of(const Json& j, long line) {
  const double s = number(field(j, "score", line), "'score'", line);
  if (s < 0.0 || s > 1.0) bad(line, "'score' must lie in [0, 1]");
  return s;
}

Json box_json(const Box3D& b) { return Json::array({b.x, b.y, b.z, b.theta, b.l, b.w, b.h}); }

void emit(std::ostream& out, const Json& j) { out << j.dump() << '\n'; }

}  // namespace

std::vector<DetectionRecord> read_detections(std::istream& in) {
  std::vector<DetectionRecord> out;
  for_each_record(in, [&](const Json& j, long line) {
    DetectionRecord d;
    d.frame = integer(j, "frame", line);
    d.camera_id = static_cast<int>(integer(j, "camera_id", line));
    d.category = text(j, "category", line);
    d.box = box_of(j, line);
    d.confidence = score_of(j, line);
    if (auto it = j.find("embedding"); it != j.end() && !it->is_null()) {
      const auto v = numbers(*it, 0, "embedding", line);
      if (v.empty()) bad(line, "'embedding' must not be empty");
      Embedding e = Eigen::Map<const Eigen::VectorXd>(v.data(), Eigen::Index(v.size()));
      if (e.norm() == 0.0) bad(line, "'embedding' must be nonzero");
      d.embedding = std::move(e);
    }
    if (auto it = j.find("box2d"); it != j.end() && !it->is_null()) {
      const auto v = numbers(*it, 4, "box2d", line);
      d.box2d = Box2D{v[0], v[1], v[2], v[3]};
    }
    out.push_back(std::move(d));
  });
  return out;
}

std::vector<PoseRecord> read_poses(std::istream& in) {
  std::vector<PoseRecord> out;
  for_each_record(in, [&](const Json& j, long line) {
    PoseRecord p;
    p.frame = integer(j, "frame", line);
    p.camera_id = static_cast<int>(integer(j, "camera_id", line));
    const auto q = numbers(field(j, "rotation", line), 4, "rotation", line);
    const auto t = numbers(field(j, "translation", line), 3, "translation", line);
    const Eigen::Quaterniond rot(q[0], q[1], q[2], q[3]);
    if (rot.norm() == 0.0) bad(line, "'rotation' must be a nonzero quaternion");
    p.pose = RigidTransform(rot, Eigen::Vector3d(t[0], t[1], t[2]));
    out.push_back(p);
  });
  return out;
}

GroundTruth read_ground_truth(std::istream& in) {
  GroundTruth gt;
  for_each_record(in, [&](const Json& j, long line) {
    GroundTruthObject g;
    const int64_t frame = integer(j, "frame", line);
    g.object_id = integer(j, "object_id", line);
    g.category = text(j, "category", line);
    g.box = box_of(j, line);
    auto& objs = gt.frames[frame];
    for (const auto& o : objs) {
      if (o.object_id == g.object_id) bad(line, "duplicate object_id in frame");
    }
    objs.push_back(std::move(g));
  });
  return gt;
}

TrackingResult read_result(std::istream& in) {
  TrackingResult r;
  for_each_record(in, [&](const Json& j, long line) {
    TrackedObject t;
    const int64_t frame = integer(j, "frame", line);
    t.track_id = integer(j, "track_id", line);
    t.category = text(j, "category", line);
    t.box = box_of(j, line);
    t.confidence = score_of(j, line);
    r.frames[frame].push_back(std::move(t));
  });
  return r;
}

void write_detections(const std::vector<FrameBundle>& frames, std::ostream& out) {
  for (const auto& b : frames) {
    for (const auto& [cam, dets] : b.detections) {
      for (const auto& d : dets) {
        Json j;
        j["frame"] = b.frame;
        j["camera_id"] = cam;
        j["category"] = d.category;
        j["box"] = box_json(d.box);
        j["score"] = d.confidence;
        if (d.embedding) {
          j["embedding"] = std::vector<double>(d.embedding->data(),
                                               d.embedding->data() + d.embedding->size());
        }
        if (d.box2d) {
          j["box2d"] = Json::array({d.box2d->x_min, d.box2d->y_min, d.box2d->x_max, d.box2d->y_max});
        }
        emit(out, j);
      }
    }
  }
}

void write_poses(const std::vector<FrameBundle>& frames, std::ostream& out) {
  for (const auto& b : frames) {
    for (const auto& [cam, pose] : b.poses) {
      const auto& q = pose.rotation();
      const auto& t = pose.translation();
      Json j;
      j["frame"] = b.frame;
      j["camera_id"] = cam;
      j["rotation"] = Json::array({q.w(), q.x(), q.y(), q.z()});
      j["translation"] = Json::array({t.x(), t.y(), t.z()});
      emit(out, j);
    }
  }
}

void write_ground_truth(const GroundTruth& gt, std::ostream& out) {
  for (const auto& [frame, objs] : gt.frames) {
    for (const auto& g : objs) {
      Json j;
      j["frame"] = frame;
      j["object_id"] = g.object_id;
      j["category"] = g.category;
      j["box"] = box_json(g.box);
      emit(out, j);
    }
  }
}

void write_result(const TrackingResult& result, std::ostream& out) {
  for (const auto& [frame, objs] : result.frames) {
    for (const auto& t : objs) {
      Json j;
      j["frame"] = frame;
      j["track_id"] = t.track_id;
      j["category"] = t.category;
      j["box"] = box_json(t.box);
      j["score"] = t.confidence;
      emit(out, j);
    }
  }
}

std::vector<FrameBundle> assemble_frames(const std::vector<DetectionRecord>& detections,
                                         const std::vector<PoseRecord>& poses) {
  std::map<int64_t, FrameBundle> by_frame;
  for (const auto& p : poses) {
    FrameBundle& b = by_frame[p.frame];
    b.frame = p.frame;
    if (!b.poses.emplace(p.camera_id, p.pose).second) {
      throw InputError("duplicate pose for camera " + std::to_string(p.camera_id) +
                       " at frame " + std::to_string(p.frame));
    }
  }
  for (const auto& d : detections) {
    FrameBundle& b = by_frame[d.frame];
    b.frame = d.frame;
    if (!b.poses.count(d.camera_id)) {
      throw InputError("missing pose for camera " + std::to_string(d.camera_id) + " at frame " +
                       std::to_string(d.frame));
    }
    b.detections[d.camera_id].push_back(d);
  }
  std::vector<FrameBundle> out;
  for (auto& [f, b] : by_frame) {
    for (const auto& [cam, pose] : b.poses) b.detections[cam];
    out.push_back(std::move(b));
  }
  return out;
}

DetectionsByFrame merged_world_detections(const std::vector<FrameBundle>& frames,
                                          const NmsOptions& nms) {
  DetectionsByFrame out;
  for (const auto& b : frames) out[b.frame] = nms_3d(lift_frame(b), nms);
  return out;
}

std::string report_json(const MetricReport& report) {
  Json j;
  j["matcher"] = report.matcher;
  j["n_points"] = report.n_points;
  j["amota"] = report.amota;
  j["amotp"] = report.amotp;
  j["recall"] = report.recall;
  j["mota"] = report.mota;
  j["ids"] = report.ids;
  j["fp"] = report.fp;
  j["fn"] = report.fn;
  Json cats = Json::array();
  for (const auto& c : report.categories) {
    Json cj;
    cj["category"] = c.category;
    cj["amota"] = c.amota;
    cj["amotp"] = c.amotp;
    cj["recall"] = c.recall;
    cj["mota"] = c.mota;
    cj["ids"] = c.ids;
    cj["fp"] = c.fp;
    cj["fn"] = c.fn;
    cj["num_gt"] = c.num_gt;
    cj["unreachable_points"] = c.unreachable_points;
    cats.push_back(std::move(cj));
  }
  j["categories"] = std::move(cats);
  return j.dump(2) + "\n";
}

std::string curves_csv(const MetricReport& report) {
  std::ostringstream os;
  os << "category,target_recall,reachable,threshold,recall,mota_r,motp_r,tp,fp,fn,ids\n";
  auto num = [](double x) { return Json(x).dump(); };
  for (const auto& c : report.categories) {
    for (const auto& rp : c.curve) {
      os << c.category << ',' << num(rp.target_recall) << ',' << (rp.reachable ? 1 : 0) << ','
         << num(rp.threshold) << ',' << num(rp.recall) << ',' << num(rp.mota_r) << ','
         << num(rp.motp_r) << ',' << rp.counts.tp << ',' << rp.counts.fp << ','
         << rp.counts.fn << ',' << rp.counts.ids << '\n';
    }
  }
  return os.str();
}

std::string report_table(const MetricReport& report) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s %8s %8s %8s %8s %6s %6s %6s\n", "category", "AMOTA",
                "AMOTP", "Recall", "MOTA", "IDS", "FP", "FN");
  os << buf;
  auto row = [&](const std::string& name, double amota, double amotp, double recall, double mota,
                 int64_t ids, int64_t fp, int64_t fn) {
    std::snprintf(buf, sizeof buf, "%-12s %8.4f %8.4f %8.4f %8.4f %6lld %6lld %6lld\n",
                  name.c_str(), amota, amotp, recall, mota, (long long)ids, (long long)fp,
                  (long long)fn);
    os << buf;
  };
  for (const auto& c : report.categories) {
    row(c.category, c.amota, c.amotp, c.recall, c.mota, c.ids, c.fp, c.fn);
  }
  row("overall", report.amota, report.amotp, report.recall, report.mota, report.ids, report.fp,
      report.fn);
  return os.str();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << content;
  if (!out) throw InputError("failed writing '" + path + "'");
}

}  // namespace panoptrack
