#include "panoptrack/config.h"

#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"

#include "panoptrack/error.h"

namespace panoptrack {

namespace {

using Json = nlohmann::ordered_json;

// ---- TOML subset -----------------------------------------------------------

class ValueParser {
 public:
  ValueParser(const std::string& s, long line) : s_(s), line_(line) {}

  Json parse_all() {
    Json v = value();
    skip_ws();
    if (pos_ != s_.size()) fail("unexpected trailing characters");
    return v;
  }

  std::vector<std::string> key_path() {
    std::vector<std::string> parts;
    while (true) {
      skip_ws();
      parts.push_back(key_part());
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == '.') {
        ++pos_;
        continue;
      }
      return parts;
    }
  }

  size_t pos() const { return pos_; }
  void set_pos(size_t p) { pos_ = p; }
  void skip_ws() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\n' ||
                                s_[pos_] == '\r')) {
      ++pos_;
    }
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw InputError("config line " + std::to_string(line_) + ": " + msg, line_);
  }

 private:
  std::string key_part() {
    if (pos_ < s_.size() && (s_[pos_] == '"' || s_[pos_] == '\'')) return string_value();
    const size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) ||
                                s_[pos_] == '_' || s_[pos_] == '-')) {
      ++pos_;
    }
    if (pos_ == start) fail("expected a key");
    return s_.substr(start, pos_ - start);
  }

  Json value() {
    skip_ws();
    if (pos_ >= s_.size()) fail("missing value");
    const char c = s_[pos_];
    if (c == '"' || c == '\'') return string_value();
    if (c == '[') return array();
    if (c == '{') return inline_table();
    return scalar();
  }

  std::string string_value() {
    const char quote = s_[pos_++];
    std::string out;
    while (pos_ < s_.size() && s_[pos_] != quote) {
      char c = s_[pos_++];
      if (c == '\n') fail("unterminated string");
      if (quote == '"' && c == '\\') {
        if (pos_ >= s_.size()) fail("bad escape");
        const char e = s_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case 'r': c = '\r'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos_ >= s_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  Json array() {
    ++pos_;
    Json out = Json::array();
    while (true) {
      skip_ws();
      if (pos_ >= s_.size()) fail("unterminated array");
      if (s_[pos_] == ']') {
        ++pos_;
        return out;
      }
      out.push_back(value());
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ',') {
        ++pos_;
      } else if (pos_ >= s_.size() || s_[pos_] != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  Json inline_table() {
    ++pos_;
    Json out = Json::object();
    skip_ws();
    if (pos_ < s_.size() && s_[pos_] == '}') {
      ++pos_;
      return out;
    }
    while (true) {
      const auto path = key_path();
      skip_ws();
      if (pos_ >= s_.size() || s_[pos_] != '=') fail("expected '=' in inline table");
      ++pos_;
      Json* t = &out;
      for (size_t i = 0; i + 1 < path.size(); ++i) {
        Json& next = (*t)[path[i]];
        if (next.is_null()) next = Json::object();
        if (!next.is_object()) fail("key '" + path[i] + "' is not a table");
        t = &next;
      }
      if (t->contains(path.back())) fail("duplicate key '" + path.back() + "'");
      (*t)[path.back()] = value();
      skip_ws();
      if (pos_ < s_.size() && s_[pos_] == ',') {
        ++pos_;
        continue;
      }
      if (pos_ < s_.size() && s_[pos_] == '}') {
        ++pos_;
        return out;
      }
      fail("expected ',' or '}' in inline table");
    }
  }

  Json scalar() {
    const size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) ||
                                s_[pos_] == '_' || s_[pos_] == '+' || s_[pos_] == '-' ||
                                s_[pos_] == '.')) {
      ++pos_;
    }
    std::string tok = s_.substr(start, pos_ - start);
    if (tok.empty()) fail("expected a value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    if (tok == "inf" || tok == "+inf") return std::numeric_limits<double>::infinity();
    if (tok == "-inf") return -std::numeric_limits<double>::infinity();
    std::string digits;
    for (char c : tok) {
      if (c != '_') digits.push_back(c);
    }
    const char* first = digits.data();
    const char* last = digits.data() + digits.size();
    if (*first == '+') ++first;
    const bool is_float = digits.find_first_of(".eE") != std::string::npos;
    if (is_float) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || p != last) fail("bad number '" + tok + "'");
      return v;
    }
    int64_t v = 0;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last) fail("bad value '" + tok + "'");
    return v;
  }

  const std::string& s_;
  long line_;
  size_t pos_ = 0;
};

std::string strip_comment(const std::string& line) {
  char quote = 0;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (quote == '"' && c == '\\') {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

// Bracket depth outside strings; used to join multi-line arrays.
int depth_change(const std::string& s) {
  int d = 0;
  char quote = 0;
  for (size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quote) {
      if (quote == '"' && c == '\\') {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '[' || c == '{') {
      ++d;
    } else if (c == ']' || c == '}') {
      --d;
    }
  }
  return d;
}

std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

Json parse_toml(const std::string& text) {
  Json root = Json::object();
  Json* table = &root;
  std::istringstream in(text);
  std::string raw;
  long n = 0;
  while (std::getline(in, raw)) {
    ++n;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    const long line_no = n;

    if (line[0] == '[') {
      const bool array_table = line.size() > 1 && line[1] == '[';
      const std::string close = array_table ? "]]" : "]";
      if (line.size() < 2 * close.size() || line.substr(line.size() - close.size()) != close) {
        ValueParser(line, line_no).fail("malformed table header");
      }
      const std::string inner =
          line.substr(close.size(), line.size() - 2 * close.size());
      ValueParser kp(inner, line_no);
      const auto path = kp.key_path();
      kp.skip_ws();
      if (kp.pos() != inner.size()) kp.fail("malformed table header");
      Json* t = &root;
      for (size_t i = 0; i < path.size(); ++i) {
        Json& next = (*t)[path[i]];
        const bool last = i + 1 == path.size();
        if (last && array_table) {
          if (next.is_null()) next = Json::array();
          if (!next.is_array()) kp.fail("'" + path[i] + "' is not an array of tables");
          next.push_back(Json::object());
          t = &next.back();
          break;
        }
        if (next.is_null()) next = Json::object();
        if (next.is_array() && !next.empty() && next.back().is_object()) {
          t = &next.back();
          continue;
        }
        if (!next.is_object()) kp.fail("'" + path[i] + "' is not a table");
        t = &next;
      }
      table = t;
      continue;
    }

    // key = value, joining continuation lines while brackets are open.
    int depth = depth_change(line);
    while (depth > 0 && std::getline(in, raw)) {
      ++n;
      const std::string more = strip_comment(raw);
      depth += depth_change(more);
      line += "\n" + more;
    }
    ValueParser p(line, line_no);
    const auto path = p.key_path();
    p.skip_ws();
    if (p.pos() >= line.size() || line[p.pos()] != '=') p.fail("expected '='");
    const std::string rest = line.substr(p.pos() + 1);
    Json value = ValueParser(rest, line_no).parse_all();
    Json* t = table;
    for (size_t i = 0; i + 1 < path.size(); ++i) {
      Json& next = (*t)[path[i]];
      if (next.is_null()) next = Json::object();
      if (!next.is_object()) p.fail("'" + path[i] + "' is not a table");
      t = &next;
    }
    if (t->contains(path.back())) p.fail("duplicate key '" + path.back() + "'");
    (*t)[path.back()] = std::move(value);
  }
  return root;
}

// ---- typed access with unknown-key rejection -------------------------------

class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "must be a table");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  void get(const std::string& key, double& out) {
    if (const Json* v = take(key)) {
      if (!v->is_number()) fail(key, "must be a number");
      out = v->get<double>();
    }
  }
  void get(const std::string& key, int& out) {
    int64_t v = out;
    get(key, v);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
      fail(key, "is out of range");
    }
    out = static_cast<int>(v);
  }
  void get(const std::string& key, int64_t& out) {
    if (const Json* v = take(key)) {
      if (!v->is_number_integer()) fail(key, "must be an integer");
      out = v->get<int64_t>();
    }
  }
  void get(const std::string& key, uint64_t& out) {
    if (const Json* v = take(key)) {
      if (!v->is_number_integer() || v->get<int64_t>() < 0) {
        if (!v->is_number_unsigned()) fail(key, "must be a non-negative integer");
      }
      out = v->get<uint64_t>();
    }
  }
  void get(const std::string& key, bool& out) {
    if (const Json* v = take(key)) {
      if (!v->is_boolean()) fail(key, "must be true or false");
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const Json* v = take(key)) {
      if (!v->is_string()) fail(key, "must be a string");
      out = v->get<std::string>();
    }
  }

  std::optional<Reader> table(const std::string& key) {
    if (const Json* v = take(key)) {
      if (!v->is_object()) fail(key, "must be a table");
      return Reader(*v, join(key));
    }
    return std::nullopt;
  }

  std::vector<Reader> tables(const std::string& key) {
    std::vector<Reader> out;
    if (const Json* v = take(key)) {
      if (!v->is_array()) fail(key, "must be an array of tables");
      for (size_t i = 0; i < v->size(); ++i) {
        out.emplace_back((*v)[i], join(key) + "[" + std::to_string(i) + "]");
      }
    }
    return out;
  }

  const Json* raw(const std::string& key) { return take(key); }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) throw InputError("unknown config key '" + join(k) + "'");
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw InputError("config key '" + (key.empty() ? path_ : join(key)) + "' " + msg);
  }

 private:
  const Json* take(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <class F>
void wrap_argument_errors(F&& f) {
  try {
    f();
  } catch (const ArgumentError& e) {
    throw InputError(std::string("invalid config: ") + e.what());
  }
}

}  // namespace

std::string toml_to_json(const std::string& toml) { return parse_toml(toml).dump(); }

RunConfig parse_run_config(const std::string& toml) {
  const Json root = parse_toml(toml);
  Reader r(root, "");
  RunConfig c;
  if (auto t = r.table("tracker")) {
    TrackerConfig& tc = c.tracker;
    t->get("match_threshold", tc.match_threshold);
    t->get("start_score", tc.start_score);
    t->get("continue_score", tc.continue_score);
    t->get("max_inactive_frames", tc.max_inactive_frames);
    t->get("backdrop_frames", tc.backdrop_frames);
    t->get("embed_momentum", tc.embed_momentum);
    t->get("dup_iou2d_new", tc.dup_iou2d_new);
    t->get("dup_iou2d_backdrop", tc.dup_iou2d_backdrop);
    t->get("dup_iou3d", tc.dup_iou3d);
    std::string s;
    t->get("pipeline", s);
    if (!s.empty()) wrap_argument_errors([&] { tc.pipeline = parse_pipeline(s); });
    s.clear();
    t->get("motion_model", s);
    if (!s.empty()) wrap_argument_errors([&] { tc.motion_model = parse_motion_model(s); });
    t->finish();
  }
  if (auto t = r.table("affinity")) {
    t->get("w_deep", c.tracker.affinity.w_deep);
    t->get("r", c.tracker.affinity.r);
    t->get("clamp_cos", c.tracker.affinity.clamp_cos);
    t->finish();
  }
  if (auto t = r.table("nms")) {
    t->get("iou_threshold", c.tracker.nms.iou_threshold);
    t->get("category_aware", c.tracker.nms.category_aware);
    t->finish();
  }
  if (auto t = r.table("kf")) {
    KfParams& k = c.tracker.kf;
    t->get("q_box", k.q_box);
    t->get("q_velocity", k.q_velocity);
    t->get("r_box", k.r_box);
    t->get("r_theta", k.r_theta);
    t->get("epsilon", k.epsilon);
    t->get("p0_box", k.p0_box);
    t->get("p0_velocity", k.p0_velocity);
    t->finish();
  }
  if (auto t = r.table("motion")) {
    t->get("weights", c.weights_path);
    t->get("hidden", c.hidden);
    t->finish();
  }
  if (auto t = r.table("train")) {
    TrainConfig& tr = c.train;
    t->get("window", tr.window);
    t->get("batch_size", tr.batch_size);
    t->get("epochs", tr.epochs);
    t->get("w_linear", tr.w_linear);
    t->get("bev_match_threshold", tr.bev_match_threshold);
    t->get("learning_rate", tr.learning_rate);
    t->get("weight_decay", tr.weight_decay);
    t->get("huber_delta", tr.huber_delta);
    t->get("validation_fraction", tr.validation_fraction);
    t->get("seed", tr.seed);
    t->finish();
  }
  if (auto t = r.table("metrics")) {
    std::string m;
    t->get("matcher", m);
    if (!m.empty()) wrap_argument_errors([&] { c.eval.matcher = Matcher::parse(m); });
    t->get("n_points", c.eval.n_points);
    t->get("amotp_miss_distance", c.eval.amotp_miss_distance);
    t->finish();
  }
  if (auto t = r.table("io")) {
    t->get("detections", c.detections_path);
    t->get("poses", c.poses_path);
    t->get("gt", c.gt_path);
    t->get("result", c.result_path);
    t->finish();
  }
  r.finish();

  if (c.hidden < 1) throw InputError("config key 'motion.hidden' must be >= 1");
  if (c.eval.n_points < 2) throw InputError("config key 'metrics.n_points' must be >= 2");
  if (c.train.window < 3) throw InputError("config key 'train.window' must be >= 3");
  if (c.train.batch_size < 1) throw InputError("config key 'train.batch_size' must be >= 1");
  if (c.train.epochs < 0) throw InputError("config key 'train.epochs' must be >= 0");
  // Weights are attached later; validate everything else now.
  TrackerConfig probe = c.tracker;
  probe.motion_model = MotionModel::kNone;
  wrap_argument_errors([&] { probe.validate(); });
  return c;
}

ScenarioSpec parse_scenario(const std::string& toml) {
  const Json root = parse_toml(toml);
  Reader r(root, "");
  ScenarioSpec s;
  r.get("name", s.name);
  r.get("frames", s.frames);
  r.get("frame_rate", s.frame_rate);
  r.get("seed", s.seed);
  if (auto t = r.table("ego")) {
    t->get("vx", s.ego.vx);
    t->get("vy", s.ego.vy);
    t->get("yaw_rate", s.ego.yaw_rate);
    t->finish();
  }
  if (auto t = r.table("noise")) {
    NoiseSpec& n = s.noise;
    t->get("sigma0", n.sigma0);
    t->get("sigma_slope", n.sigma_slope);
    t->get("sigma_theta", n.sigma_theta);
    t->get("sigma_dim", n.sigma_dim);
    t->get("dropout", n.dropout);
    t->get("truncation_margin", n.truncation_margin);
    t->get("truncation_multiplier", n.truncation_multiplier);
    t->get("embedding_sigma", n.embedding_sigma);
    t->finish();
  }
  int64_t next_id = 0;
  for (auto& t : r.tables("objects")) {
    ObjectSpec o;
    o.id = next_id;
    t.get("id", o.id);
    next_id = o.id + 1;
    t.get("category", o.category);
    t.get("l", o.l);
    t.get("w", o.w);
    t.get("h", o.h);
    std::string kind = "constant_velocity";
    t.get("path", kind);
    if (kind == "constant_velocity") {
      o.path.kind = PathSpec::Kind::kConstantVelocity;
    } else if (kind == "constant_turn") {
      o.path.kind = PathSpec::Kind::kConstantTurn;
    } else if (kind == "waypoints") {
      o.path.kind = PathSpec::Kind::kWaypoints;
    } else {
      t.fail("path", "must be constant_velocity, constant_turn or waypoints");
    }
    t.get("x", o.path.x);
    t.get("y", o.path.y);
    t.get("z", o.path.z);
    t.get("heading", o.path.heading);
    t.get("speed", o.path.speed);
    t.get("turn_rate", o.path.turn_rate);
    if (const Json* w = t.raw("waypoints")) {
      if (!w->is_array()) t.fail("waypoints", "must be an array of [frame, x, y, z]");
      for (const auto& p : *w) {
        if (!p.is_array() || p.size() != 4 || !p[0].is_number_integer() || !p[1].is_number() ||
            !p[2].is_number() || !p[3].is_number()) {
          t.fail("waypoints", "entries must be [frame, x, y, z]");
        }
        o.path.waypoints.push_back(
            {p[0].get<int64_t>(), p[1].get<double>(), p[2].get<double>(), p[3].get<double>()});
      }
    }
    t.get("start_frame", o.start_frame);
    t.get("end_frame", o.end_frame);
    if (const Json* h = t.raw("hidden")) {
      if (!h->is_array()) t.fail("hidden", "must be an array of [first, last]");
      for (const auto& p : *h) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() ||
            !p[1].is_number_integer()) {
          t.fail("hidden", "entries must be [first, last]");
        }
        o.hidden.emplace_back(p[0].get<int64_t>(), p[1].get<int64_t>());
      }
    }
    t.finish();
    s.objects.push_back(std::move(o));
  }
  r.finish();
  wrap_argument_errors([&] { s.validate(); });
  return s;
}

RigSpec parse_rig(const std::string& toml) {
  const Json root = parse_toml(toml);
  Reader r(root, "");
  RigSpec rig;
  for (auto& t : r.tables("cameras")) {
    CameraSpec c;
    t.get("yaw", c.yaw);
    t.get("half_fov", c.half_fov);
    t.get("max_range", c.max_range);
    t.finish();
    rig.cameras.push_back(c);
  }
  r.finish();
  wrap_argument_errors([&] { rig.validate(); });
  return rig;
}

}  // namespace panoptrack
