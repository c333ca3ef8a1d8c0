#include "panoptrack/metrics.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "panoptrack/error.h"

namespace panoptrack {

namespace {

// Recall targets such as k/(n-1) are compared with tp/P up to rounding.
constexpr double kRecallSlack = 1e-9;

struct FrameData {
  std::vector<TrackedObject> preds;
  std::vector<GroundTruthObject> gts;
};

// Frames in ascending order restricted to one category (or all).
std::vector<FrameData> collect(const TrackingResult& result, const GroundTruth& gt,
                               const std::string& category) {
  std::set<int64_t> frames;
  for (const auto& [f, v] : result.frames) frames.insert(f);
  for (const auto& [f, v] : gt.frames) frames.insert(f);
  std::vector<FrameData> out;
  out.reserve(frames.size());
  for (int64_t f : frames) {
    FrameData fd;
    if (auto it = result.frames.find(f); it != result.frames.end()) {
      for (const auto& p : it->second) {
        if (category.empty() || p.category == category) fd.preds.push_back(p);
      }
    }
    if (auto it = gt.frames.find(f); it != gt.frames.end()) {
      for (const auto& g : it->second) {
        if (category.empty() || g.category == category) fd.gts.push_back(g);
      }
    }
    out.push_back(std::move(fd));
  }
  return out;
}

ClearCounts clear_counts(const std::vector<FrameData>& frames, const Matcher& matcher,
                         double min_confidence) {
  ClearCounts counts;
  std::map<int64_t, int64_t> last_match;  // gt id -> track id
  std::vector<TrackedObject> kept;
  for (const auto& fd : frames) {
    kept.clear();
    for (const auto& p : fd.preds) {
      if (p.confidence >= min_confidence) kept.push_back(p);
    }
    const FrameMatch m = match_frame(kept, fd.gts, matcher, last_match);
    counts.num_gt += static_cast<int64_t>(fd.gts.size());
    counts.tp += static_cast<int64_t>(m.pairs.size());
    counts.fp += static_cast<int64_t>(m.false_positives.size());
    counts.fn += static_cast<int64_t>(m.false_negatives.size());
    for (const auto& [pi, gi] : m.pairs) {
      const int64_t gid = fd.gts[gi].object_id;
      const int64_t tid = kept[pi].track_id;
      auto it = last_match.find(gid);
      if (it != last_match.end() && it->second != tid) ++counts.ids;
      last_match[gid] = tid;
      counts.distance_sum += bev_distance(kept[pi].box, fd.gts[gi].box);
    }
  }
  return counts;
}

// Every distinct confidence, highest first, with the counts it produces.
struct Sweep {
  std::vector<double> thresholds;
  std::vector<ClearCounts> counts;
};

Sweep sweep(const std::vector<FrameData>& frames, const Matcher& matcher) {
  std::vector<double> confs;
  for (const auto& fd : frames) {
    for (const auto& p : fd.preds) confs.push_back(p.confidence);
  }
  std::sort(confs.begin(), confs.end(), std::greater<>());
  confs.erase(std::unique(confs.begin(), confs.end()), confs.end());
  Sweep s;
  s.thresholds = confs;
  for (double t : confs) s.counts.push_back(clear_counts(frames, matcher, t));
  return s;
}

RecallPoint pick(const Sweep& s, double target, int64_t num_gt) {
  RecallPoint rp;
  rp.target_recall = target;
  if (num_gt == 0) return rp;
  for (size_t i = 0; i < s.thresholds.size(); ++i) {
    const ClearCounts& c = s.counts[i];
    if (c.recall() + kRecallSlack < target) continue;
    rp.reachable = true;
    rp.threshold = s.thresholds[i];
    rp.recall = c.recall();
    rp.counts = c;
    const double p = static_cast<double>(c.num_gt);
    const double r = rp.recall;
    const double num = double(c.ids + c.fp + c.fn) - (1.0 - r) * p;
    rp.mota_r = std::max(0.0, 1.0 - num / (r * p));
    rp.motp_r = c.motp();
    return rp;
  }
  rp.counts.num_gt = num_gt;
  return rp;
}

int64_t count_gt(const std::vector<FrameData>& frames) {
  int64_t n = 0;
  for (const auto& fd : frames) n += static_cast<int64_t>(fd.gts.size());
  return n;
}

void check_points(int n_points) {
  if (n_points < 2) throw ArgumentError("n_points must be >= 2");
}

std::vector<RecallPoint> curve(const std::vector<FrameData>& frames, const Matcher& matcher,
                               int n_points) {
  check_points(n_points);
  const Sweep s = sweep(frames, matcher);
  const int64_t p = count_gt(frames);
  std::vector<RecallPoint> out;
  for (int k = 1; k < n_points; ++k) {
    out.push_back(pick(s, double(k) / double(n_points - 1), p));
  }
  return out;
}

double mean_amota(const std::vector<RecallPoint>& c) {
  double acc = 0.0;
  for (const auto& rp : c) acc += rp.mota_r;
  return c.empty() ? 0.0 : acc / double(c.size());
}

double mean_amotp(const std::vector<RecallPoint>& c, double miss_distance) {
  double acc = 0.0;
  for (const auto& rp : c) acc += (rp.reachable && rp.counts.tp > 0) ? rp.motp_r : miss_distance;
  return c.empty() ? 0.0 : acc / double(c.size());
}

}  // namespace

Matcher Matcher::parse(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) throw ArgumentError("matcher must look like bev:2.0 or iou3d:0.3");
  const std::string kind = spec.substr(0, colon);
  double value = 0.0;
  try {
    size_t used = 0;
    value = std::stod(spec.substr(colon + 1), &used);
    if (used != spec.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ArgumentError("bad matcher threshold in '" + spec + "'");
  }
  if (kind == "bev") {
    if (!(value > 0.0)) throw ArgumentError("bev gate must be positive");
    return bev(value);
  }
  if (kind == "iou3d") {
    if (!(value > 0.0 && value <= 1.0)) throw ArgumentError("iou3d gate must lie in (0, 1]");
    return iou3d(value);
  }
  throw ArgumentError("unknown matcher kind '" + kind + "'");
}

std::string Matcher::to_string() const {
  std::ostringstream os;
  os << (kind == Kind::kBevDistance ? "bev:" : "iou3d:") << threshold;
  return os.str();
}

FrameMatch match_frame(const std::vector<TrackedObject>& preds,
                       const std::vector<GroundTruthObject>& gts, const Matcher& matcher,
                       const std::map<int64_t, int64_t>& previous) {
  struct Candidate {
    double cost;  // lower is better
    bool continues;
    size_t gi;
    size_t pi;
  };
  std::vector<Candidate> cands;
  for (size_t gi = 0; gi < gts.size(); ++gi) {
    const auto prev = previous.find(gts[gi].object_id);
    for (size_t pi = 0; pi < preds.size(); ++pi) {
      if (preds[pi].category != gts[gi].category) continue;
      double cost;
      if (matcher.kind == Matcher::Kind::kBevDistance) {
        cost = bev_distance(preds[pi].box, gts[gi].box);
        if (cost > matcher.threshold) continue;
      } else {
        const double iou = iou_3d(preds[pi].box, gts[gi].box);
        if (iou < matcher.threshold) continue;
        cost = -iou;
      }
      const bool cont = prev != previous.end() && prev->second == preds[pi].track_id;
      cands.push_back({cost, cont, gi, pi});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.continues != b.continues) return a.continues;
    if (a.gi != b.gi) return a.gi < b.gi;
    return a.pi < b.pi;
  });

  FrameMatch out;
  std::vector<bool> pred_used(preds.size(), false), gt_used(gts.size(), false);
  for (const auto& c : cands) {
    if (pred_used[c.pi] || gt_used[c.gi]) continue;
    pred_used[c.pi] = true;
    gt_used[c.gi] = true;
    out.pairs.emplace_back(c.pi, c.gi);
  }
  for (size_t pi = 0; pi < preds.size(); ++pi) {
    if (!pred_used[pi]) out.false_positives.push_back(pi);
  }
  for (size_t gi = 0; gi < gts.size(); ++gi) {
    if (!gt_used[gi]) out.false_negatives.push_back(gi);
  }
  return out;
}

ClearCounts evaluate_clear(const TrackingResult& result, const GroundTruth& gt,
                           const Matcher& matcher, double min_confidence,
                           const std::string& category) {
  return clear_counts(collect(result, gt, category), matcher, min_confidence);
}

RecallPoint mota_at_recall(const TrackingResult& result, const GroundTruth& gt,
                           double target_recall, const Matcher& matcher,
                           const std::string& category) {
  if (!(target_recall > 0.0 && target_recall <= 1.0)) {
    throw ArgumentError("recall level must lie in (0, 1]");
  }
  const auto frames = collect(result, gt, category);
  return pick(sweep(frames, matcher), target_recall, count_gt(frames));
}

double amota(const TrackingResult& result, const GroundTruth& gt, int n_points,
             const Matcher& matcher, const std::string& category) {
  return mean_amota(curve(collect(result, gt, category), matcher, n_points));
}

double amotp(const TrackingResult& result, const GroundTruth& gt, int n_points,
             const Matcher& matcher, double miss_distance, const std::string& category) {
  return mean_amotp(curve(collect(result, gt, category), matcher, n_points), miss_distance);
}

MetricReport evaluate(const TrackingResult& result, const GroundTruth& gt,
                      const EvalSettings& settings) {
  check_points(settings.n_points);
  std::set<std::string> categories;
  for (const auto& [f, objs] : gt.frames) {
    for (const auto& g : objs) categories.insert(g.category);
  }

  MetricReport report;
  report.matcher = settings.matcher.to_string();
  report.n_points = settings.n_points;
  for (const auto& cat : categories) {
    const auto frames = collect(result, gt, cat);
    CategoryReport cr;
    cr.category = cat;
    cr.num_gt = count_gt(frames);
    cr.curve = curve(frames, settings.matcher, settings.n_points);
    cr.amota = mean_amota(cr.curve);
    cr.amotp = mean_amotp(cr.curve, settings.amotp_miss_distance);

    for (const auto& rp : cr.curve) {
      if (!rp.reachable) ++cr.unreachable_points;
    }
    // Headline counts use every prediction regardless of confidence.
    const ClearCounts all = clear_counts(frames, settings.matcher, -1.0);
    cr.recall = all.recall();
    cr.mota = all.mota();
    cr.ids = all.ids;
    cr.fp = all.fp;
    cr.fn = all.fn;
    report.categories.push_back(std::move(cr));
  }
  if (!report.categories.empty()) {
    const double n = static_cast<double>(report.categories.size());
    for (const auto& cr : report.categories) {
      report.amota += cr.amota / n;
      report.amotp += cr.amotp / n;
      report.recall += cr.recall / n;
      report.mota += cr.mota / n;
      report.ids += cr.ids;
      report.fp += cr.fp;
      report.fn += cr.fn;
    }
  }
  return report;
}

IouMota mota_iou(const TrackingResult& result, const GroundTruth& gt, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ArgumentError("iou threshold must lie in (0, 1]");
  }
  IouMota out;
  out.counts = evaluate_clear(result, gt, Matcher::iou3d(iou_threshold), -1.0);
  out.mota = out.counts.mota();
  out.mismatch_ratio =
      out.counts.num_gt > 0 ? double(out.counts.ids) / double(out.counts.num_gt) : 0.0;
  return out;
}

}  // namespace panoptrack
