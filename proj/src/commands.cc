#include "panoptrack/commands.h"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <future>
#include <memory>
#include <sstream>

#include "panoptrack/error.h"
#include "panoptrack/io.h"

namespace panoptrack {

namespace {

template <class T, class F>
T read_with(const std::string& path, F&& reader) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  try {
    return reader(in);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what(), e.line());
  }
}

std::vector<FrameBundle> load_frames(const std::string& detections, const std::string& poses) {
  const auto dets = read_with<std::vector<DetectionRecord>>(
      detections, [](std::istream& in) { return read_detections(in); });
  const auto ps =
      read_with<std::vector<PoseRecord>>(poses, [](std::istream& in) { return read_poses(in); });
  return assemble_frames(dets, ps);
}

GroundTruth load_gt(const std::string& path) {
  return read_with<GroundTruth>(path, [](std::istream& in) { return read_ground_truth(in); });
}

std::string pick(const std::string& flag, const std::string& fallback, const char* what) {
  const std::string& v = flag.empty() ? fallback : flag;
  if (v.empty()) throw ArgumentError(std::string("no ") + what + " file given");
  return v;
}

void attach_weights(TrackerConfig& tc, const std::string& path) {
  if (!path.empty()) {
    tc.lstm_weights = std::make_shared<const LstmWeights>(load_weights(path));
  }
}

}  // namespace

std::optional<uint64_t> env_seed() {
  const char* v = std::getenv("PANOPTRACK_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  uint64_t seed = 0;
  const char* end = v + std::char_traits<char>::length(v);
  auto [p, ec] = std::from_chars(v, end, seed);
  if (ec != std::errc() || p != end) {
    throw ArgumentError(std::string("PANOPTRACK_SEED must be an unsigned integer, got '") + v + "'");
  }
  return seed;
}

RunConfig load_run_config(const std::string& path) {
  if (path.empty()) return RunConfig{};
  const std::string text = read_file(path);
  try {
    return parse_run_config(text);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what(), e.line());
  }
}

void cmd_simulate(const SimulateOptions& opts) {
  if (opts.out_dir.empty()) throw ArgumentError("no output directory given");
  BuiltinScenario sim;
  const std::string prefix = "builtin:";
  if (opts.scenario.rfind(prefix, 0) == 0) {
    sim = builtin_scenario(opts.scenario.substr(prefix.size()));
  } else {
    sim.scenario = parse_scenario(read_file(opts.scenario));
    if (opts.rig.empty()) throw ArgumentError("a rig file is required for scenario files");
  }
  if (!opts.rig.empty()) sim.rig = parse_rig(read_file(opts.rig));
  if (opts.seed) {
    sim.scenario.seed = *opts.seed;
  } else if (auto s = env_seed()) {
    sim.scenario.seed = *s;
  }

  const SimOutput out = generate(sim.scenario, sim.rig);
  const std::filesystem::path dir(opts.out_dir);
  std::filesystem::create_directories(dir);
  std::ostringstream dets, poses, gt;
  write_detections(out.frames, dets);
  write_poses(out.frames, poses);
  write_ground_truth(out.gt, gt);
  write_file((dir / "detections.jsonl").string(), dets.str());
  write_file((dir / "poses.jsonl").string(), poses.str());
  write_file((dir / "gt.jsonl").string(), gt.str());
}

void cmd_track(const TrackOptions& opts) {
  RunConfig cfg = load_run_config(opts.config);
  if (opts.pipeline) cfg.tracker.pipeline = parse_pipeline(*opts.pipeline);
  if (opts.motion) cfg.tracker.motion_model = parse_motion_model(*opts.motion);
  if (opts.weights) cfg.weights_path = *opts.weights;
  if (cfg.tracker.motion_model == MotionModel::kLstm) {
    if (cfg.weights_path.empty()) throw ArgumentError("motion model lstm requires --weights");
    attach_weights(cfg.tracker, cfg.weights_path);
  }
  cfg.tracker.validate();

  const auto frames = load_frames(pick(opts.detections, cfg.detections_path, "detections"),
                                  pick(opts.poses, cfg.poses_path, "poses"));
  const TrackingResult result = run_pipeline(frames, cfg.tracker);
  std::ostringstream os;
  write_result(result, os);
  write_file(pick(opts.out, cfg.result_path, "output"), os.str());
}

TrainingLog cmd_train_motion(const TrainOptions& opts) {
  RunConfig cfg = load_run_config(opts.config);
  if (opts.seed) {
    cfg.train.seed = *opts.seed;
  } else if (auto s = env_seed()) {
    cfg.train.seed = *s;
  }
  if (opts.out.empty()) throw ArgumentError("no weights output path given");

  const GroundTruth gt = load_gt(pick(opts.gt, cfg.gt_path, "ground truth"));
  const auto frames = load_frames(pick(opts.detections, cfg.detections_path, "detections"),
                                  pick(opts.poses, cfg.poses_path, "poses"));
  const auto detections = merged_world_detections(frames, cfg.tracker.nms);
  const auto dataset = build_trajectory_dataset(gt, detections, cfg.train.bev_match_threshold,
                                                cfg.train.window);
  if (dataset.empty()) throw InputError("no training windows could be built from the input");

  LstmWeights weights = LstmWeights::random(cfg.hidden, cfg.train.seed);
  const TrainingLog log = train_motion_model(dataset, weights, cfg.train);
  save_weights(weights, opts.out);
  if (!opts.log.empty()) write_file(opts.log, log.to_csv());
  return log;
}

std::string cmd_eval(const EvalOptions& opts) {
  RunConfig cfg = load_run_config(opts.config);
  if (opts.matcher) cfg.eval.matcher = Matcher::parse(*opts.matcher);
  if (opts.n_points) cfg.eval.n_points = *opts.n_points;

  const TrackingResult result = read_with<TrackingResult>(
      pick(opts.result, cfg.result_path, "result"),
      [](std::istream& in) { return read_result(in); });
  const GroundTruth gt = load_gt(pick(opts.gt, cfg.gt_path, "ground truth"));
  const MetricReport report = evaluate(result, gt, cfg.eval);
  if (!opts.out.empty()) write_file(opts.out, report_json(report));
  if (!opts.curves.empty()) write_file(opts.curves, curves_csv(report));
  return report_table(report);
}

std::vector<CompareRow> compare_pipelines(const std::vector<FrameBundle>& frames,
                                          const GroundTruth& gt, const RunConfig& config,
                                          int jobs) {
  std::vector<CompareRow> rows;
  for (Pipeline p : {Pipeline::kSingleCamera, Pipeline::kTrackThenMerge,
                     Pipeline::kMergeThenTrack}) {
    for (MotionModel m : {MotionModel::kNone, MotionModel::kKf3d, MotionModel::kLstm}) {
      CompareRow row;
      row.pipeline = p;
      row.motion = m;
      row.available = m != MotionModel::kLstm || config.tracker.lstm_weights != nullptr;
      rows.push_back(row);
    }
  }

  auto run = [&](CompareRow& row) {
    if (!row.available) return;
    TrackerConfig tc = config.tracker;
    tc.pipeline = row.pipeline;
    tc.motion_model = row.motion;
    row.report = evaluate(run_pipeline(frames, tc), gt, config.eval);
  };

  // Rows are independent; results land in fixed slots so output order never
  // depends on scheduling.
  const size_t workers = static_cast<size_t>(std::max(1, jobs));
  for (size_t start = 0; start < rows.size(); start += workers) {
    std::vector<std::future<void>> batch;
    for (size_t i = start; i < std::min(rows.size(), start + workers); ++i) {
      batch.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred,
                                 [&, i] { run(rows[i]); }));
    }
    for (auto& f : batch) f.get();
  }
  return rows;
}

std::string compare_table(const std::vector<CompareRow>& rows) {
  std::ostringstream os;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-18s %-8s %8s %8s %8s %8s %6s\n", "pipeline", "motion",
                "AMOTA", "AMOTP", "RECALL", "MOTA", "IDS");
  os << buf;
  for (const auto& r : rows) {
    if (!r.available) {
      std::snprintf(buf, sizeof buf, "%-18s %-8s %8s %8s %8s %8s %6s\n", to_string(r.pipeline),
                    to_string(r.motion), "n/a", "n/a", "n/a", "n/a", "n/a");
    } else {
      std::snprintf(buf, sizeof buf, "%-18s %-8s %8.4f %8.4f %8.4f %8.4f %6lld\n",
                    to_string(r.pipeline), to_string(r.motion), r.report.amota, r.report.amotp,
                    r.report.recall, r.report.mota, static_cast<long long>(r.report.ids));
    }
    os << buf;
  }
  return os.str();
}

std::string cmd_compare(const CompareOptions& opts) {
  RunConfig cfg = load_run_config(opts.config);
  if (opts.weights) cfg.weights_path = *opts.weights;
  attach_weights(cfg.tracker, cfg.weights_path);
  const auto frames = load_frames(pick(opts.detections, cfg.detections_path, "detections"),
                                  pick(opts.poses, cfg.poses_path, "poses"));
  const GroundTruth gt = load_gt(pick(opts.gt, cfg.gt_path, "ground truth"));
  const std::string table = compare_table(compare_pipelines(frames, gt, cfg, opts.jobs));
  if (!opts.out.empty()) write_file(opts.out, table);
  return table;
}

}  // namespace panoptrack
