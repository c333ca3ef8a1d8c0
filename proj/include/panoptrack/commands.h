#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "panoptrack/config.h"
#include "panoptrack/metrics.h"
#include "panoptrack/tracker.h"

namespace panoptrack {

// Subcommand bodies shared by the command-line tool and the tests. They throw
// InputError for bad files, ArgumentError for bad options.

struct SimulateOptions {
  std::string scenario;  // TOML path or builtin:<name>
  std::string rig;       // TOML path; optional for builtin scenarios
  std::string out_dir;
  std::optional<uint64_t> seed;
};

struct TrackOptions {
  std::string detections, poses, config, out;
  std::optional<std::string> pipeline, motion, weights;
};

struct TrainOptions {
  std::string gt, detections, poses, config, out, log;
  std::optional<uint64_t> seed;
};

struct EvalOptions {
  std::string result, gt, config, out, curves;
  std::optional<std::string> matcher;
  std::optional<int> n_points;
};

struct CompareOptions {
  std::string detections, poses, gt, config, out;
  std::optional<std::string> weights;
  int jobs = 1;
};

// Reads PANOPTRACK_SEED; empty when unset. Throws ArgumentError when malformed.
std::optional<uint64_t> env_seed();

// An empty path gives the defaults.
RunConfig load_run_config(const std::string& path);

void cmd_simulate(const SimulateOptions& opts);
void cmd_track(const TrackOptions& opts);
TrainingLog cmd_train_motion(const TrainOptions& opts);
// Returns the text table printed by the tool.
std::string cmd_eval(const EvalOptions& opts);
std::string cmd_compare(const CompareOptions& opts);

struct CompareRow {
  Pipeline pipeline;
  MotionModel motion;
  bool available = true;  // false for lstm without weights
  MetricReport report;
};

// All pipelines x motion models, in table order.
std::vector<CompareRow> compare_pipelines(const std::vector<FrameBundle>& frames,
                                          const GroundTruth& gt, const RunConfig& config,
                                          int jobs = 1);
std::string compare_table(const std::vector<CompareRow>& rows);

}  // namespace panoptrack
