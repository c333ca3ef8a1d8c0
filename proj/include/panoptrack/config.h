#pragma once

#include <string>

#include "panoptrack/learn.h"
#include "panoptrack/metrics.h"
#include "panoptrack/sim.h"
#include "panoptrack/tracker.h"

namespace panoptrack {

// Everything a subcommand can read from one TOML file. CLI flags override.
struct RunConfig {
  TrackerConfig tracker;
  std::string weights_path;
  TrainConfig train;
  int hidden = 128;
  EvalSettings eval;
  // Optional default I/O locations.
  std::string detections_path, poses_path, gt_path, result_path;
};

// Converts the supported TOML subset (tables, arrays of tables, dotted keys,
// strings, numbers, booleans, arrays, inline tables) to JSON text. Throws
// InputError with the line number on syntax errors.
std::string toml_to_json(const std::string& toml);

// Unknown keys and out-of-range values raise InputError.
RunConfig parse_run_config(const std::string& toml);
ScenarioSpec parse_scenario(const std::string& toml);
RigSpec parse_rig(const std::string& toml);

}  // namespace panoptrack
