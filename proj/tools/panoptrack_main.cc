#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "panoptrack/commands.h"
#include "panoptrack/error.h"

namespace {

// CLI11 has no std::optional binding for our use; capture into a plain value
// and forward only when the flag was given.
template <class T>
std::optional<T> given(const CLI::Option* opt, const T& value) {
  return opt->count() > 0 ? std::optional<T>(value) : std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace panoptrack;
  CLI::App app{"Panoramic multi-camera 3D multi-object tracking"};
  app.require_subcommand(1);

  SimulateOptions sim;
  uint64_t sim_seed = 0;
  auto* simulate = app.add_subcommand("simulate", "Generate detections, poses and gt");
  simulate->add_option("--scenario", sim.scenario, "Scenario TOML or builtin:<name>")->required();
  simulate->add_option("--rig", sim.rig, "Rig TOML");
  simulate->add_option("--out", sim.out_dir, "Output directory")->required();
  auto* sim_seed_opt = simulate->add_option("--seed", sim_seed, "Random seed");

  TrackOptions trk;
  std::string pipeline, motion, weights;
  auto* track = app.add_subcommand("track", "Run a tracking pipeline");
  track->add_option("--detections", trk.detections);
  track->add_option("--poses", trk.poses);
  track->add_option("--config", trk.config);
  auto* pipeline_opt = track->add_option("--pipeline", pipeline)
                           ->check(CLI::IsMember({"single", "track-merge", "merge-track"}));
  auto* motion_opt =
      track->add_option("--motion", motion)->check(CLI::IsMember({"none", "kf3d", "lstm"}));
  auto* weights_opt = track->add_option("--weights", weights);
  track->add_option("--out", trk.out, "result.jsonl");

  TrainOptions trn;
  uint64_t train_seed = 0;
  auto* train = app.add_subcommand("train-motion", "Train the recurrent motion model");
  train->add_option("--gt", trn.gt);
  train->add_option("--detections", trn.detections);
  train->add_option("--poses", trn.poses);
  train->add_option("--config", trn.config);
  train->add_option("--out", trn.out, "weights.bin")->required();
  train->add_option("--log", trn.log, "train.csv");
  auto* train_seed_opt = train->add_option("--seed", train_seed);

  EvalOptions ev;
  std::string matcher;
  int n_points = 40;
  auto* eval = app.add_subcommand("eval", "Score a tracking result");
  eval->add_option("--result", ev.result);
  eval->add_option("--gt", ev.gt);
  eval->add_option("--config", ev.config);
  auto* matcher_opt = eval->add_option("--matcher", matcher, "bev:2.0, iou3d:0.3, iou3d:0.5");
  auto* points_opt = eval->add_option("--n-points", n_points);
  eval->add_option("--out", ev.out, "report.json");
  eval->add_option("--curves", ev.curves, "curves.csv");

  CompareOptions cmp;
  std::string cmp_weights;
  auto* compare = app.add_subcommand("compare", "All pipelines x motion models");
  compare->add_option("--detections", cmp.detections);
  compare->add_option("--poses", cmp.poses);
  compare->add_option("--gt", cmp.gt);
  compare->add_option("--config", cmp.config);
  auto* cmp_weights_opt = compare->add_option("--weights", cmp_weights);
  compare->add_option("--out", cmp.out, "table.txt");
  compare->add_option("--jobs", cmp.jobs)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) {
      sim.seed = given(sim_seed_opt, sim_seed);
      cmd_simulate(sim);
    } else if (*track) {
      trk.pipeline = given(pipeline_opt, pipeline);
      trk.motion = given(motion_opt, motion);
      trk.weights = given(weights_opt, weights);
      cmd_track(trk);
    } else if (*train) {
      trn.seed = given(train_seed_opt, train_seed);
      const TrainingLog log = cmd_train_motion(trn);
      if (!log.epochs.empty()) {
        const auto& first = log.epochs.front();
        const auto& last = log.epochs.back();
        std::cout << "epochs " << log.epochs.size() << ", validation loss "
                  << first.validation_loss << " -> " << last.validation_loss << "\n";
      }
    } else if (*eval) {
      ev.matcher = given(matcher_opt, matcher);
      ev.n_points = given(points_opt, n_points);
      std::cout << cmd_eval(ev);
    } else if (*compare) {
      cmp.weights = given(cmp_weights_opt, cmp_weights);
      std::cout << cmd_compare(cmp);
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
