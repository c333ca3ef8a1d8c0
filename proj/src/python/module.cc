#include <fstream>
#include <optional>
#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "panoptrack/commands.h"
#include "panoptrack/error.h"
#include "panoptrack/geom.h"
#include "panoptrack/io.h"
#include "panoptrack/learn.h"
#include "panoptrack/motion.h"
#include "panoptrack/sim.h"
#include "panoptrack/tracker.h"

namespace py = pybind11;
using namespace panoptrack;

namespace {

std::vector<std::pair<int64_t, size_t>> assign(const Eigen::MatrixXd& values, double threshold) {
  AffinityMatrix a;
  a.values = values;
  for (Eigen::Index i = 0; i < values.rows(); ++i) a.track_ids.push_back(i);
  return greedy_assign(a, threshold).matches;
}

std::vector<Velocity7> velocities(const std::vector<Eigen::VectorXd>& rows) {
  std::vector<Velocity7> out;
  for (const auto& r : rows) {
    if (r.size() != 7) throw ArgumentError("velocities must have 7 components");
    out.push_back(r);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_panoptrack, m) {
  m.doc() = "Panoramic multi-camera 3D multi-object tracking";

  py::register_exception<ArgumentError>(m, "ArgumentError", PyExc_ValueError);
  py::register_exception<InputError>(m, "InputError", PyExc_IOError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<Box3D>(m, "Box3D")
      .def(py::init<double, double, double, double, double, double, double>(), py::arg("x"),
           py::arg("y"), py::arg("z"), py::arg("theta"), py::arg("l"), py::arg("w"), py::arg("h"))
      .def_readwrite("x", &Box3D::x)
      .def_readwrite("y", &Box3D::y)
      .def_readwrite("z", &Box3D::z)
      .def_readwrite("theta", &Box3D::theta)
      .def_readwrite("l", &Box3D::l)
      .def_readwrite("w", &Box3D::w)
      .def_readwrite("h", &Box3D::h)
      .def("minus", &Box3D::minus)
      .def("plus", &Box3D::plus)
      .def(py::self == py::self)
      .def("__repr__", [](const Box3D& b) {
        std::ostringstream os;
        os << "Box3D(" << b.x << ", " << b.y << ", " << b.z << ", " << b.theta << ", " << b.l
           << ", " << b.w << ", " << b.h << ")";
        return os.str();
      });

  m.def("wrap_angle", &wrap_angle);
  m.def("iou_3d", &iou_3d);
  m.def("bev_distance", &bev_distance);
  m.def("greedy_assign", &assign, py::arg("affinity"), py::arg("threshold"),
        "Greedy matching on a dense matrix; returns (row, column) pairs.");

  m.def("huber", &huber, py::arg("error"), py::arg("delta") = 1.0);
  m.def(
      "motion_loss",
      [](const std::vector<Eigen::VectorXd>& refined, const std::vector<Eigen::VectorXd>& predicted,
         const std::vector<Eigen::VectorXd>& ground_truth, double w_linear, double delta) {
        return motion_loss(velocities(refined), velocities(predicted), velocities(ground_truth),
                           w_linear, delta);
      },
      py::arg("refined"), py::arg("predicted"), py::arg("ground_truth"),
      py::arg("w_linear") = 0.001, py::arg("delta") = 1.0);

  m.def("builtin_scenarios", [] {
    std::vector<std::string> names;
    for (const auto& b : builtin_scenarios()) names.push_back(b.scenario.name);
    return names;
  });

  m.def(
      "simulate",
      [](const std::string& scenario, const std::string& out_dir, const std::string& rig,
         std::optional<uint64_t> seed) {
        SimulateOptions o;
        o.scenario = scenario;
        o.out_dir = out_dir;
        o.rig = rig;
        o.seed = seed;
        py::gil_scoped_release release;
        cmd_simulate(o);
      },
      py::arg("scenario"), py::arg("out_dir"), py::arg("rig") = "", py::arg("seed") = py::none(),
      "Writes detections.jsonl, poses.jsonl and gt.jsonl into out_dir.");

  m.def(
      "track",
      [](const std::string& detections, const std::string& poses, const std::string& out,
         std::optional<std::string> pipeline, std::optional<std::string> motion,
         std::optional<std::string> weights, const std::string& config) {
        TrackOptions o;
        o.detections = detections;
        o.poses = poses;
        o.out = out;
        o.pipeline = pipeline;
        o.motion = motion;
        o.weights = weights;
        o.config = config;
        py::gil_scoped_release release;
        cmd_track(o);
      },
      py::arg("detections"), py::arg("poses"), py::arg("out"), py::arg("pipeline") = py::none(),
      py::arg("motion") = py::none(), py::arg("weights") = py::none(), py::arg("config") = "");

  m.def(
      "evaluate",
      [](const std::string& result, const std::string& gt, std::optional<std::string> matcher,
         std::optional<int> n_points, const std::string& config) {
        RunConfig cfg = load_run_config(config);
        if (matcher) cfg.eval.matcher = Matcher::parse(*matcher);
        if (n_points) cfg.eval.n_points = *n_points;
        std::ifstream rin(result), gin(gt);
        if (!rin) throw InputError("cannot open " + result);
        if (!gin) throw InputError("cannot open " + gt);
        const TrackingResult r = read_result(rin);
        const GroundTruth g = read_ground_truth(gin);
        std::string json;
        {
          py::gil_scoped_release release;
          json = report_json(evaluate(r, g, cfg.eval));
        }
        return py::module_::import("json").attr("loads")(json);
      },
      py::arg("result"), py::arg("gt"), py::arg("matcher") = py::none(),
      py::arg("n_points") = py::none(), py::arg("config") = "",
      "Scores a result file; returns the report as a dict.");

  m.def(
      "train_motion",
      [](const std::string& gt, const std::string& detections, const std::string& poses,
         const std::string& out, const std::string& config, std::optional<uint64_t> seed) {
        TrainOptions o;
        o.gt = gt;
        o.detections = detections;
        o.poses = poses;
        o.out = out;
        o.config = config;
        o.seed = seed;
        TrainingLog log;
        {
          py::gil_scoped_release release;
          log = cmd_train_motion(o);
        }
        std::vector<double> validation;
        for (const auto& e : log.epochs) validation.push_back(e.validation_loss);
        return validation;
      },
      py::arg("gt"), py::arg("detections"), py::arg("poses"), py::arg("out"),
      py::arg("config") = "", py::arg("seed") = py::none(),
      "Trains the motion model; returns the validation loss per epoch.");
}
