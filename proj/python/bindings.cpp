#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "relulab/arrangement.hpp"
#include "relulab/bounds.hpp"
#include "relulab/config.hpp"
#include "relulab/datasets.hpp"
#include "relulab/errors.hpp"
#include "relulab/experiment.hpp"
#include "relulab/kakeya.hpp"
#include "relulab/net.hpp"
#include "relulab/optim.hpp"
#include "relulab/trace.hpp"

namespace py = pybind11;
using namespace relulab;

namespace {

Params params_from_flat(const std::vector<int>& dims, const Vector& flat) {
  Params p(dims);
  if (static_cast<Eigen::Index>(p.size()) != flat.size()) throw ShapeError("flat vector has the wrong length");
  p.vec() = flat;
  return p;
}

OptimConfig make_optim(double beta1, double beta2, double epsilon, const std::string& schedule, double a, double b,
                       double weight_decay, bool decoupled) {
  OptimConfig c;
  c.beta1 = beta1;
  c.beta2 = beta2;
  c.epsilon = epsilon;
  if (schedule == "log_power") c.schedule = LogPowerSchedule{a, b};
  else if (schedule == "power") c.schedule = PowerSchedule{a, b};
  else throw ConfigError("schedule must be log_power or power");
  c.weight_decay = weight_decay;
  c.decoupled = decoupled;
  c.validate();
  return c;
}

Dataset make_dataset(const Matrix& inputs, const Matrix& targets, const std::string& loss) {
  Dataset d;
  d.inputs = inputs;
  d.targets = targets;
  d.loss_kind = loss == "cross_entropy" ? LossKind::cross_entropy_with_logits : LossKind::squared_error;
  d.validate();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "ReLU training-dynamics audits";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<InsufficientDataError>(m, "InsufficientDataError", base.ptr());
  py::register_exception<RefusalError>(m, "RefusalError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  m.def("param_count", [](const std::vector<int>& dims) { return raw_param_count(dims); });
  m.def("hidden_count", [](const std::vector<int>& dims) { return hidden_count(dims); });
  m.def(
      "init_params",
      [](const std::vector<int>& dims, double scale, std::uint64_t seed) {
        NetConfig c{dims, scale, seed};
        c.validate();
        return Vector(init_params(c).vec());
      },
      py::arg("layer_dims"), py::arg("init_scale") = 1.0, py::arg("seed") = 0);
  m.def(
      "forward",
      [](const std::vector<int>& dims, const Vector& flat, const Vector& x) {
        return forward(params_from_flat(dims, flat), x).output;
      },
      py::arg("layer_dims"), py::arg("params"), py::arg("x"));
  m.def(
      "loss_and_grad",
      [](const std::vector<int>& dims, const Vector& flat, const Matrix& inputs, const Matrix& targets,
         const std::string& loss) {
        const LossGrad lg = loss_and_grad(params_from_flat(dims, flat), make_dataset(inputs, targets, loss));
        return py::make_tuple(lg.loss, Vector(lg.grad.vec()));
      },
      py::arg("layer_dims"), py::arg("params"), py::arg("inputs"), py::arg("targets"),
      py::arg("loss") = "squared_error");
  m.def(
      "activation_pattern",
      [](const std::vector<int>& dims, const Vector& flat, const Vector& x) {
        return activation_pattern(params_from_flat(dims, flat), x).bits;
      },
      py::arg("layer_dims"), py::arg("params"), py::arg("x"));
  m.def(
      "margin",
      [](const std::vector<int>& dims, const Vector& flat, const Matrix& probes) {
        return margin(params_from_flat(dims, flat), probes);
      },
      py::arg("layer_dims"), py::arg("params"), py::arg("probes"));

  m.def(
      "schedule_alpha",
      [](long t, const std::string& schedule, double a, double b) {
        return schedule_alpha(t, make_optim(0.9, 0.999, 1e-8, schedule, a, b, 0.0, true));
      },
      py::arg("t"), py::arg("schedule") = "log_power", py::arg("a") = 0.05, py::arg("b") = 0.5);
  m.def(
      "adam_run",
      [](const std::vector<int>& dims, const Vector& flat, const Matrix& grads, double beta1, double beta2,
         double epsilon, const std::string& schedule, double a, double b, double weight_decay, bool decoupled) {
        // Applies one Adam step per gradient column; returns the parameter trajectory.
        const OptimConfig c = make_optim(beta1, beta2, epsilon, schedule, a, b, weight_decay, decoupled);
        Params p = params_from_flat(dims, flat);
        OptimState s = OptimState::zeros_like(p);
        Matrix traj(flat.size(), grads.cols() + 1);
        traj.col(0) = flat;
        for (Eigen::Index t = 0; t < grads.cols(); ++t) {
          AdamResult r = adam_step(p, params_from_flat(dims, grads.col(t)), s, c);
          p = std::move(r.params);
          s = std::move(r.state);
          traj.col(t + 1) = p.vec();
        }
        return traj;
      },
      py::arg("layer_dims"), py::arg("params"), py::arg("grads"), py::arg("beta1") = 0.9, py::arg("beta2") = 0.999,
      py::arg("epsilon") = 1e-8, py::arg("schedule") = "log_power", py::arg("a") = 0.05, py::arg("b") = 0.5,
      py::arg("weight_decay") = 0.0, py::arg("decoupled") = true);

  m.def("zaslavsky", [](long N, long d) { return py::int_(py::str(zaslavsky(N, d).str())); });
  m.def(
      "evaluate_bounds_json",
      [](const std::string& inputs_json, long horizon) {
        BoundInputs in;
        in.merge_json(nlohmann::json::parse(inputs_json));
        ReportExtras ex;
        ex.horizon = horizon;
        return to_json(evaluate_bounds(in, ex)).dump();
      },
      py::arg("inputs_json"), py::arg("horizon") = 0);

  m.def(
      "count_regions",
      [](const Matrix& normals, const Vector& offsets) {
        Arrangement arr;
        arr.dim = static_cast<int>(normals.cols());
        if (offsets.size() != normals.rows()) throw ShapeError("one offset per hyperplane");
        for (Eigen::Index i = 0; i < normals.rows(); ++i) {
          Hyperplane h;
          for (Eigen::Index k = 0; k < normals.cols(); ++k) h.normal.push_back(normals(i, k));
          h.offset = offsets(i);
          arr.planes.push_back(h);
        }
        return enumerate_regions(arr).count;
      },
      py::arg("normals"), py::arg("offsets"));
  m.def("sparse_tope_diameter", [](int bits, int k) {
    const auto d = sparse_tope_diameter(bits, k);
    return py::make_tuple(d.exactly_k, d.overall, d.vertices);
  });

  m.def(
      "effective_dimension",
      [](const Matrix& grads, int window) { return effective_dimension(grads, window).value; }, py::arg("grads"),
      py::arg("window") = 64);
  m.def("subgaussian_sigma", [](const Matrix& noise) {
    const auto s = subgaussian_sigma(noise);
    return py::make_tuple(s.sigma, s.tail_fraction);
  });
  m.def(
      "box_counting_dimension",
      [](const Matrix& points, const std::vector<double>& scales, int orientations) {
        const auto b = box_counting_dimension(points, scales, orientations);
        return py::make_tuple(b.dim_estimate, b.counts, b.degenerate);
      },
      py::arg("points"), py::arg("scales"), py::arg("orientations") = 90);
  m.def("covering_number", [](const Matrix& points, double eps) { return covering_number(points, eps); });
  m.def(
      "dudley_gap",
      [](const std::vector<std::pair<double, double>>& counts, long n, double lip) {
        return dudley_gap(counts, n, lip).value;
      },
      py::arg("cover_counts"), py::arg("n_samples"), py::arg("lipschitz_product") = 1.0);

  m.def(
      "run_experiment",
      [](const std::string& config_path, const std::string& report_dir, long steps) {
        ExperimentConfig c = load_config(config_path);
        if (!report_dir.empty()) c.report_dir = report_dir;
        if (steps > 0) c.steps = steps;
        c.validate();
        std::string run_dir;
        std::string report;
        {
          py::gil_scoped_release release;
          const RunResult r = run_experiment(c);
          run_dir = r.run_dir;
          report = r.outcome.report.dump();
        }
        return py::make_tuple(run_dir, report);
      },
      py::arg("config_path"), py::arg("report_dir") = "", py::arg("steps") = 0);
  m.def("audit_run_dir", [](const std::string& run_dir) {
    const RunResult r = audit_run_dir(run_dir);
    return r.outcome.report.dump();
  });
}
