#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "implicit_sparse/baselines.hpp"
#include "implicit_sparse/config.hpp"
#include "implicit_sparse/descent.hpp"
#include "implicit_sparse/design.hpp"
#include "implicit_sparse/experiments.hpp"
#include "implicit_sparse/lemma_suite.hpp"

namespace py = pybind11;
using namespace implicit_sparse;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

DenseMatrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-d array");
  const auto* p = a.data();
  return DenseMatrix(a.shape(0), a.shape(1), std::vector<double>(p, p + a.size()));
}

RealVector to_vector(const Array& a) {
  if (a.ndim() != 1) throw DimensionError("expected a 1-d array");
  return RealVector(a.data(), a.data() + a.size());
}

Array to_array(const RealVector& v) {
  Array out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::dict trajectory_dict(const Trajectory& tr) {
  py::list ts;
  std::vector<RealVector> ws;
  for (const auto& s : tr.snapshots) {
    ts.append(s.t);
    ws.push_back(s.w);
  }
  const std::size_t d = ws.empty() ? tr.final_state.u.size() : ws.front().size();
  Array w({static_cast<py::ssize_t>(ws.size()), static_cast<py::ssize_t>(d)});
  double* out = w.mutable_data();
  for (const auto& row : ws) out = std::copy(row.begin(), row.end(), out);
  py::dict r;
  r["t"] = ts;
  r["w"] = w;
  r["multipliers"] = to_array(tr.final_state.multipliers);
  r["stop_reason"] = to_string(tr.stop_reason);
  return r;
}

Trajectory run_descent(bool alg2, const Array& X, const Array& y, double eta, double alpha,
                       std::size_t max_iters, std::size_t snapshot_every, std::size_t tau, double z_hat) {
  const DenseMatrix Xm = to_matrix(X);
  const RealVector yv = to_vector(y);
  DescentConfig cfg;
  cfg.eta = eta;
  cfg.alpha = alpha;
  cfg.max_iters = max_iters;
  cfg.snapshot_every = snapshot_every;
  cfg.tau = tau;
  cfg.z_hat = z_hat;
  if (alg2 && cfg.z_hat <= 0.0) cfg.z_hat = estimate_wmax(Xm, yv).z_hat;
  return alg2 ? run_alg2(Xm, yv, cfg) : run_alg1(Xm, yv, cfg);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Implicitly regularized gradient descent for sparse regression";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<SingularityError>(m, "SingularityError", PyExc_ArithmeticError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_ArithmeticError);
  py::register_exception<CapacityError>(m, "CapacityError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  m.def(
      "estimate_wmax",
      [](const Array& X, const Array& y, double eta_tilde) {
        const WmaxEstimate e = estimate_wmax(to_matrix(X), to_vector(y), eta_tilde);
        py::dict r;
        r["z_hat"] = e.z_hat;
        r["f_max"] = e.f_max;
        r["eta_tilde"] = e.eta_tilde;
        r["eta"] = e.eta;
        r["degenerate"] = e.degenerate;
        return r;
      },
      py::arg("X"), py::arg("y"), py::arg("eta_tilde") = kDefaultEtaTilde);

  m.def(
      "run_alg1",
      [](const Array& X, const Array& y, double eta, double alpha, std::size_t max_iters,
         std::size_t snapshot_every) {
        return trajectory_dict(run_descent(false, X, y, eta, alpha, max_iters, snapshot_every, 10, 0.0));
      },
      py::arg("X"), py::arg("y"), py::arg("eta"), py::arg("alpha") = 1e-12,
      py::arg("max_iters") = 2000, py::arg("snapshot_every") = 10);

  m.def(
      "run_alg2",
      [](const Array& X, const Array& y, double eta, double alpha, std::size_t max_iters,
         std::size_t snapshot_every, std::size_t tau, double z_hat) {
        return trajectory_dict(run_descent(true, X, y, eta, alpha, max_iters, snapshot_every, tau, z_hat));
      },
      py::arg("X"), py::arg("y"), py::arg("eta"), py::arg("alpha") = 1e-12,
      py::arg("max_iters") = 2000, py::arg("snapshot_every") = 10, py::arg("tau") = 10,
      py::arg("z_hat") = 0.0);

  m.def(
      "lasso",
      [](const Array& X, const Array& y, double lambda, double tol, std::size_t max_sweeps) {
        LassoConfig cfg;
        cfg.lambda = lambda;
        cfg.tol = tol;
        cfg.max_sweeps = max_sweeps;
        const LassoResult r = lasso_cd(to_matrix(X), to_vector(y), cfg);
        return py::make_tuple(to_array(r.w), r.converged, r.sweeps);
      },
      py::arg("X"), py::arg("y"), py::arg("lam"), py::arg("tol") = 1e-10,
      py::arg("max_sweeps") = 100000);

  m.def(
      "soft_threshold",
      [](const Array& w, double lambda) { return to_array(soft_threshold_closed_form(to_vector(w), lambda)); },
      py::arg("w_ls"), py::arg("lam"));

  m.def(
      "oracle_ls",
      [](const Array& X, const Array& y, const IndexSet& support) {
        return to_array(oracle_ls(to_matrix(X), to_vector(y), support));
      },
      py::arg("X"), py::arg("y"), py::arg("support"));

  m.def("phase_transition_threshold", &phase_transition_threshold, py::arg("sigma"), py::arg("d"),
        py::arg("n"));

  m.def(
      "generate_design",
      [](const std::string& kind, std::size_t n, std::size_t d, std::uint64_t seed, double mu) {
        DesignKind k;
        k.variant = parse_design_variant(kind);
        k.mu = mu;
        const DenseMatrix X = gen_design(k, n, d, SeededRng(seed, 0));
        Array out({static_cast<py::ssize_t>(n), static_cast<py::ssize_t>(d)});
        std::copy(X.data().begin(), X.data().end(), out.mutable_data());
        return out;
      },
      py::arg("kind"), py::arg("n"), py::arg("d"), py::arg("seed") = 0, py::arg("mu") = 0.0);

  m.def(
      "run_sweep",
      [](const std::string& config_json, std::optional<std::string> preset) {
        std::optional<Preset> p;
        if (preset) p = parse_preset(*preset);
        const ExperimentConfig cfg = parse_config_text(config_json, p);
        SweepResult r;
        {
          py::gil_scoped_release release;
          r = run_sweep(cfg);
        }
        std::ostringstream trials, summary;
        write_trial_csv(trials, r.records);
        write_summary_csv(summary, r.summaries);
        return py::make_tuple(trials.str(), summary.str());
      },
      py::arg("config_json") = "{}", py::arg("preset") = py::none(),
      "Runs a sweep and returns (trials_csv, summary_csv).");

  m.def(
      "lemma_suite",
      [](std::size_t cases, std::uint64_t seed) {
        dynamics::LemmaSuiteOptions opt;
        opt.cases = cases;
        opt.seed = seed;
        py::dict out;
        for (const auto& r : dynamics::run_lemma_suite(opt)) out[py::str(r.name)] = r.failures;
        return out;
      },
      py::arg("cases") = 200, py::arg("seed") = dynamics::LemmaSuiteOptions{}.seed,
      "Failure count per property.");
}
