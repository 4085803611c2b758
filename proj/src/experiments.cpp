#include "implicit_sparse/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <map>
#include <ostream>
#include <thread>

#include "implicit_sparse/baselines.hpp"

namespace implicit_sparse {

namespace {

constexpr std::uint64_t kDesignTag = 0x11;
constexpr std::uint64_t kSignalTag = 0x12;
constexpr std::uint64_t kNoiseTag = 0x13;
constexpr std::uint64_t kValDesignTag = 0x21;
constexpr std::uint64_t kValNoiseTag = 0x22;

const std::vector<std::pair<Family, const char*>>& family_names() {
  static const std::vector<std::pair<Family, const char*>> names = {
      {Family::init_size, "init-size"},
      {Family::alg_comparison, "alg-comparison"},
      {Family::phase_transition_gamma, "phase-transition-gamma"},
      {Family::phase_transition_sigma, "phase-transition-sigma"},
      {Family::phase_transition_n, "phase-transition-n"},
      {Family::dimension_bias, "dimension-bias"},
      {Family::sample_complexity, "sample-complexity"},
      {Family::rip_violation, "rip-violation"},
  };
  return names;
}

bool is_count_axis(const std::string& name) { return name == "n" || name == "d" || name == "k"; }

bool known_axis(const std::string& name) {
  return is_count_axis(name) || name == "gamma" || name == "sigma" || name == "alpha" ||
         name == "mu";
}

void check_axis(const SweepAxis& axis) {
  if (!known_axis(axis.name)) throw ParameterError("unknown sweep axis '" + axis.name + "'");
  if (axis.values.empty()) throw ParameterError("sweep axis '" + axis.name + "' has no values");
  for (double v : axis.values) {
    if (!std::isfinite(v)) throw ParameterError("sweep axis '" + axis.name + "' has a non-finite value");
    if (is_count_axis(axis.name) && (v < 1.0 || v != std::floor(v))) {
      throw ParameterError("sweep axis '" + axis.name + "' needs positive integer values");
    }
  }
}

void apply_setting(ExperimentConfig& cfg, const std::string& name, double value) {
  if (name == "n") cfg.n = static_cast<std::size_t>(value);
  else if (name == "d") cfg.d = static_cast<std::size_t>(value);
  else if (name == "k") cfg.k = static_cast<std::size_t>(value);
  else if (name == "gamma") cfg.gamma = value;
  else if (name == "sigma") cfg.sigma = value;
  else if (name == "alpha") cfg.alpha = value;
  else if (name == "mu") cfg.design = DesignKind::equicorrelated(value);
  else throw ParameterError("unknown sweep axis '" + name + "'");
}

// Smallest d over the grid; the signal support is drawn inside it so that paired trials
// share the same w* restricted to the common columns.
std::size_t signal_dimension(const ExperimentConfig& cfg) {
  std::size_t d = cfg.d;
  auto scan = [&](const SweepAxis& axis) {
    if (axis.name != "d") return;
    for (double v : axis.values) d = std::min(d, static_cast<std::size_t>(v));
  };
  if (!cfg.axis.values.empty()) scan(cfg.axis);
  if (cfg.axis2) scan(*cfg.axis2);
  return d;
}

void validate_point(const ExperimentConfig& c) {
  if (c.n == 0 || c.d == 0) throw ParameterError("n and d must be positive");
  if (c.k == 0) throw ParameterError("k must be positive");
  if (c.k > c.d) throw ParameterError("k must not exceed d");
  if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ParameterError("alpha must lie in (0, 1)");
  if (!(c.sigma >= 0.0) || !std::isfinite(c.sigma)) throw ParameterError("sigma must be >= 0");
  if (c.gamma == 0.0 || !std::isfinite(c.gamma)) throw ParameterError("gamma must be nonzero");
  if (c.design.variant == DesignKind::Variant::gaussian_equicorrelated &&
      !(c.design.mu >= 0.0 && c.design.mu < 1.0)) {
    throw ParameterError("mu must lie in [0, 1)");
  }
}

struct Metrics {
  double l2_sq = 0.0;
  double linf_on = 0.0;
  double linf_off = 0.0;
};

Metrics metrics_of(std::span<const double> w, const SparseSignal& truth) {
  Metrics m;
  std::vector<bool> on(w.size(), false);
  for (std::size_t j : truth.support) on[j] = true;
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double diff = w[j] - truth.w_star[j];
    m.l2_sq += diff * diff;
    if (on[j]) m.linf_on = std::max(m.linf_on, std::abs(diff));
    else m.linf_off = std::max(m.linf_off, std::abs(w[j]));
  }
  return m;
}

TrialRecord make_record(const ExperimentConfig& cfg, const AxisPoint& point, std::size_t trial,
                        std::uint64_t seed, const char* estimator, std::span<const double> w,
                        const SparseSignal& truth) {
  TrialRecord r;
  r.family = to_string(cfg.family);
  r.axis_value = point.label;
  r.trial = trial;
  r.seed = seed;
  r.estimator = estimator;
  const Metrics m = metrics_of(w, truth);
  r.l2_error_sq = m.l2_sq;
  r.linf_on_support = m.linf_on;
  r.linf_off_support = m.linf_off;
  return r;
}

std::size_t oracle_snapshot(const Trajectory& traj, const SparseSignal& truth) {
  std::size_t best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
    const double err = squared_norm(subtract(traj.snapshots[i].w, truth.w_star));
    if (err < best_err) {
      best_err = err;
      best = i;
    }
  }
  return best;
}

using Instance = TrialInstance;

Trajectory run_descent(Algorithm alg, const Instance& inst, const DescentConfig& dc) {
  return alg == Algorithm::alg1 ? run_alg1(inst.X, inst.y, dc) : run_alg2(inst.X, inst.y, dc);
}

// Validation-stopped and oracle-stopped records from one descent run.
void descent_records(const ExperimentConfig& c, const AxisPoint& point, std::size_t trial,
                     std::uint64_t seed, const Instance& inst, std::vector<TrialRecord>& out) {
  const DescentConfig dc = descent_config_for(inst);
  Trajectory traj;
  bool failed = false;
  std::string reason;
  try {
    traj = run_descent(c.algorithm, inst, dc);
    reason = to_string(traj.stop_reason);
  } catch (const DivergenceError& e) {
    traj = e.partial();
    failed = true;
    reason = "diverged";
  }

  if (traj.snapshots.empty()) {
    const RealVector zero(c.d, 0.0);
    for (const char* name : {estimators::gd, estimators::gd_oracle_t}) {
      TrialRecord r = make_record(c, point, trial, seed, name, zero, inst.truth);
      r.failed = true;
      r.stop_reason = reason;
      out.push_back(std::move(r));
    }
    return;
  }

  const ValidationChoice choice = validation_stop(traj, inst.X_val, inst.y_val);
  const std::size_t best = oracle_snapshot(traj, inst.truth);
  const std::pair<const char*, std::size_t> picks[] = {{estimators::gd, choice.index},
                                                       {estimators::gd_oracle_t, best}};
  for (const auto& [name, idx] : picks) {
    const Snapshot& snap = traj.snapshots[idx];
    TrialRecord r = make_record(c, point, trial, seed, name, snap.w, inst.truth);
    r.selected = static_cast<double>(snap.t);
    r.iterations_used = failed ? snap.t : traj.final_state.t;
    r.stop_reason = reason;
    r.failed = failed;
    out.push_back(std::move(r));
  }
}

// Iterations each algorithm needs to reach the matched error level.
void comparison_records(const ExperimentConfig& c, const AxisPoint& point, std::size_t trial,
                        std::uint64_t seed, const Instance& inst, std::vector<TrialRecord>& out) {
  DescentConfig dc = descent_config_for(inst);
  dc.monitor = StopMonitor{inst.truth.w_star, std::nullopt, c.target_l2_sq};
  const std::pair<const char*, Algorithm> runs[] = {{estimators::gd_alg1, Algorithm::alg1},
                                                    {estimators::gd_alg2, Algorithm::alg2}};
  for (const auto& [name, alg] : runs) {
    Trajectory traj;
    bool failed = false;
    std::size_t at = 0;
    try {
      traj = run_descent(alg, inst, dc);
      at = traj.final_state.t;
    } catch (const DivergenceError& e) {
      traj = e.partial();
      failed = true;
      at = e.at_iteration();
    }
    const RealVector w = traj.snapshots.empty() ? RealVector(c.d, 0.0) : traj.snapshots.back().w;
    TrialRecord r = make_record(c, point, trial, seed, name, w, inst.truth);
    if (!failed) {
      const RealVector final_w = traj.final_state.w();
      const Metrics m = metrics_of(final_w, inst.truth);
      r.l2_error_sq = m.l2_sq;
      r.linf_on_support = m.linf_on;
      r.linf_off_support = m.linf_off;
    }
    r.selected = static_cast<double>(at);
    r.iterations_used = at;
    r.stop_reason = failed ? "diverged" : to_string(traj.stop_reason);
    // Not reaching the target within the budget leaves no iteration count to compare.
    r.failed = failed || traj.stop_reason != StopReason::target_reached;
    out.push_back(std::move(r));
  }
}

void baseline_records(const ExperimentConfig& c, const AxisPoint& point, std::size_t trial,
                      std::uint64_t seed, const Instance& inst, std::vector<TrialRecord>& out) {
  const double lmax = lasso_lambda_max(inst.X, inst.y);
  if (lmax > 0.0) {
    LassoConfig base;
    base.tol = c.lasso.tol;
    base.max_sweeps = c.lasso.max_sweeps;
    const LassoPath path = lasso_path(inst.X, inst.y, lmax, c.lasso.min_ratio, c.lasso.path_length, base);
    const LambdaSelection sel = oracle_lambda_select(path, inst.truth);
    TrialRecord r = make_record(c, point, trial, seed, estimators::lasso_oracle, sel.solution, inst.truth);
    r.selected = sel.lambda;
    std::size_t sweeps = 0;
    for (std::size_t s : path.sweeps) sweeps += s;
    r.iterations_used = sweeps;
    r.stop_reason = path.unconverged == 0 ? "converged" : "unconverged";
    out.push_back(std::move(r));
  } else {
    const RealVector zero(c.d, 0.0);
    TrialRecord r = make_record(c, point, trial, seed, estimators::lasso_oracle, zero, inst.truth);
    r.selected = 0.0;
    r.stop_reason = "converged";
    out.push_back(std::move(r));
  }

  try {
    const RealVector w = oracle_ls(inst.X, inst.y, inst.truth.support);
    TrialRecord r = make_record(c, point, trial, seed, estimators::oracle_ls, w, inst.truth);
    r.stop_reason = "closed-form";
    out.push_back(std::move(r));
  } catch (const SingularityError&) {
    const RealVector zero(c.d, 0.0);
    TrialRecord r = make_record(c, point, trial, seed, estimators::oracle_ls, zero, inst.truth);
    r.stop_reason = "singular";
    r.failed = true;
    out.push_back(std::move(r));
  }

  const RealVector zero(c.d, 0.0);
  TrialRecord r = make_record(c, point, trial, seed, estimators::null_estimator, zero, inst.truth);
  r.stop_reason = "closed-form";
  out.push_back(std::move(r));
}

const TrialRecord* find_record(const std::vector<TrialRecord>& records, const char* name) {
  for (const TrialRecord& r : records)
    if (r.estimator == name) return &r;
  return nullptr;
}

}  // namespace

std::string to_string(Family family) {
  for (const auto& [f, name] : family_names())
    if (f == family) return name;
  return "unknown";
}

Family parse_family(const std::string& name) {
  for (const auto& [f, n] : family_names())
    if (name == n) return f;
  throw ParameterError("unknown experiment family '" + name + "'");
}

std::string to_string(Preset preset) { return preset == Preset::desk ? "desk" : "paper"; }

Preset parse_preset(const std::string& name) {
  if (name == "desk") return Preset::desk;
  if (name == "paper") return Preset::paper;
  throw ParameterError("unknown preset '" + name + "' (expected desk or paper)");
}

ExperimentConfig default_config(Family family, Preset preset) {
  ExperimentConfig c;
  c.family = family;
  c.preset = preset;
  const bool desk = preset == Preset::desk;
  if (desk) {
    c.n = 250;
    c.d = 2000;
    c.k = 10;
    c.repetitions = 15;
  }
  switch (family) {
    case Family::init_size:
      c.algorithm = Algorithm::alg1;
      c.k = 5;
      c.n = 100;
      c.sigma = 0.5;
      c.eta = 0.05;
      c.axis = {"alpha", {1e-2, 1e-4, 1e-8, 1e-12}};
      break;
    case Family::alg_comparison:
      c.n = 250;
      c.d = desk ? 1000 : 10000;
      c.k = 7;
      c.sigma = 0.1;
      c.signal = SignalSpec::Variant::geometric;
      c.signal_base = 2.0;
      c.eta = 1.0 / (20.0 * 64.0);
      c.repetitions = desk ? 10 : 30;
      c.max_iters = 100000;
      c.snapshot_every = 100;
      c.target_l2_sq = 0.01;
      break;
    case Family::phase_transition_gamma:
      c.axis = {"gamma", desk ? std::vector<double>{0.0625, 0.125, 0.25, 0.5, 1.0, 1.5, 2.0}
                              : std::vector<double>{0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0, 1.5, 2.0}};
      break;
    case Family::phase_transition_sigma:
      c.axis = {"sigma", {0.25, 0.5, 1.0, 2.0, 4.0, 8.0}};
      break;
    case Family::phase_transition_n:
      c.gamma = 0.25;
      c.axis = {"n", desk ? std::vector<double>{125, 250, 500, 1000, 2000}
                          : std::vector<double>{250, 500, 1000, 2000, 4000}};
      break;
    case Family::dimension_bias:
      if (desk) {
        c.n = 250;
        c.k = 5;
        c.sigma = 0.5;
        c.axis = {"d", {500, 2000, 8000}};
      } else {
        c.axis = {"d", {1000, 4000, 16000}};
      }
      break;
    case Family::sample_complexity:
      c.d = desk ? 1000 : 5000;
      c.axis = {"n", desk ? std::vector<double>{50, 100, 200, 400}
                          : std::vector<double>{100, 200, 400, 800}};
      c.axis2 = SweepAxis{"k", desk ? std::vector<double>{5, 10, 20} : std::vector<double>{5, 10, 20, 40}};
      break;
    case Family::rip_violation:
      c.design = DesignKind::gaussian();
      c.axis = {"gamma", {0.0625, 0.125, 0.25, 0.5, 1.0, 2.0}};
      c.axis2 = SweepAxis{"mu", {0.0, 0.5}};
      break;
  }
  return c;
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.repetitions == 0) throw ParameterError("repetitions must be positive");
  if (cfg.tau == 0) throw ParameterError("tau must be positive");
  if (cfg.max_iters == 0) throw ParameterError("max_iters must be positive");
  if (cfg.snapshot_every == 0) throw ParameterError("snapshot_every must be positive");
  if (!(cfg.validation_fraction > 0.0 && cfg.validation_fraction <= 1.0)) {
    throw ParameterError("validation_fraction must lie in (0, 1]");
  }
  if (!(cfg.target_l2_sq > 0.0)) throw ParameterError("target_l2_sq must be positive");
  if (cfg.eta && !(*cfg.eta > 0.0 && std::isfinite(*cfg.eta))) {
    throw ParameterError("eta must be positive");
  }
  if (!(cfg.eta_tilde > 0.0)) throw ParameterError("eta_tilde must be positive");
  if (cfg.signal == SignalSpec::Variant::geometric && !(cfg.signal_base > 1.0)) {
    throw ParameterError("geometric signal needs base > 1");
  }
  if (cfg.lasso.path_length == 0) throw ParameterError("lasso path_length must be positive");
  if (!(cfg.lasso.min_ratio > 0.0 && cfg.lasso.min_ratio < 1.0)) {
    throw ParameterError("lasso min_ratio must lie in (0, 1)");
  }
  if (!(cfg.lasso.tol > 0.0)) throw ParameterError("lasso tol must be positive");
  if (!cfg.axis.values.empty() || !cfg.axis.name.empty()) check_axis(cfg.axis);
  if (cfg.axis2) {
    if (cfg.axis.values.empty()) throw ParameterError("axis2 given without axis");
    check_axis(*cfg.axis2);
    if (cfg.axis2->name == cfg.axis.name) throw ParameterError("axis and axis2 must differ");
  }
  for (const AxisPoint& p : axis_points(cfg)) validate_point(at_point(cfg, p));
}

ValidationChoice validation_stop(const Trajectory& trajectory, const DenseMatrix& X_val,
                                 std::span<const double> y_val) {
  if (trajectory.snapshots.empty()) throw ParameterError("validation_stop: empty trajectory");
  if (X_val.rows() != y_val.size()) throw DimensionError("validation_stop: y_val length mismatch");
  ValidationChoice best;
  best.loss = std::numeric_limits<double>::infinity();
  RealVector pred(X_val.rows());
  for (std::size_t i = 0; i < trajectory.snapshots.size(); ++i) {
    const Snapshot& s = trajectory.snapshots[i];
    if (s.w.size() != X_val.cols()) throw DimensionError("validation_stop: snapshot length mismatch");
    mat_apply_into(X_val, s.w, pred);
    double loss = 0.0;
    for (std::size_t r = 0; r < pred.size(); ++r) {
      const double e = pred[r] - y_val[r];
      loss += e * e;
    }
    if (i == 0 || loss < best.loss) {
      best = {i, s.t, loss};
    }
  }
  return best;
}

double phase_transition_threshold(double sigma, std::size_t d, std::size_t n) {
  if (!(sigma > 0.0) || d == 0 || n == 0) {
    throw ParameterError("phase_transition_threshold: inputs must be positive");
  }
  return 2.0 * sigma * std::sqrt(2.0 * std::log(2.0 * static_cast<double>(d))) /
         std::sqrt(static_cast<double>(n));
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw ParameterError("percentile: no values");
  if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("percentile: p must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

std::vector<AxisPoint> axis_points(const ExperimentConfig& cfg) {
  if (cfg.axis.values.empty()) return {AxisPoint{{}, ""}};
  std::vector<AxisPoint> points;
  for (double a : cfg.axis.values) {
    if (!cfg.axis2) {
      points.push_back({{{cfg.axis.name, a}}, format_double(a)});
      continue;
    }
    for (double b : cfg.axis2->values) {
      points.push_back({{{cfg.axis.name, a}, {cfg.axis2->name, b}},
                        cfg.axis.name + "=" + format_double(a) + ";" + cfg.axis2->name + "=" +
                            format_double(b)});
    }
  }
  return points;
}

ExperimentConfig at_point(const ExperimentConfig& cfg, const AxisPoint& point) {
  ExperimentConfig c = cfg;
  for (const auto& [name, value] : point.settings) apply_setting(c, name, value);
  return c;
}

TrialInstance generate_instance(const ExperimentConfig& cfg, const AxisPoint& point,
                                std::size_t trial_index) {
  TrialInstance inst;
  inst.cfg = at_point(cfg, point);
  const ExperimentConfig& c = inst.cfg;
  validate_point(c);
  inst.seed = cfg.base_seed + trial_index;
  const SeededRng root(inst.seed, 0);
  inst.X = gen_design(c.design, c.n, c.d, root.derive(kDesignTag));

  SignalSpec spec;
  spec.variant = c.signal;
  spec.gamma = c.gamma;
  spec.base = c.signal_base;
  spec.d = std::min(signal_dimension(cfg), c.d);
  spec.k = c.k;
  spec.signs = c.random_signs ? SignPattern::random_signs : SignPattern::all_positive;
  SparseSignal small = gen_signal(spec, root.derive(kSignalTag));
  RealVector w_star = std::move(small.w_star);
  w_star.resize(c.d, 0.0);
  inst.truth = SparseSignal::from_vector(std::move(w_star));

  inst.xi = gen_noise(c.sigma, c.n, root.derive(kNoiseTag));
  inst.y = add(mat_apply(inst.X, inst.truth.w_star), inst.xi);

  const auto n_val = static_cast<std::size_t>(
      std::ceil(c.validation_fraction * static_cast<double>(c.n)));
  inst.X_val = gen_design(c.design, n_val, c.d, root.derive(kValDesignTag));
  const RealVector xi_val = gen_noise(c.sigma, n_val, root.derive(kValNoiseTag));
  inst.y_val = add(mat_apply(inst.X_val, inst.truth.w_star), xi_val);
  return inst;
}

DescentConfig descent_config_for(const TrialInstance& inst) {
  const ExperimentConfig& c = inst.cfg;
  const WmaxEstimate est = estimate_wmax(inst.X, inst.y, c.eta_tilde);
  DescentConfig dc;
  dc.alpha = c.alpha;
  dc.max_iters = c.max_iters;
  dc.tau = c.tau;
  dc.z_hat = est.z_hat;
  dc.snapshot_every = c.snapshot_every;
  if (c.eta) {
    dc.eta = *c.eta;
  } else {
    if (est.degenerate) throw ParameterError("automatic step size needs a nonzero response");
    dc.eta = est.eta;
  }
  return dc;
}

std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, const AxisPoint& point,
                                   std::size_t trial_index) {
  const Instance inst = generate_instance(cfg, point, trial_index);
  const ExperimentConfig& c = inst.cfg;
  const std::uint64_t seed = inst.seed;

  std::vector<TrialRecord> out;
  if (c.family == Family::alg_comparison) {
    comparison_records(c, point, trial_index, seed, inst, out);
    return out;
  }
  descent_records(c, point, trial_index, seed, inst, out);
  baseline_records(c, point, trial_index, seed, inst, out);

  if (c.family == Family::sample_complexity) {
    const TrialRecord* gd = find_record(out, estimators::gd);
    const TrialRecord* lasso = find_record(out, estimators::lasso_oracle);
    TrialRecord r;
    r.family = to_string(c.family);
    r.axis_value = point.label;
    r.trial = trial_index;
    r.seed = seed;
    r.estimator = estimators::log2_ratio;
    r.failed = gd->failed || lasso->failed || !(gd->l2_error_sq > 0.0) || !(lasso->l2_error_sq > 0.0);
    r.stop_reason = r.failed ? "undefined" : "derived";
    r.l2_error_sq = r.failed ? 0.0 : std::log2(gd->l2_error_sq / lasso->l2_error_sq);
    out.push_back(std::move(r));
  }
  return out;
}

SweepResult run_sweep(const ExperimentConfig& cfg) {
  validate(cfg);
  const std::vector<AxisPoint> points = axis_points(cfg);
  const std::size_t tasks = points.size() * cfg.repetitions;
  std::vector<std::vector<TrialRecord>> slots(tasks);
  std::vector<std::exception_ptr> errors(tasks);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks; i = next++) {
      try {
        slots[i] = run_trial(cfg, points[i / cfg.repetitions], i % cfg.repetitions);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::size_t threads = cfg.threads == 0 ? std::thread::hardware_concurrency() : cfg.threads;
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(tasks, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  SweepResult result;
  for (auto& slot : slots)
    for (auto& r : slot) result.records.push_back(std::move(r));
  result.summaries = summarize(result.records);
  return result;
}

std::vector<SweepSummary> summarize(const std::vector<TrialRecord>& records) {
  // Groups keep the order of first appearance.
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::size_t>> groups;
  std::map<std::pair<std::string, std::string>, std::string> family_of;
  for (const TrialRecord& r : records) {
    const auto key = std::make_pair(r.axis_value, r.estimator);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) {
      order.push_back(key);
      family_of[key] = r.family;
    }
    if (r.failed) ++it->second.second;
    else it->second.first.push_back(r.l2_error_sq);
  }
  std::vector<SweepSummary> out;
  for (const auto& key : order) {
    const auto& [values, excluded] = groups.at(key);
    SweepSummary s;
    s.family = family_of.at(key);
    s.axis_value = key.first;
    s.estimator = key.second;
    s.excluded_trials = excluded;
    if (values.empty()) {
      s.median_l2 = s.p25_l2 = s.p75_l2 = std::numeric_limits<double>::quiet_NaN();
    } else {
      s.median_l2 = percentile(values, 0.5);
      s.p25_l2 = percentile(values, 0.25);
      s.p75_l2 = percentile(values, 0.75);
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_trial_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
  os << "family,axis_value,trial,estimator,selected_t_or_lambda,l2_error_sq,linf_on_support,"
        "linf_off_support,iterations_used,stop_reason\n";
  for (const TrialRecord& r : records) {
    os << r.family << ',' << r.axis_value << ',' << r.trial << ',' << r.estimator << ','
       << (r.selected ? format_double(*r.selected) : "") << ',' << format_double(r.l2_error_sq)
       << ',' << format_double(r.linf_on_support) << ',' << format_double(r.linf_off_support)
       << ',' << r.iterations_used << ',' << r.stop_reason << '\n';
  }
}

void write_summary_csv(std::ostream& os, const std::vector<SweepSummary>& summaries) {
  os << "family,axis_value,estimator,median_l2,p25_l2,p75_l2,excluded_trials\n";
  for (const SweepSummary& s : summaries) {
    os << s.family << ',' << s.axis_value << ',' << s.estimator << ',' << format_double(s.median_l2)
       << ',' << format_double(s.p25_l2) << ',' << format_double(s.p75_l2) << ','
       << s.excluded_trials << '\n';
  }
}

}  // namespace implicit_sparse
