#include "implicit_sparse/descent.hpp"

#include <algorithm>
#include <cmath>

namespace implicit_sparse {

namespace {

void check_problem(const DenseMatrix& X, std::span<const double> y, std::size_t d,
                   const char* op) {
  if (X.rows() != y.size()) {
    throw DimensionError(std::string(op) + ": X has " + std::to_string(X.rows()) +
                         " rows but y has length " + std::to_string(y.size()));
  }
  if (X.cols() != d) {
    throw DimensionError(std::string(op) + ": X has " + std::to_string(X.cols()) +
                         " columns but the iterate has length " + std::to_string(d));
  }
}

// Scratch buffers for repeated gradient evaluations.
struct Workspace {
  RealVector residual;
  RealVector grad;
  RealVector w;

  Workspace(std::size_t n, std::size_t d) : residual(n), grad(d), w(d) {}
};

// grad <- X^T (X w - y) / n
void loss_gradient(const DenseMatrix& X, std::span<const double> y, Workspace& ws) {
  mat_apply_into(X, ws.w, ws.residual);
  for (std::size_t i = 0; i < ws.residual.size(); ++i) ws.residual[i] -= y[i];
  mat_t_apply_into(X, ws.residual, ws.grad);
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  for (double& g : ws.grad) g *= inv_n;
}

void refresh_w(const DescentState& s, RealVector& w) {
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = s.u[j] * s.u[j] - s.v[j] * s.v[j];
}

// In-place multiplicative update; ws.w must hold w_t on entry and holds w_{t+1} on exit.
void step_in_place(DescentState& s, const DenseMatrix& X, std::span<const double> y,
                   Workspace& ws) {
  loss_gradient(X, y, ws);
  for (std::size_t j = 0; j < s.u.size(); ++j) {
    const double r = 4.0 * s.base_eta * s.multipliers[j] * ws.grad[j];
    s.u[j] *= 1.0 - r;
    s.v[j] *= 1.0 + r;
  }
  ++s.t;
  refresh_w(s, ws.w);
}

// ||e_t||_inf for the signed support of `reference`.
double error_part_inf(const DescentState& s, std::span<const double> w,
                      std::span<const double> reference) {
  double m = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    double e;
    if (reference[j] > 0) {
      e = s.v[j] * s.v[j];
    } else if (reference[j] < 0) {
      e = s.u[j] * s.u[j];
    } else {
      e = std::abs(w[j]);
    }
    m = std::max(m, e);
  }
  return m;
}

bool target_hit(const StopMonitor& mon, std::span<const double> w) {
  double linf = 0.0;
  double l2 = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double diff = w[j] - mon.reference[j];
    linf = std::max(linf, std::abs(diff));
    l2 += diff * diff;
  }
  if (mon.target_linf && linf <= *mon.target_linf) return true;
  if (mon.target_l2_sq && l2 <= *mon.target_l2_sq) return true;
  return false;
}

Trajectory run_descent(const DenseMatrix& X, std::span<const double> y, const DescentConfig& cfg,
                       bool doubling) {
  const std::size_t d = X.cols();
  check_problem(X, y, d, doubling ? "run_alg2" : "run_alg1");
  if (!(cfg.eta > 0.0)) throw ParameterError("descent: eta must be positive");
  if (!(cfg.alpha > 0.0)) throw ParameterError("descent: alpha must be positive");
  if (cfg.snapshot_every == 0) throw ParameterError("descent: snapshot_every must be >= 1");
  if (doubling && !(cfg.z_hat > 0.0)) throw ParameterError("run_alg2: z_hat must be positive");
  if (doubling && cfg.tau == 0) throw ParameterError("run_alg2: tau must be >= 1");
  if (cfg.monitor && cfg.monitor->reference.size() != d) {
    throw DimensionError("descent: monitor reference has the wrong length");
  }
  const bool safety = std::isfinite(cfg.safety_stop_threshold);
  if (safety && !cfg.monitor) {
    throw ParameterError("descent: safety stop requires a monitor with the reference signal");
  }

  Trajectory traj;
  DescentState& s = traj.final_state;
  s = initial_state(d, cfg.alpha, cfg.eta);
  Workspace ws(X.rows(), d);
  refresh_w(s, ws.w);

  const std::size_t period = doubling ? doubling_period(cfg.tau, cfg.alpha) : 0;
  const double blowup = 1e6 * (1.0 + cfg.z_hat);

  auto take_snapshot = [&] {
    if (traj.snapshots.empty() || traj.snapshots.back().t != s.t) {
      traj.snapshots.push_back({s.t, ws.w});
    }
  };

  while (s.t < cfg.max_iters) {
    if (period > 0 && s.t > 0 && s.t % period == 0 && s.t / period >= 2) {
      const std::size_t m = s.t / period;
      const double threshold = std::ldexp(cfg.z_hat, -static_cast<int>(m) - 1);
      for (std::size_t j = 0; j < d; ++j) {
        if (std::max(s.u[j] * s.u[j], s.v[j] * s.v[j]) <= threshold) s.multipliers[j] *= 2.0;
      }
    }

    step_in_place(s, X, y, ws);

    const double wmax = inf_norm(ws.w);
    if (!std::isfinite(wmax) || wmax > blowup) {
      throw DivergenceError("descent diverged at iteration " + std::to_string(s.t) +
                                " (||w||_inf = " + std::to_string(wmax) +
                                "); the step size is too large",
                            std::move(traj), s.t);
    }

    if (s.t % cfg.snapshot_every == 0) take_snapshot();

    if (cfg.monitor) {
      if (safety && error_part_inf(s, ws.w, cfg.monitor->reference) > cfg.safety_stop_threshold) {
        take_snapshot();
        traj.stop_reason = StopReason::safety_stop;
        return traj;
      }
      if (target_hit(*cfg.monitor, ws.w)) {
        take_snapshot();
        traj.stop_reason = StopReason::target_reached;
        return traj;
      }
    }
  }
  take_snapshot();
  traj.stop_reason = StopReason::max_iters;
  return traj;
}

}  // namespace

RealVector DescentState::w() const {
  RealVector out(u.size());
  refresh_w(*this, out);
  return out;
}

DescentState initial_state(std::size_t d, double alpha, double eta) {
  DescentState s;
  s.u.assign(d, alpha);
  s.v.assign(d, alpha);
  s.multipliers.assign(d, 1.0);
  s.base_eta = eta;
  s.alpha = alpha;
  return s;
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::max_iters:
      return "max-iters";
    case StopReason::safety_stop:
      return "safety-stop";
    case StopReason::target_reached:
      return "target-reached";
  }
  return "unknown";
}

GradientFactors gradient_factors(const DenseMatrix& X, std::span<const double> y,
                                 std::span<const double> w, std::span<const double> eta_vec) {
  check_problem(X, y, w.size(), "gradient_factors");
  if (eta_vec.size() != w.size()) throw DimensionError("gradient_factors: eta_vec length");
  Workspace ws(X.rows(), w.size());
  std::copy(w.begin(), w.end(), ws.w.begin());
  loss_gradient(X, y, ws);
  GradientFactors f{RealVector(w.size()), RealVector(w.size())};
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double r = 4.0 * eta_vec[j] * ws.grad[j];
    f.plus[j] = 1.0 - r;
    f.minus[j] = 1.0 + r;
  }
  return f;
}

DescentState gd_step(const DescentState& state, const DenseMatrix& X,
                     std::span<const double> y) {
  check_problem(X, y, state.u.size(), "gd_step");
  DescentState next = state;
  Workspace ws(X.rows(), state.u.size());
  refresh_w(next, ws.w);
  step_in_place(next, X, y, ws);
  if (!all_finite(next.u) || !all_finite(next.v)) {
    throw DivergenceError("gd_step produced a non-finite iterate; the step size is too large",
                          Trajectory{}, next.t);
  }
  return next;
}

WmaxEstimate estimate_wmax(const DenseMatrix& X, std::span<const double> y, double eta_tilde) {
  if (!(eta_tilde > 0.0)) throw ParameterError("estimate_wmax: eta_tilde must be positive");
  const std::size_t d = X.cols();
  check_problem(X, y, d, "estimate_wmax");

  // From u = v = 1 we have w_0 = 0, so f+ = 1 - r and f- = 1 + r with r = -4 eta X^T y / n.
  // max(|1 - r_i|, |1 + r_i|) = 1 + |r_i|, hence f_max - 1 = ||r||_inf exactly; using the
  // right-hand side avoids the cancellation in (1 + tiny) - 1.
  Workspace ws(X.rows(), d);
  std::fill(ws.w.begin(), ws.w.end(), 0.0);
  loss_gradient(X, y, ws);
  const double growth = 4.0 * eta_tilde * inf_norm(ws.grad);

  WmaxEstimate est;
  est.eta_tilde = eta_tilde;
  est.f_max = 1.0 + growth;
  if (!(growth > 0.0)) {
    est.degenerate = true;
    est.f_max = 1.0;
    return est;
  }
  est.z_hat = growth / (3.0 * eta_tilde);
  est.eta = 3.0 * eta_tilde / (20.0 * growth);
  return est;
}

double kappa_eff_of(const SparseSignal& signal, double eps, double maxnoise) {
  if (!(eps >= 0.0) || !(maxnoise >= 0.0)) {
    throw ParameterError("kappa_eff_of: eps and maxnoise must be nonnegative");
  }
  const double floor = std::max({signal.w_min, eps, maxnoise});
  if (!(floor > 0.0)) return 1.0;
  return std::max(1.0, signal.w_max / floor);
}

RecommendedSettings recommended_settings(double w_max_hat, double w_min, double eps,
                                         std::size_t d, std::size_t k, double maxnoise,
                                         double constant) {
  if (!(w_max_hat > 0.0) || !(w_min > 0.0) || d == 0 || k == 0) {
    throw ParameterError("recommended_settings: w_max, w_min, d, k must be positive");
  }
  if (!(eps >= 0.0) || !(maxnoise >= 0.0)) {
    throw ParameterError("recommended_settings: eps and maxnoise must be nonnegative");
  }
  RecommendedSettings rs;
  rs.kappa_eff = std::max(1.0, w_max_hat / std::max({w_min, eps, maxnoise}));
  const double log_kappa = std::max(1.0, std::log(rs.kappa_eff));
  rs.delta_budget = 1.0 / (std::sqrt(static_cast<double>(k)) * log_kappa);
  const double twice_d = 2.0 * static_cast<double>(d) + 1.0;
  rs.alpha_budget =
      std::min(std::min({eps * eps, eps, 1.0}) / std::max(twice_d * twice_d, w_max_hat * w_max_hat),
               std::sqrt(w_min) / 2.0);
  rs.eta_budget = 1.0 / (20.0 * w_max_hat);

  constexpr auto saturated = std::numeric_limits<std::uint64_t>::max();
  if (!(rs.alpha_budget > 0.0)) {
    rs.t_budget_alg1 = saturated;
    rs.t_budget_alg2 = saturated;
    return rs;
  }
  const double log_inv_alpha = std::log(1.0 / rs.alpha_budget);
  auto to_count = [&](double x) {
    return x >= 1.8e19 ? saturated : static_cast<std::uint64_t>(std::ceil(x));
  };
  // With eta = eta_budget the product eta * w_max is a fixed constant, absorbed into `constant`.
  rs.t_budget_alg1 = to_count(constant * rs.kappa_eff * log_inv_alpha);
  rs.t_budget_alg2 = to_count(constant * log_kappa * log_inv_alpha);
  return rs;
}

std::size_t doubling_period(std::size_t tau, double alpha) {
  const double steps = std::ceil(std::log(1.0 / alpha));
  return tau * static_cast<std::size_t>(std::max(1.0, steps));
}

Trajectory run_alg1(const DenseMatrix& X, std::span<const double> y, const DescentConfig& cfg) {
  return run_descent(X, y, cfg, false);
}

Trajectory run_alg2(const DenseMatrix& X, std::span<const double> y, const DescentConfig& cfg) {
  return run_descent(X, y, cfg, true);
}

ErrorDecomposition decompose(std::span<const double> w_plus, std::span<const double> w_minus,
                             const SparseSignal& w_star, const DenseMatrix& X,
                             std::span<const double> xi) {
  const std::size_t d = w_star.w_star.size();
  if (w_plus.size() != d || w_minus.size() != d || X.cols() != d || X.rows() != xi.size()) {
    throw DimensionError("decompose: dimension mismatch");
  }
  ErrorDecomposition out{RealVector(d), RealVector(d), RealVector(d), RealVector(d)};
  for (std::size_t j = 0; j < d; ++j) {
    const double target = w_star.w_star[j];
    if (target > 0) {
      out.s[j] = w_plus[j];
      out.e[j] = -w_minus[j];
    } else if (target < 0) {
      out.s[j] = -w_minus[j];
      out.e[j] = w_plus[j];
    } else {
      out.e[j] = w_plus[j] - w_minus[j];
    }
  }
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  const RealVector gram_e = mat_t_apply(X, mat_apply(X, out.e));
  const RealVector noise = mat_t_apply(X, xi);
  for (std::size_t j = 0; j < d; ++j) out.b[j] = (gram_e[j] - noise[j]) * inv_n;

  const RealVector gap = subtract(out.s, w_star.w_star);
  const RealVector gram_gap = mat_t_apply(X, mat_apply(X, gap));
  for (std::size_t j = 0; j < d; ++j) out.p[j] = gram_gap[j] * inv_n - gap[j];
  return out;
}

}  // namespace implicit_sparse
