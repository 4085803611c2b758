#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "implicit_sparse/core.hpp"
#include "implicit_sparse/design.hpp"

namespace implicit_sparse {

/// Iterate of gradient descent on w = u*u - v*v with per-coordinate step multipliers.
///
/// The effective step of coordinate j is base_eta * multipliers[j]. Multipliers start at
/// one and are only ever doubled (Algorithm 2); Algorithm 1 never touches them.
struct DescentState {
  RealVector u;
  RealVector v;
  RealVector multipliers;
  double base_eta = 0.0;
  std::size_t t = 0;
  double alpha = 0.0;

  RealVector w() const;
};

/// u = v = alpha * 1, multipliers = 1, t = 0.
DescentState initial_state(std::size_t d, double alpha, double eta);

enum class StopReason { max_iters, safety_stop, target_reached };
std::string to_string(StopReason reason);

/// Optional early-stopping monitor evaluated against a known ground truth.
struct StopMonitor {
  RealVector reference;  // w*
  // Stop with target_reached once ||w_t - w*||_inf <= target_linf (if set).
  std::optional<double> target_linf;
  // Stop with target_reached once ||w_t - w*||_2^2 <= target_l2_sq (if set).
  std::optional<double> target_l2_sq;
};

struct DescentConfig {
  double eta = 0.0;
  double alpha = 1e-12;
  std::size_t max_iters = 2000;
  std::size_t tau = 10;    // Algorithm 2 only
  double z_hat = 0.0;      // Algorithm 2 only: estimate of w_max
  std::size_t snapshot_every = 1;
  // Safety stop fires once the error part e_t (off support or wrong sign) exceeds this
  // l-infinity cap. Needs `monitor` for the support and signs; disabled when infinite.
  double safety_stop_threshold = std::numeric_limits<double>::infinity();
  std::optional<StopMonitor> monitor;
};

/// Preset for Algorithm 2's tau under the analysis constants (the simulations use 10).
inline constexpr std::size_t kTheoryTau = 640;

struct Snapshot {
  std::size_t t = 0;
  RealVector w;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;  // strictly increasing t
  DescentState final_state;
  StopReason stop_reason = StopReason::max_iters;
};

/// Raised when the iterates blow up (non-finite, or ||w||_inf > 1e6 (1 + z_hat)).
/// Carries the trajectory recorded up to the last finite snapshot.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, Trajectory partial, std::size_t at_iteration)
      : Error(ErrorCategory::divergence, what),
        partial_(std::move(partial)),
        at_iteration_(at_iteration) {}

  const Trajectory& partial() const noexcept { return partial_; }
  std::size_t at_iteration() const noexcept { return at_iteration_; }

 private:
  Trajectory partial_;
  std::size_t at_iteration_;
};

struct GradientFactors {
  RealVector plus;   // applied to u: 1 - r
  RealVector minus;  // applied to v: 1 + r
};

/// r = (4 eta_vec) * X^T (X w - y) / n; returns (1 - r, 1 + r).
GradientFactors gradient_factors(const DenseMatrix& X, std::span<const double> y,
                                 std::span<const double> w, std::span<const double> eta_vec);

/// One update u <- u * (1 - r), v <- v * (1 + r) with eta_vec = base_eta * multipliers.
DescentState gd_step(const DescentState& state, const DenseMatrix& X, std::span<const double> y);

struct WmaxEstimate {
  double z_hat = 0.0;   // (f_max - 1) / (3 eta_tilde)
  double f_max = 1.0;
  double eta_tilde = 0.0;
  double eta = 0.0;     // production step 3 eta_tilde / (20 (f_max - 1)) = 1 / (20 z_hat)
  bool degenerate = false;  // zero signal and noise: f_max == 1
};

inline constexpr double kDefaultEtaTilde = 1e-10;

/// One gradient step from u = v = 1; brackets w_max within [w_max, 2 w_max) under RIP.
WmaxEstimate estimate_wmax(const DenseMatrix& X, std::span<const double> y,
                           double eta_tilde = kDefaultEtaTilde);

struct RecommendedSettings {
  double kappa_eff = 1.0;
  double delta_budget = 0.0;
  double alpha_budget = 0.0;
  double eta_budget = 0.0;
  std::uint64_t t_budget_alg1 = 0;
  std::uint64_t t_budget_alg2 = 0;
};

/// Evaluates the recommended RIP level, initialization, step size and iteration budgets.
/// `constant` multiplies both O(.) iteration budgets.
RecommendedSettings recommended_settings(double w_max_hat, double w_min, double eps,
                                         std::size_t d, std::size_t k, double maxnoise,
                                         double constant = 1.0);

/// w_max / (w_min v eps v maxnoise), clamped below at 1.
double kappa_eff_of(const SparseSignal& signal, double eps, double maxnoise);

/// Constant step sizes (multipliers fixed at one).
Trajectory run_alg1(const DenseMatrix& X, std::span<const double> y, const DescentConfig& cfg);

/// Doubles multiplier j at t = m * tau * ceil(ln(1/alpha)), m >= 2, whenever
/// max(u_j^2, v_j^2) <= 2^(-m-1) * z_hat.
Trajectory run_alg2(const DenseMatrix& X, std::span<const double> y, const DescentConfig& cfg);

/// Iteration period tau * ceil(ln(1/alpha)) between Algorithm 2 doubling checks.
std::size_t doubling_period(std::size_t tau, double alpha);

struct ErrorDecomposition {
  RealVector s;  // signal part on the signed support
  RealVector e;  // off-support and wrong-sign mass
  RealVector b;  // X^T X e / n - X^T xi / n
  RealVector p;  // (X^T X / n - I)(s - w*)
};

/// Splits w = w_plus - w_minus (w_plus = u*u, w_minus = v*v) into signal and error parts.
ErrorDecomposition decompose(std::span<const double> w_plus, std::span<const double> w_minus,
                             const SparseSignal& w_star, const DenseMatrix& X,
                             std::span<const double> xi);

}  // namespace implicit_sparse
