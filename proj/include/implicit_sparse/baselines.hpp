#pragma once

#include <cstddef>
#include <optional>
#include <unordered_map>
#include <vector>

#include "implicit_sparse/core.hpp"
#include "implicit_sparse/design.hpp"

namespace implicit_sparse {

// Lasso objective (1/(2n)) ||X w - y||^2 + lambda ||w||_1.
struct LassoConfig {
  double lambda = 0.0;
  std::size_t max_sweeps = 100000;
  double tol = 1e-10;  // max coordinate change in a full sweep
  bool record_objective = false;
};

struct LassoResult {
  RealVector w;
  bool converged = false;
  std::size_t sweeps = 0;
  std::vector<double> objective_trace;  // after each sweep, if requested
};

double lasso_objective(const DenseMatrix& X, std::span<const double> y, std::span<const double> w,
                       double lambda);

/// Cyclic coordinate descent; reusable across lambdas on the same design.
class LassoSolver {
 public:
  LassoSolver(const DenseMatrix& X, std::span<const double> y);

  LassoResult solve(const LassoConfig& cfg, std::optional<RealVector> warm_start = std::nullopt) const;

  double lambda_max() const noexcept { return lambda_max_; }
  std::size_t n() const noexcept { return n_; }
  std::size_t d() const noexcept { return d_; }

 private:
  double coordinate_pass(std::span<const std::size_t> coords, double lambda, RealVector& w,
                         RealVector& r) const;
  double objective(const RealVector& w, const RealVector& r, double lambda) const;
  // Newton steps toward the minimizer on the current sign pattern, each stopping at the first
  // sign change; coordinates that reach zero leave `active`.
  void active_set_refine(std::vector<std::size_t>& active, double lambda, RealVector& w,
                         RealVector& r) const;

  std::size_t n_;
  std::size_t d_;
  const std::vector<double>& gram_column(std::size_t j) const;

  std::vector<double> cols_;  // column-major copy of X
  std::vector<double> col_sq_;  // ||x_j||^2 / n
  RealVector y_;
  double lambda_max_;
  // Filled lazily by solve(), so one solver must not run concurrent solves.
  mutable std::unordered_map<std::size_t, std::vector<double>> gram_;
};

LassoResult lasso_cd(const DenseMatrix& X, std::span<const double> y, const LassoConfig& cfg,
                     std::optional<RealVector> warm_start = std::nullopt);

/// sign(w_i) (|w_i| - lambda)_+
RealVector soft_threshold_closed_form(std::span<const double> w_ls, double lambda);

struct LassoPath {
  std::vector<double> lambdas;  // strictly decreasing
  std::vector<RealVector> solutions;
  std::vector<std::size_t> sweeps;
  std::size_t unconverged = 0;
};

inline constexpr std::size_t kDefaultPathLength = 200;
inline constexpr double kDefaultLambdaMinRatio = 1e-4;

/// Log-spaced grid lambda_max * ratio^(i/(count-1)), solved with warm starts.
LassoPath lasso_path(const DenseMatrix& X, std::span<const double> y, double lambda_max,
                     double lambda_min_ratio = kDefaultLambdaMinRatio,
                     std::size_t count = kDefaultPathLength, const LassoConfig& base = {});

/// lambda_max = ||X^T y / n||_inf
double lasso_lambda_max(const DenseMatrix& X, std::span<const double> y);

struct LambdaSelection {
  std::size_t index = 0;
  double lambda = 0.0;
  RealVector solution;
  double l2_error_sq = 0.0;
};

/// argmin over the path of ||w^lambda - w*||_2, ties toward the larger lambda.
LambdaSelection oracle_lambda_select(const LassoPath& path, const SparseSignal& w_star);

/// Least squares on the given columns (normal equations, Cholesky), zero elsewhere.
RealVector oracle_ls(const DenseMatrix& X, std::span<const double> y, const IndexSet& support);

}  // namespace implicit_sparse
