#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "implicit_sparse/baselines.hpp"

using namespace implicit_sparse;

namespace {

DenseMatrix orthonormal(std::size_t n) { return DenseMatrix::identity(n, std::sqrt(double(n))); }

// Rows of a random orthogonal matrix scaled by sqrt(n): X^T X / n = I without being diagonal.
DenseMatrix rotated_orthonormal(std::size_t n, std::uint64_t seed) {
  SeededRng rng(seed, 0);
  std::vector<RealVector> q;
  for (std::size_t c = 0; c < n; ++c) {
    RealVector v(n);
    for (auto& x : v) x = rng.normal();
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& u : q) {
        const double p = dot(u, v);
        for (std::size_t i = 0; i < n; ++i) v[i] -= p * u[i];
      }
    const double norm = std::sqrt(squared_norm(v));
    for (auto& x : v) x /= norm;
    q.push_back(v);
  }
  DenseMatrix X(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) X(i, j) = q[j][i] * std::sqrt(double(n));
  return X;
}

DenseMatrix gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
  return gen_design(DesignKind::gaussian(), n, d, SeededRng(seed, 1));
}

}  // namespace

TEST_CASE("soft_threshold_closed_form") {
  const RealVector a = soft_threshold_closed_form(RealVector{1.0, 0.2}, 0.5);
  CHECK(a[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(a[1] == 0.0);
  CHECK(soft_threshold_closed_form(RealVector{0.3, -2}, 0.0) == RealVector{0.3, -2});
  CHECK(soft_threshold_closed_form(RealVector{-1.0}, 0.4)[0] == doctest::Approx(-0.6).epsilon(1e-15));
  CHECK_THROWS_AS(soft_threshold_closed_form(RealVector{1.0}, -1.0), ParameterError);
}

TEST_CASE("lasso limits") {
  const DenseMatrix X = gaussian(30, 5, 1);
  SeededRng rng(1, 2);
  RealVector y(30);
  for (auto& v : y) v = rng.normal();

  // lambda = 0 with n >= d: ordinary least squares, checked against the normal equations.
  LassoConfig cfg;
  cfg.lambda = 0.0;
  cfg.tol = 1e-14;
  const LassoResult ls = lasso_cd(X, y, cfg);
  CHECK(ls.converged);
  const DenseMatrix G = gram_over_n(X);
  const RealVector rhs = scaled(mat_t_apply(X, y), 1.0 / 30);
  const RealVector ref = cholesky_solve(G, rhs);
  for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(ls.w[j] - ref[j]) < 1e-8);

  cfg.lambda = lasso_lambda_max(X, y);
  CHECK(lasso_cd(X, y, cfg).w == RealVector(5, 0.0));
  cfg.lambda = 2 * lasso_lambda_max(X, y);
  CHECK(lasso_cd(X, y, cfg).w == RealVector(5, 0.0));

  cfg.lambda = -1;
  CHECK_THROWS_AS(lasso_cd(X, y, cfg), ParameterError);
  CHECK_THROWS_AS(lasso_cd(X, RealVector(29, 0.0), LassoConfig{}), DimensionError);
}

TEST_CASE("lasso matches soft thresholding on orthonormal designs") {
  SeededRng rng(2, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + rng.uniform_index(12);
    const DenseMatrix X = trial % 2 ? orthonormal(n) : rotated_orthonormal(n, trial);
    RealVector y(n);
    for (auto& v : y) v = rng.normal() * 2;
    const RealVector w_ls = scaled(mat_t_apply(X, y), 1.0 / n);
    LassoConfig cfg;
    cfg.lambda = rng.uniform(0, 1.2 * inf_norm(w_ls));
    const RealVector got = lasso_cd(X, y, cfg).w;
    const RealVector expect = soft_threshold_closed_form(w_ls, cfg.lambda);
    for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(got[j] - expect[j]) <= 1e-8);
  }
}

TEST_CASE("lasso objective is non-increasing sweep over sweep") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const DenseMatrix X = gaussian(40, 80, seed);
    SeededRng rng(seed, 3);
    RealVector y(40);
    for (auto& v : y) v = rng.normal();
    LassoConfig cfg;
    cfg.lambda = 0.05 * lasso_lambda_max(X, y);
    cfg.record_objective = true;
    const LassoResult r = lasso_cd(X, y, cfg);
    REQUIRE(r.objective_trace.size() >= 2);
    const double start = lasso_objective(X, y, RealVector(80, 0.0), cfg.lambda);
    CHECK(r.objective_trace.front() <= start);
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i) {
      CHECK(r.objective_trace[i] <= r.objective_trace[i - 1] * (1 + 1e-14));
    }
    CHECK(lasso_objective(X, y, r.w, cfg.lambda) == doctest::Approx(r.objective_trace.back()).epsilon(1e-12));
  }
}

TEST_CASE("lasso_path") {
  const DenseMatrix X = gaussian(25, 12, 5);
  SeededRng rng(5, 5);
  RealVector y(25);
  for (auto& v : y) v = rng.normal();
  const double lmax = lasso_lambda_max(X, y);
  const LassoPath path = lasso_path(X, y, lmax, 1e-3, 30);
  REQUIRE(path.lambdas.size() == 30);
  CHECK(path.lambdas.front() == lmax);
  CHECK(path.solutions.front() == RealVector(12, 0.0));
  const double ratio = path.lambdas[1] / path.lambdas[0];
  for (std::size_t i = 1; i < 30; ++i) {
    CHECK(path.lambdas[i] < path.lambdas[i - 1]);
    CHECK(path.lambdas[i] / path.lambdas[i - 1] == doctest::Approx(ratio).epsilon(1e-12));
  }
  CHECK(path.lambdas.back() == doctest::Approx(lmax * 1e-3).epsilon(1e-12));

  // Warm starts reach the same minimizers as cold starts.
  for (std::size_t i = 0; i < 30; i += 7) {
    LassoConfig cfg;
    cfg.lambda = path.lambdas[i];
    const RealVector cold = lasso_cd(X, y, cfg).w;
    for (std::size_t j = 0; j < 12; ++j) CHECK(std::abs(cold[j] - path.solutions[i][j]) < 1e-6);
  }

  CHECK(lasso_path(X, y, lmax, 0.5, 1).lambdas.size() == 1);
  CHECK_THROWS_AS(lasso_path(X, y, 0.0), ParameterError);
  CHECK_THROWS_AS(lasso_path(X, y, lmax, 1.0), ParameterError);
}

TEST_CASE("path support grows on orthonormal designs") {
  const DenseMatrix X = rotated_orthonormal(10, 9);
  SeededRng rng(9, 9);
  RealVector y(10);
  for (auto& v : y) v = rng.normal();
  const LassoPath path = lasso_path(X, y, lasso_lambda_max(X, y), 1e-3, 50);
  std::size_t prev = 0;
  for (const auto& w : path.solutions) {
    const auto nnz = static_cast<std::size_t>(std::count_if(w.begin(), w.end(), [](double v) { return v != 0.0; }));
    CHECK(nnz >= prev);
    prev = nnz;
  }
}

TEST_CASE("oracle_lambda_select") {
  const SparseSignal truth = SparseSignal::from_vector({1.0, 0.0, -0.5});
  LassoPath path;
  path.lambdas = {3, 2, 1};
  path.solutions = {{0, 0, 0}, {1.0, 0.0, -0.5}, {1.0, 0.1, -0.5}};
  const LambdaSelection s = oracle_lambda_select(path, truth);
  CHECK(s.index == 1);
  CHECK(s.l2_error_sq == 0.0);

  LassoPath single;
  single.lambdas = {0.7};
  single.solutions = {{0.2, 0.2, 0.2}};
  CHECK(oracle_lambda_select(single, truth).lambda == 0.7);

  LassoPath tie;
  tie.lambdas = {2, 1};
  tie.solutions = {{1.0, 0.1, -0.5}, {1.0, -0.1, -0.5}};
  CHECK(oracle_lambda_select(tie, truth).index == 0);

  CHECK_THROWS_AS(oracle_lambda_select(LassoPath{}, truth), ParameterError);
}

TEST_CASE("oracle selection on a noiseless orthonormal instance picks the grid floor") {
  const std::size_t n = 8;
  const DenseMatrix X = orthonormal(n);
  const SparseSignal truth = SparseSignal::from_vector({1.0, 0, 0.5, 0, 0, 2.0, 0, 0});
  const RealVector y = mat_apply(X, truth.w_star);
  const LassoPath path = lasso_path(X, y, lasso_lambda_max(X, y), 1e-4, 40);
  // The soft-threshold bias is k lambda^2, strictly decreasing in lambda.
  const LambdaSelection s = oracle_lambda_select(path, truth);
  CHECK(s.index == 39);
  CHECK(s.l2_error_sq == doctest::Approx(3 * s.lambda * s.lambda).epsilon(1e-6));
}

TEST_CASE("oracle_ls") {
  const DenseMatrix X = gaussian(30, 50, 7);
  const SparseSignal truth = SparseSignal::from_vector([] {
    RealVector w(50, 0.0);
    w[3] = 1.5;
    w[17] = -0.7;
    w[40] = 0.2;
    return w;
  }());
  CHECK(oracle_ls(X, mat_apply(X, truth.w_star), {}) == RealVector(50, 0.0));

  const RealVector w = oracle_ls(X, mat_apply(X, truth.w_star), truth.support);
  for (std::size_t j = 0; j < 50; ++j) CHECK(std::abs(w[j] - truth.w_star[j]) <= 1e-10);

  SeededRng rng(7, 7);
  RealVector y(30);
  for (auto& v : y) v = rng.normal();
  const RealVector fit = oracle_ls(X, y, truth.support);
  const RealVector resid = subtract(y, mat_apply(X, fit));
  for (std::size_t j : truth.support) CHECK(std::abs(dot(X.column(j), resid)) <= 1e-8);
  for (std::size_t j = 0; j < 50; ++j)
    if (std::find(truth.support.begin(), truth.support.end(), j) == truth.support.end()) CHECK(fit[j] == 0.0);

  // Padding the design with extra columns leaves the fit unchanged.
  const DenseMatrix wide = gen_design(DesignKind::gaussian(), 30, 200, SeededRng(7, 1));
  const RealVector a = oracle_ls(X, y, truth.support);
  const RealVector b = oracle_ls(wide, y, truth.support);
  for (std::size_t j : truth.support) CHECK(a[j] == b[j]);

  CHECK_THROWS_AS(oracle_ls(DenseMatrix(2, 2, {1, 1, 1, 1}), RealVector{1, 1}, {0, 1}), SingularityError);
  IndexSet too_big(31);
  for (std::size_t i = 0; i < 31; ++i) too_big[i] = i;
  CHECK_THROWS_AS(oracle_ls(X, y, too_big), SingularityError);
  CHECK_THROWS_AS(oracle_ls(X, y, {60}), DimensionError);
}
