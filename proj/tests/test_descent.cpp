#include <doctest.h>

#include <cmath>

#include "implicit_sparse/descent.hpp"

using namespace implicit_sparse;

namespace {

// X = sqrt(n) I, so X^T X / n = I.
DenseMatrix orthonormal(std::size_t n) { return DenseMatrix::identity(n, std::sqrt(double(n))); }

SparseSignal signal_of(RealVector w) { return SparseSignal::from_vector(std::move(w)); }

struct Problem {
  DenseMatrix X;
  RealVector y;
  RealVector xi;
  SparseSignal truth;
};

Problem rademacher_problem(std::size_t n, std::size_t d, std::size_t k, double sigma, std::uint64_t seed) {
  const SeededRng rng(seed, 0);
  Problem p;
  p.X = gen_design(DesignKind::rademacher(), n, d, rng.derive(1));
  SignalSpec spec;
  spec.d = d;
  spec.k = k;
  p.truth = gen_signal(spec, rng.derive(2));
  p.xi = gen_noise(sigma, n, rng.derive(3));
  p.y = add(mat_apply(p.X, p.truth.w_star), p.xi);
  return p;
}

}  // namespace

TEST_CASE("gradient_factors") {
  const std::size_t n = 4;
  const DenseMatrix X = orthonormal(n);
  const RealVector w_star{0.5, 0, -1, 0};
  const RealVector y = mat_apply(X, w_star);
  const RealVector eta(n, 0.05);

  const GradientFactors at_truth = gradient_factors(X, y, w_star, eta);
  CHECK(at_truth.plus == RealVector(n, 1.0));
  CHECK(at_truth.minus == RealVector(n, 1.0));

  // w = 0: r = -4 eta w*.
  const GradientFactors f = gradient_factors(X, y, RealVector(n, 0.0), eta);
  for (std::size_t j = 0; j < n; ++j) {
    CHECK(f.plus[j] == doctest::Approx(1.0 + 4 * 0.05 * w_star[j]).epsilon(1e-15));
    CHECK(f.plus[j] + f.minus[j] == 2.0);
  }
  CHECK_THROWS_AS(gradient_factors(X, y, RealVector(3, 0.0), eta), DimensionError);
}

TEST_CASE("gd_step first update") {
  const Problem p = rademacher_problem(30, 40, 3, 0.5, 1);
  const double alpha = 1e-3, eta = 0.02;
  const DescentState s1 = gd_step(initial_state(40, alpha, eta), p.X, p.y);
  CHECK(s1.t == 1);

  // u_1 = alpha (1 - 4 eta (-w* + (I - X^T X/n) w* - X^T xi / n)), component-wise.
  const RealVector gram_w = scaled(mat_t_apply(p.X, mat_apply(p.X, p.truth.w_star)), 1.0 / 30);
  const RealVector noise = scaled(mat_t_apply(p.X, p.xi), 1.0 / 30);
  for (std::size_t j = 0; j < 40; ++j) {
    const double inner = -p.truth.w_star[j] + (p.truth.w_star[j] - gram_w[j]) - noise[j];
    CHECK(s1.u[j] == doctest::Approx(alpha * (1 - 4 * eta * inner)).epsilon(1e-12));
    CHECK(s1.v[j] == doctest::Approx(alpha * (1 + 4 * eta * inner)).epsilon(1e-12));
  }
}

TEST_CASE("orthonormal noiseless run reduces to the scalar recurrence") {
  const std::size_t n = 6;
  const DenseMatrix X = orthonormal(n);
  const RealVector w_star{1.0, 0.3, 0, 0, 0.7, 0};
  const RealVector y = mat_apply(X, w_star);
  const double alpha = 1e-2, eta = 0.08;
  DescentState s = initial_state(n, alpha, eta);
  for (int t = 0; t < 300; ++t) {
    const RealVector before = s.w();
    const RealVector u_before = s.u;
    s = gd_step(s, X, y);
    const RealVector w = s.w();
    for (std::size_t j = 0; j < n; ++j) {
      const double f = 1 - 4 * eta * (before[j] - w_star[j]);
      CHECK(s.u[j] * s.u[j] == doctest::Approx(u_before[j] * u_before[j] * f * f).epsilon(1e-14));
      if (w_star[j] > 0) {
        CHECK(w[j] >= before[j]);
        CHECK(w[j] <= w_star[j]);
      } else {
        CHECK(w[j] <= before[j]);
      }
      CHECK(s.u[j] * s.v[j] <= alpha * alpha);
    }
  }
}

TEST_CASE("u v invariant and multiplier rule on a noisy run") {
  const Problem p = rademacher_problem(80, 200, 4, 0.5, 3);
  const WmaxEstimate est = estimate_wmax(p.X, p.y);
  DescentConfig cfg;
  cfg.eta = est.eta;
  cfg.alpha = 1e-6;
  cfg.max_iters = 1500;
  cfg.z_hat = est.z_hat;
  cfg.snapshot_every = 10;
  const Trajectory tr = run_alg2(p.X, p.y, cfg);
  CHECK(tr.snapshots.size() == 150);
  const DescentState& s = tr.final_state;
  for (std::size_t j = 0; j < 200; ++j) {
    CHECK(s.u[j] * s.v[j] <= cfg.alpha * cfg.alpha);
    int e = 0;
    const double frac = std::frexp(s.multipliers[j], &e);
    CHECK(frac == 0.5);  // power of two
    CHECK(s.multipliers[j] >= 1.0);
  }
  for (std::size_t i = 1; i < tr.snapshots.size(); ++i) CHECK(tr.snapshots[i].t > tr.snapshots[i - 1].t);
}

TEST_CASE("Algorithm 1 zero target") {
  const Problem p = rademacher_problem(20, 30, 1, 0.0, 4);
  const RealVector y(20, 0.0);
  DescentConfig cfg;
  cfg.eta = 0.05;
  cfg.alpha = 1e-3;
  cfg.max_iters = 200;
  const Trajectory tr = run_alg1(p.X, y, cfg);
  for (const Snapshot& snap : tr.snapshots)
    for (double w : snap.w) CHECK(std::abs(w) <= cfg.alpha * cfg.alpha);
}

TEST_CASE("Algorithm 2 with a constant signal keeps support multipliers at one") {
  const Problem p = rademacher_problem(200, 300, 5, 0.0, 5);
  const WmaxEstimate est = estimate_wmax(p.X, p.y);
  DescentConfig cfg;
  cfg.eta = est.eta;
  cfg.alpha = 1e-8;
  cfg.max_iters = 1500;
  cfg.z_hat = est.z_hat;
  cfg.snapshot_every = 100;
  const Trajectory tr = run_alg2(p.X, p.y, cfg);
  for (std::size_t j : p.truth.support) CHECK(tr.final_state.multipliers[j] == 1.0);
  CHECK(inf_norm(subtract(tr.final_state.w(), p.truth.w_star)) < 1e-3);
}

TEST_CASE("descent parameter checks") {
  const Problem p = rademacher_problem(10, 10, 1, 0.0, 6);
  DescentConfig cfg;
  cfg.eta = 0.0;
  CHECK_THROWS_AS(run_alg1(p.X, p.y, cfg), ParameterError);
  cfg.eta = 0.05;
  CHECK_THROWS_AS(run_alg2(p.X, p.y, cfg), ParameterError);  // z_hat unset
  CHECK_THROWS_AS(run_alg1(p.X, RealVector(9, 0.0), cfg), DimensionError);

  cfg.eta = 50.0;
  cfg.max_iters = 100;
  try {
    run_alg1(p.X, p.y, cfg);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.at_iteration() <= 100);
    CHECK(e.category() == ErrorCategory::divergence);
  }
}

TEST_CASE("estimate_wmax") {
  const std::size_t n = 5;
  const DenseMatrix X = orthonormal(n);
  const RealVector e1{1, 0, 0, 0, 0};
  const WmaxEstimate est = estimate_wmax(X, mat_apply(X, e1));
  CHECK(est.z_hat == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK(est.f_max == doctest::Approx(1 + 4e-10).epsilon(1e-15));
  CHECK(est.eta == doctest::Approx(1.0 / (20 * 4.0 / 3.0)).epsilon(1e-12));

  const WmaxEstimate zero = estimate_wmax(X, RealVector(n, 0.0));
  CHECK(zero.z_hat == 0.0);
  CHECK(zero.degenerate);
  CHECK_THROWS_AS(estimate_wmax(X, e1, 0.0), ParameterError);
}

TEST_CASE("estimate_wmax is scale-equivariant") {
  const Problem p = rademacher_problem(50, 80, 3, 0.3, 7);
  const double base = estimate_wmax(p.X, p.y).z_hat;
  CHECK(estimate_wmax(p.X, scaled(p.y, 2.0)).z_hat == 2.0 * base);
  CHECK(estimate_wmax(p.X, scaled(p.y, 0.25)).z_hat == 0.25 * base);
  CHECK(estimate_wmax(p.X, scaled(p.y, 3.0)).z_hat == doctest::Approx(3.0 * base).epsilon(1e-14));
}

TEST_CASE("estimate_wmax bracket on small instances") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Problem p = rademacher_problem(400, 500, 3, 0.0, 100 + seed);
    const double z = estimate_wmax(p.X, p.y).z_hat;
    CHECK(z >= p.truth.w_max);
    CHECK(z < 2 * p.truth.w_max);
  }
}

TEST_CASE("recommended_settings and kappa_eff") {
  const RecommendedSettings a = recommended_settings(1.0, 0.1, 2.0, 100, 5, 0.0);
  CHECK(a.kappa_eff == 1.0);

  const RecommendedSettings b = recommended_settings(1.0, 1.0 / 64, 0.0, 100, 5, 0.0);
  CHECK(b.kappa_eff == 64.0);
  CHECK(b.eta_budget == 1.0 / 20);
  CHECK(b.delta_budget == doctest::Approx(1.0 / (std::sqrt(5.0) * std::log(64.0))).epsilon(1e-14));
  // eps = 0 drives the initialization budget to zero and both time budgets saturate.
  CHECK(b.alpha_budget == 0.0);

  const RecommendedSettings c = recommended_settings(1.0, 1.0 / 64, 1.0 / 64, 100, 5, 0.0);
  CHECK(c.kappa_eff == 64.0);
  const double ratio = double(c.t_budget_alg2) / double(c.t_budget_alg1);
  CHECK(ratio == doctest::Approx(std::log(64.0) / 64).epsilon(1e-3));
  const double alpha = std::min((1.0 / 64) * (1.0 / 64) / (201.0 * 201.0), std::sqrt(1.0 / 64) / 2);
  CHECK(c.alpha_budget == doctest::Approx(alpha).epsilon(1e-14));

  const SparseSignal s = signal_of({1.0, 0, 0.1, 0});
  CHECK(kappa_eff_of(s, 0.0, 0.0) == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(kappa_eff_of(s, 0.5, 0.0) == 2.0);
  CHECK(kappa_eff_of(s, 0.0, 5.0) == 1.0);
  CHECK(kappa_eff_of(s, 0.3, 0.2) <= s.kappa);
}

TEST_CASE("doubling_period") {
  CHECK(doubling_period(10, 1e-12) == 280);  // ceil(ln 1e12) = 28
  CHECK(doubling_period(1, std::exp(-1.0)) == 1);
  CHECK(doubling_period(kTheoryTau, 1e-6) == 640 * 14);
}

TEST_CASE("decompose") {
  const Problem p = rademacher_problem(40, 60, 4, 0.5, 8);
  SeededRng rng(8, 8);
  RealVector wp(60), wm(60);
  for (std::size_t j = 0; j < 60; ++j) {
    wp[j] = rng.uniform(0, 1);
    wm[j] = rng.uniform(0, 1);
  }
  const ErrorDecomposition dec = decompose(wp, wm, p.truth, p.X, p.xi);
  for (std::size_t j = 0; j < 60; ++j) CHECK(std::abs(dec.s[j] + dec.e[j] - (wp[j] - wm[j])) <= 1e-12);

  // b = X^T X e / n - X^T xi / n, p = (X^T X / n - I)(s - w*)
  const RealVector b = subtract(scaled(mat_t_apply(p.X, mat_apply(p.X, dec.e)), 1.0 / 40),
                                scaled(mat_t_apply(p.X, p.xi), 1.0 / 40));
  const RealVector diff = subtract(dec.s, p.truth.w_star);
  const RealVector pp = subtract(scaled(mat_t_apply(p.X, mat_apply(p.X, diff)), 1.0 / 40), diff);
  for (std::size_t j = 0; j < 60; ++j) {
    CHECK(dec.b[j] == doctest::Approx(b[j]).epsilon(1e-12));
    CHECK(dec.p[j] == doctest::Approx(pp[j]).epsilon(1e-12));
  }

  const DenseMatrix X = orthonormal(4);
  const SparseSignal truth = signal_of({1.0, 0, 2.0, 0});
  const RealVector w_plus{0.5, 0.1, 1.0, 0.2};
  const RealVector zero(4, 0.0);
  const ErrorDecomposition id = decompose(w_plus, zero, truth, X, zero);
  CHECK(inf_norm(id.p) == 0.0);
  CHECK(id.e == RealVector{0, 0.1, 0, 0.2});
  CHECK_THROWS_AS(decompose(RealVector(3, 0.0), zero, truth, X, zero), DimensionError);
}
