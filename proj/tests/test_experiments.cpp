#include <doctest.h>

#include <cmath>
#include <sstream>

#include "implicit_sparse/experiments.hpp"

using namespace implicit_sparse;

namespace {

ExperimentConfig small(Family family = Family::phase_transition_gamma) {
  ExperimentConfig c = default_config(family, Preset::desk);
  c.n = 60;
  c.d = 120;
  c.k = 3;
  c.sigma = 0.2;
  c.repetitions = 3;
  c.max_iters = 600;
  c.lasso.path_length = 40;
  c.axis = {"gamma", {0.5, 1.0}};
  c.axis2.reset();
  c.base_seed = 1234;
  return c;
}

const TrialRecord& find(const std::vector<TrialRecord>& rs, const std::string& estimator) {
  for (const auto& r : rs)
    if (r.estimator == estimator) return r;
  FAIL("missing estimator " << estimator);
  return rs.front();
}

}  // namespace

TEST_CASE("family and preset names") {
  for (Family f : {Family::init_size, Family::alg_comparison, Family::phase_transition_gamma,
                   Family::phase_transition_sigma, Family::phase_transition_n, Family::dimension_bias,
                   Family::sample_complexity, Family::rip_violation}) {
    CHECK(parse_family(to_string(f)) == f);
    CHECK_NOTHROW(validate(default_config(f, Preset::desk)));
    CHECK_NOTHROW(validate(default_config(f, Preset::paper)));
  }
  CHECK(to_string(Family::phase_transition_gamma) == "phase-transition-gamma");
  CHECK_THROWS_AS(parse_family("phase"), ParameterError);
  CHECK(parse_preset("desk") == Preset::desk);
  CHECK_THROWS_AS(parse_preset("laptop"), ParameterError);
}

TEST_CASE("preset defaults") {
  const ExperimentConfig p = default_config(Family::phase_transition_gamma, Preset::paper);
  CHECK(p.n == 500);
  CHECK(p.d == 10000);
  CHECK(p.k == 25);
  CHECK(p.alpha == 1e-12);
  CHECK(p.gamma == 1.0);
  CHECK(p.sigma == 1.0);
  CHECK(p.tau == 10);
  CHECK(p.repetitions == 30);
  CHECK(p.max_iters == 2000);
  CHECK(p.snapshot_every == 10);
  CHECK(p.lasso.path_length == 200);

  const ExperimentConfig d = default_config(Family::phase_transition_gamma, Preset::desk);
  CHECK(d.n == 250);
  CHECK(d.d == 2000);
  CHECK(d.k == 10);
  CHECK(d.repetitions == 15);

  CHECK(default_config(Family::phase_transition_n, Preset::paper).gamma == 0.25);
  CHECK(default_config(Family::init_size, Preset::paper).algorithm == Algorithm::alg1);
  CHECK(default_config(Family::dimension_bias, Preset::desk).algorithm == Algorithm::alg2);
}

TEST_CASE("validate") {
  ExperimentConfig c = small();
  CHECK_NOTHROW(validate(c));
  c.k = 121;
  CHECK_THROWS_AS(validate(c), ParameterError);
  c = small();
  c.axis = {"d", {100, 2}};
  CHECK_THROWS_AS(validate(c), ParameterError);  // k = 3 > d = 2 at the second point
  c = small();
  c.axis = {"gamma", {}};
  CHECK_THROWS_AS(validate(c), ParameterError);
  c = small();
  c.axis = {"beta", {1}};
  CHECK_THROWS_AS(validate(c), ParameterError);
  c = small();
  c.axis = {"n", {10.5}};
  CHECK_THROWS_AS(validate(c), ParameterError);
  c = small();
  c.repetitions = 0;
  CHECK_THROWS_AS(validate(c), ParameterError);
  c = small();
  c.alpha = 1.0;
  CHECK_THROWS_AS(validate(c), ParameterError);
  c = small();
  c.axis = {"mu", {0.0, 1.0}};
  CHECK_THROWS_AS(validate(c), ParameterError);
}

TEST_CASE("phase_transition_threshold") {
  CHECK(phase_transition_threshold(1.0, 10000, 500) == doctest::Approx(0.398).epsilon(1e-3));
  CHECK(phase_transition_threshold(2.0, 100, 50) == doctest::Approx(2 * phase_transition_threshold(1.0, 100, 50)).epsilon(1e-15));
  CHECK(phase_transition_threshold(1.0, 100, 200) ==
        doctest::Approx(phase_transition_threshold(1.0, 100, 50) / 2).epsilon(1e-15));
  CHECK_THROWS_AS(phase_transition_threshold(0.0, 10, 10), ParameterError);
}

TEST_CASE("percentile") {
  CHECK(percentile({3.0}, 0.25) == 3.0);
  CHECK(percentile({3.0}, 0.75) == 3.0);
  CHECK(percentile({4, 1, 3, 2}, 0.5) == 2.5);
  CHECK(percentile({1, 2, 3, 4, 5}, 0.25) == 2.0);
  CHECK(percentile({1, 2, 3, 4}, 0.25) == 1.75);
  CHECK(percentile({1, 2, 3, 4}, 0.0) == 1.0);
  CHECK(percentile({1, 2, 3, 4}, 1.0) == 4.0);
  CHECK_THROWS_AS(percentile({}, 0.5), ParameterError);
}

TEST_CASE("validation_stop") {
  const DenseMatrix Xv(2, 2, {1, 0, 0, 1});
  const RealVector yv{1, 2};
  Trajectory one;
  one.snapshots = {{10, {5, 5}}};
  CHECK(validation_stop(one, Xv, yv).t == 10);

  Trajectory tr;
  tr.snapshots = {{10, {0, 0}}, {20, {1, 2}}, {30, {1, 2}}, {40, {3, 3}}};
  const ValidationChoice c = validation_stop(tr, Xv, yv);
  CHECK(c.t == 20);  // exact member, earliest of the tie
  CHECK(c.index == 1);
  CHECK(c.loss == 0.0);

  CHECK_THROWS_AS(validation_stop(tr, Xv, RealVector{1}), DimensionError);
  CHECK_THROWS_AS(validation_stop(Trajectory{}, Xv, yv), ParameterError);

  // The protocol run: 2000 iterations, every 10th model saved.
  const DenseMatrix X = gen_design(DesignKind::rademacher(), 20, 30, SeededRng(1, 1));
  DescentConfig cfg;
  cfg.eta = 0.05;
  cfg.alpha = 1e-6;
  cfg.max_iters = 2000;
  cfg.snapshot_every = 10;
  const Trajectory run = run_alg1(X, RealVector(20, 0.5), cfg);
  CHECK(run.snapshots.size() == 200);
}

TEST_CASE("axis points") {
  ExperimentConfig c = small();
  c.axis = {"n", {50, 100}};
  c.axis2 = SweepAxis{"k", {2, 4, 8}};
  const auto pts = axis_points(c);
  REQUIRE(pts.size() == 6);
  CHECK(pts[0].label == "n=50;k=2");
  CHECK(pts[5].label == "n=100;k=8");
  const ExperimentConfig at = at_point(c, pts[4]);
  CHECK(at.n == 100);
  CHECK(at.k == 4);

  c.axis2.reset();
  c.axis = {"gamma", {0.0625}};
  CHECK(axis_points(c).front().label == "0.0625");
  c.axis = {};
  CHECK(axis_points(c).size() == 1);

  c.axis = {"mu", {0.5}};
  const ExperimentConfig m = at_point(c, axis_points(c).front());
  CHECK(m.design.variant == DesignKind::Variant::gaussian_equicorrelated);
  CHECK(m.design.mu == 0.5);
}

TEST_CASE("run_trial records") {
  const ExperimentConfig c = small();
  const auto pts = axis_points(c);
  const auto rs = run_trial(c, pts[1], 0);
  for (const char* e : {"gd", "gd-oracle-t", "lasso-oracle", "oracle-ls", "null"}) {
    const TrialRecord& r = find(rs, e);
    CHECK(r.seed == 1234);
    CHECK(r.axis_value == "1");
    CHECK(r.l2_error_sq >= 0.0);
    CHECK(std::isfinite(r.l2_error_sq));
    CHECK_FALSE(r.failed);
  }
  CHECK(find(rs, "null").l2_error_sq == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(find(rs, "gd-oracle-t").l2_error_sq <= find(rs, "gd").l2_error_sq);
  CHECK(find(rs, "gd").selected.has_value());
  CHECK(find(rs, "lasso-oracle").selected.has_value());

  // gamma = 1 is well above 2 sigma sqrt(2 log 2d)/sqrt(n) here, so the off-support
  // coordinates stay at the initialization scale.
  CHECK(phase_transition_threshold(c.sigma, c.d, c.n) < 0.5);
  CHECK(find(rs, "gd").linf_off_support <= std::sqrt(c.alpha));

  // Paired seeds: the same trial index gives the same seed at every axis point.
  CHECK(run_trial(c, pts[0], 0).front().seed == 1234);
  CHECK(run_trial(c, pts[0], 2).front().seed == 1236);
}

TEST_CASE("noiseless lasso reaches the grid floor") {
  ExperimentConfig c = small();
  c.sigma = 0.0;
  c.n = 100;
  c.d = 200;
  c.lasso.path_length = 200;
  c.axis = {};
  const auto rs = run_trial(c, axis_points(c).front(), 0);
  CHECK(find(rs, "lasso-oracle").l2_error_sq <= 1e-6);
  CHECK(find(rs, "oracle-ls").l2_error_sq <= 1e-20);
}

TEST_CASE("oracle least squares does not depend on d") {
  ExperimentConfig c = small(Family::dimension_bias);
  c.axis = {"d", {50, 150, 400}};
  const auto pts = axis_points(c);
  for (std::size_t trial = 0; trial < 3; ++trial) {
    const double base = find(run_trial(c, pts[0], trial), "oracle-ls").l2_error_sq;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const double e = find(run_trial(c, pts[i], trial), "oracle-ls").l2_error_sq;
      CHECK(e == doctest::Approx(base).epsilon(1e-10));
    }
  }
  const TrialInstance a = generate_instance(c, pts[0], 1);
  const TrialInstance b = generate_instance(c, pts[2], 1);
  CHECK(a.truth.support == b.truth.support);
  CHECK(a.xi == b.xi);
  CHECK(a.X_val.rows() == 15);
}

TEST_CASE("sweep determinism and aggregation") {
  ExperimentConfig c = small();
  c.repetitions = 2;
  const SweepResult a = run_sweep(c);
  c.threads = 3;
  const SweepResult b = run_sweep(c);
  std::ostringstream ta, tb, sa, sb;
  write_trial_csv(ta, a.records);
  write_trial_csv(tb, b.records);
  write_summary_csv(sa, a.summaries);
  write_summary_csv(sb, b.summaries);
  CHECK(ta.str() == tb.str());
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().rfind("family,axis_value,estimator,median_l2,p25_l2,p75_l2,excluded_trials\n", 0) == 0);
  CHECK(ta.str().rfind("family,axis_value,trial,estimator,selected_t_or_lambda,l2_error_sq,"
                       "linf_on_support,linf_off_support,iterations_used,stop_reason\n", 0) == 0);
  CHECK(a.summaries.size() == 2 * 5);
  for (const auto& s : a.summaries) {
    CHECK(s.p25_l2 <= s.median_l2);
    CHECK(s.median_l2 <= s.p75_l2);
  }

  c.repetitions = 1;
  for (const auto& s : run_sweep(c).summaries) {
    CHECK(s.median_l2 == s.p25_l2);
    CHECK(s.median_l2 == s.p75_l2);
  }
}

TEST_CASE("summarize excludes failed trials") {
  std::vector<TrialRecord> rs(4);
  for (std::size_t i = 0; i < 4; ++i) {
    rs[i].family = "f";
    rs[i].axis_value = "1";
    rs[i].estimator = "gd";
    rs[i].l2_error_sq = double(i + 1);
  }
  rs[3].failed = true;
  rs[3].l2_error_sq = 1e9;
  const auto s = summarize(rs);
  REQUIRE(s.size() == 1);
  CHECK(s[0].excluded_trials == 1);
  CHECK(s[0].median_l2 == 2.0);
  CHECK(s[0].p25_l2 == 1.5);
  CHECK(s[0].p75_l2 == 2.5);

  rs.resize(1);
  rs[0].failed = true;
  CHECK(std::isnan(summarize(rs)[0].median_l2));
}

TEST_CASE("sample-complexity ratio row and alg-comparison records") {
  ExperimentConfig c = small(Family::sample_complexity);
  c.axis = {"n", {60}};
  c.axis2 = SweepAxis{"k", {3}};
  const auto rs = run_trial(c, axis_points(c).front(), 0);
  const TrialRecord& ratio = find(rs, "log2-ratio-gd-lasso");
  CHECK(ratio.l2_error_sq ==
        doctest::Approx(std::log2(find(rs, "gd").l2_error_sq / find(rs, "lasso-oracle").l2_error_sq)).epsilon(1e-12));

  ExperimentConfig a = default_config(Family::alg_comparison, Preset::desk);
  a.d = 200;
  a.k = 3;
  a.max_iters = 50000;
  const auto cmp = run_trial(a, axis_points(a).front(), 0);
  REQUIRE(cmp.size() == 2);
  for (const auto& r : cmp) {
    CHECK(r.stop_reason == "target-reached");
    CHECK(r.l2_error_sq <= a.target_l2_sq);
  }
  CHECK(find(cmp, "gd-alg1").iterations_used > find(cmp, "gd-alg2").iterations_used);
}

TEST_CASE("format_double round trips") {
  for (double x : {0.1, 1.0 / 3, 1e-12, 123456789.125, -2.5e300}) {
    CHECK(std::stod(format_double(x)) == x);
  }
  CHECK(format_double(0.0625) == "0.0625");
  CHECK(format_double(std::nan("")) == "nan");
}
