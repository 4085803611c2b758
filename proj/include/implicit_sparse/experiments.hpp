#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "implicit_sparse/core.hpp"
#include "implicit_sparse/descent.hpp"
#include "implicit_sparse/design.hpp"

namespace implicit_sparse {

enum class Family {
  init_size,
  alg_comparison,
  phase_transition_gamma,
  phase_transition_sigma,
  phase_transition_n,
  dimension_bias,
  sample_complexity,
  rip_violation,
};

std::string to_string(Family family);
Family parse_family(const std::string& name);

enum class Preset { desk, paper };
std::string to_string(Preset preset);
Preset parse_preset(const std::string& name);

enum class Algorithm { alg1, alg2 };

struct SweepAxis {
  std::string name;  // one of n, d, k, gamma, sigma, alpha, mu
  std::vector<double> values;

  bool operator==(const SweepAxis&) const = default;
};

struct LassoSettings {
  std::size_t path_length = 200;
  double min_ratio = 1e-4;
  double tol = 1e-10;
  std::size_t max_sweeps = 100000;

  bool operator==(const LassoSettings&) const = default;
};

struct ExperimentConfig {
  Family family = Family::phase_transition_gamma;
  Preset preset = Preset::paper;
  std::size_t n = 500;
  std::size_t d = 10000;
  std::size_t k = 25;
  double gamma = 1.0;
  double sigma = 1.0;
  double alpha = 1e-12;
  std::optional<double> eta;  // unset: 1 / (20 z_hat) from the w_max estimate
  double eta_tilde = kDefaultEtaTilde;
  std::size_t tau = 10;
  std::size_t repetitions = 30;
  DesignKind design;
  SignalSpec::Variant signal = SignalSpec::Variant::constant;
  double signal_base = 2.0;
  bool random_signs = false;
  Algorithm algorithm = Algorithm::alg2;
  std::size_t max_iters = 2000;
  std::size_t snapshot_every = 10;
  double validation_fraction = 0.25;
  double target_l2_sq = 0.01;  // alg-comparison: matched error level
  SweepAxis axis;
  std::optional<SweepAxis> axis2;
  LassoSettings lasso;
  std::uint64_t base_seed = 0;
  std::size_t threads = 1;  // 0: hardware concurrency

  bool operator==(const ExperimentConfig&) const = default;
};

/// Preset defaults with the family's own settings (axis grid, signal, algorithm) applied.
ExperimentConfig default_config(Family family, Preset preset);

/// Throws ParameterError on inconsistent settings (k > d, empty axis, ...).
void validate(const ExperimentConfig& cfg);

namespace estimators {
inline constexpr const char* gd = "gd";
inline constexpr const char* gd_oracle_t = "gd-oracle-t";
inline constexpr const char* gd_alg1 = "gd-alg1";
inline constexpr const char* gd_alg2 = "gd-alg2";
inline constexpr const char* lasso_oracle = "lasso-oracle";
inline constexpr const char* oracle_ls = "oracle-ls";
inline constexpr const char* null_estimator = "null";
inline constexpr const char* log2_ratio = "log2-ratio-gd-lasso";
}  // namespace estimators

struct TrialRecord {
  std::string family;
  std::string axis_value;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::string estimator;
  std::optional<double> selected;  // t for descent, lambda for the lasso
  double l2_error_sq = 0.0;
  double linf_on_support = 0.0;
  double linf_off_support = 0.0;
  std::size_t iterations_used = 0;
  std::string stop_reason;
  bool failed = false;
};

struct SweepSummary {
  std::string family;
  std::string axis_value;
  std::string estimator;
  double median_l2 = 0.0;
  double p25_l2 = 0.0;
  double p75_l2 = 0.0;
  std::size_t excluded_trials = 0;
};

struct SweepResult {
  std::vector<TrialRecord> records;  // ordered by (axis point, trial, estimator)
  std::vector<SweepSummary> summaries;
};

struct ValidationChoice {
  std::size_t index = 0;  // into the snapshot list
  std::size_t t = 0;
  double loss = 0.0;
};

/// Snapshot minimizing ||X_val w - y_val||^2; ties go to the smaller t.
ValidationChoice validation_stop(const Trajectory& trajectory, const DenseMatrix& X_val,
                                 std::span<const double> y_val);

/// 2 sigma sqrt(2 log(2d)) / sqrt(n)
double phase_transition_threshold(double sigma, std::size_t d, std::size_t n);

/// Linear interpolation between order statistics, p in [0, 1].
double percentile(std::vector<double> values, double p);

struct AxisPoint {
  std::vector<std::pair<std::string, double>> settings;
  std::string label;
};

/// Cartesian grid of the configured axes (a single unlabeled point when there is no axis).
std::vector<AxisPoint> axis_points(const ExperimentConfig& cfg);

/// cfg with the axis point's settings applied.
ExperimentConfig at_point(const ExperimentConfig& cfg, const AxisPoint& point);

struct TrialInstance {
  ExperimentConfig cfg;  // with the axis point applied
  std::uint64_t seed = 0;
  DenseMatrix X;
  RealVector y;
  RealVector xi;
  DenseMatrix X_val;  // ceil(validation_fraction * n) fresh rows
  RealVector y_val;
  SparseSignal truth;
};

/// Data of one trial; seed base_seed + trial_index, identical across axis points.
TrialInstance generate_instance(const ExperimentConfig& cfg, const AxisPoint& point,
                                std::size_t trial_index);

/// Descent settings for an instance: step from cfg.eta or 1/(20 z_hat), z_hat from the data.
DescentConfig descent_config_for(const TrialInstance& instance);

std::vector<TrialRecord> run_trial(const ExperimentConfig& cfg, const AxisPoint& point,
                                   std::size_t trial_index);

SweepResult run_sweep(const ExperimentConfig& cfg);

std::vector<SweepSummary> summarize(const std::vector<TrialRecord>& records);

std::string format_double(double x);
void write_trial_csv(std::ostream& os, const std::vector<TrialRecord>& records);
void write_summary_csv(std::ostream& os, const std::vector<SweepSummary>& summaries);

}  // namespace implicit_sparse
