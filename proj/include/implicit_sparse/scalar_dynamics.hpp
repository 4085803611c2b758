#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "implicit_sparse/core.hpp"

// One-dimensional multiplicative update sequences
//   x_{t+1} = x_t (1 - 4 eta (x_t - x* + b_t))^2
// and the closed-form time bounds that govern them.
namespace implicit_sparse::dynamics {

/// Bounded perturbation b_t fed into a scalar sequence.
class ErrorStream {
 public:
  enum class Kind { zero, constant, uniform, adversarial, replay };

  static ErrorStream zero();
  static ErrorStream constant(double value);
  static ErrorStream uniform(double bound, const SeededRng& rng);
  // b_t = B sign(x_t - x*): always pushes the iterate away from its target.
  static ErrorStream adversarial(double bound);
  // Replays `trace` cyclically, rescaled so that max |b_t| equals `bound`.
  static ErrorStream replay(std::vector<double> trace, double bound);

  Kind kind() const noexcept { return kind_; }
  double bound() const noexcept { return bound_; }

  double next(std::size_t t, double x_t, double x_star);

  // Same stream with every value negated.
  ErrorStream negated() const;

 private:
  ErrorStream(Kind kind, double bound) : kind_(kind), bound_(bound) {}

  Kind kind_;
  double bound_;
  double value_ = 0.0;  // constant
  double sign_ = 1.0;
  std::optional<SeededRng> rng_;
  std::vector<double> trace_;
};

struct ScalarSequenceSpec {
  double x0 = 0.0;
  double x_star = 0.0;
  double eta = 0.0;
  ErrorStream errors = ErrorStream::zero();
  std::size_t horizon = 0;  // number of updates; sequences hold horizon + 1 values
};

using Sequence = std::vector<double>;

Sequence iterate_plain(const ScalarSequenceSpec& spec);
Sequence iterate_bounded(const ScalarSequenceSpec& spec);

struct SandwichSequences {
  Sequence lower;  // constant error +B
  Sequence upper;  // constant error -B
};

/// Lower and upper envelopes of every sequence driven by an error stream bounded by B.
SandwichSequences sandwich(const ScalarSequenceSpec& spec);

struct PairSequences {
  Sequence x_plus;
  Sequence x_minus;
};

/// Co-evolving u^2 / v^2 analogues for a signed target, both started at x0 = alpha^2.
PairSequences iterate_pair(const ScalarSequenceSpec& spec);

enum class Direction { up, down };

/// First index whose value is >= threshold (up) or <= threshold (down).
std::optional<std::size_t> hitting_time(std::span<const double> sequence, double threshold,
                                        Direction direction);

struct HittingTimes {
  std::optional<std::size_t> t_signal;  // first t with x_t >= x* - eps
  std::optional<std::size_t> t_noise;   // first t with y_t >= alpha
};

/// Runs the signal sequence (target x*) and the noise sequence (target y*) from alpha^2.
HittingTimes signal_noise_race(double x_star, double y_star, double alpha, double eps, double eta,
                               std::size_t horizon);

/// 12 / (32 eta x*) * log((x*)^2 / (alpha^2 eps)): upper bound on the signal hitting time.
double bound_signal_time(double x_star, double alpha, double eps, double eta);

/// (1 / (32 eta B)) * log(1 / x0^2): time during which noise stays below sqrt(x0).
double bound_noise_time(double bound, double x0, double eta);

/// 1 / (10 eta B): time for an iterate in [x* + 2B, x* + 4B] to fall to x* + 2B.
double large_error_decay_time(double x_star, double bound, double eta);

struct ShrinkageProducts {
  double growth_product = 1.0;  // prod (1 + 8 eta c_t)^2
  double shrink_product = 1.0;  // prod (1 - 4 eta c_t)^2
};

/// Products over c_t = |b_t| + |p_t|; growth <= 1/alpha implies shrink >= alpha.
ShrinkageProducts shrinkage_floor(std::span<const double> error_magnitudes, double eta,
                                  double alpha);

/// (1 + 4 eta 2^-i B)^(2 (i + 1) T_i) with T_i = 2^i T_base and i = stages - 1.
double halving_schedule_bound(double bound, double eta, double t_base, std::size_t stages);

/// prod over the stream of (1 + 4 eta p_t)^2.
double growth_product(std::span<const double> stream, double eta);

}  // namespace implicit_sparse::dynamics
