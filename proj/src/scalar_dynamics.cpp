#include "implicit_sparse/scalar_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace implicit_sparse::dynamics {

ErrorStream ErrorStream::zero() { return ErrorStream(Kind::zero, 0.0); }

ErrorStream ErrorStream::constant(double value) {
  ErrorStream s(Kind::constant, std::abs(value));
  s.value_ = value;
  return s;
}

ErrorStream ErrorStream::uniform(double bound, const SeededRng& rng) {
  if (!(bound >= 0.0)) throw ParameterError("ErrorStream::uniform: bound must be nonnegative");
  ErrorStream s(Kind::uniform, bound);
  s.rng_ = rng;
  return s;
}

ErrorStream ErrorStream::adversarial(double bound) {
  if (!(bound >= 0.0)) throw ParameterError("ErrorStream::adversarial: bound must be nonnegative");
  return ErrorStream(Kind::adversarial, bound);
}

ErrorStream ErrorStream::replay(std::vector<double> trace, double bound) {
  if (trace.empty()) throw ParameterError("ErrorStream::replay: empty trace");
  const double peak = inf_norm(trace);
  ErrorStream s(Kind::replay, bound);
  if (peak > 0.0) {
    for (double& b : trace) b = std::clamp(b * (bound / peak), -bound, bound);
  }
  s.trace_ = std::move(trace);
  return s;
}

double ErrorStream::next(std::size_t t, double x_t, double x_star) {
  switch (kind_) {
    case Kind::zero:
      return 0.0;
    case Kind::constant:
      return sign_ * value_;
    case Kind::uniform:
      return sign_ * rng_->uniform(-bound_, bound_);
    case Kind::adversarial:
      return x_t > x_star ? sign_ * bound_ : (x_t < x_star ? -sign_ * bound_ : 0.0);
    case Kind::replay:
      return sign_ * trace_[t % trace_.size()];
  }
  return 0.0;
}

ErrorStream ErrorStream::negated() const {
  ErrorStream s = *this;
  s.sign_ = -s.sign_;
  return s;
}

namespace {

// One update of x_{t+1} = x_t (1 - r)^2 with r = 4 eta (x_t - x* + b).
//
// Within [x*/2, 3x*/2] the iterate is advanced through its offset d = x - x*, as
// d_{t+1} = d_t - x_t r (2 - r). Near a fixed point d + b is then computed exactly and the
// step never carries d across it, so x_t cannot round past the target. Elsewhere the
// multiplicative form keeps full relative precision for small x.
struct Stepper {
  double x_star;
  double eta;
  double x;
  double d;

  Stepper(double x0, double target, double step) : x_star(target), eta(step), x(x0), d(x0 - target) {}

  void advance(double b) {
    const double r = 4.0 * eta * (d + b);
    if (std::abs(d) <= 0.5 * std::abs(x_star)) {
      d -= x * r * (2.0 - r);
      x = x_star + d;
    } else {
      x *= (1.0 - r) * (1.0 - r);
      d = x - x_star;
    }
  }
};

}  // namespace

Sequence iterate_plain(const ScalarSequenceSpec& spec) {
  if (spec.errors.bound() != 0.0) {
    throw ParameterError("iterate_plain: error stream must be identically zero");
  }
  Sequence x(spec.horizon + 1);
  Stepper s(spec.x0, spec.x_star, spec.eta);
  x[0] = spec.x0;
  for (std::size_t t = 0; t < spec.horizon; ++t) {
    s.advance(0.0);
    x[t + 1] = s.x;
  }
  return x;
}

Sequence iterate_bounded(const ScalarSequenceSpec& spec) {
  ErrorStream errors = spec.errors;
  Sequence x(spec.horizon + 1);
  Stepper s(spec.x0, spec.x_star, spec.eta);
  x[0] = spec.x0;
  for (std::size_t t = 0; t < spec.horizon; ++t) {
    s.advance(errors.next(t, s.x, spec.x_star));
    x[t + 1] = s.x;
  }
  return x;
}

SandwichSequences sandwich(const ScalarSequenceSpec& spec) {
  const double B = spec.errors.bound();
  if (!(spec.x0 > 0.0) || spec.x0 > spec.x_star + B) {
    throw ParameterError("sandwich: requires 0 < x0 <= x* + B");
  }
  if (!(spec.eta > 0.0) || spec.eta > 1.0 / (16.0 * (spec.x_star + B))) {
    throw ParameterError("sandwich: requires 0 < eta <= 1 / (16 (x* + B))");
  }
  ScalarSequenceSpec lo = spec;
  lo.errors = ErrorStream::constant(B);
  ScalarSequenceSpec hi = spec;
  hi.errors = ErrorStream::constant(-B);
  return {iterate_bounded(lo), iterate_bounded(hi)};
}

PairSequences iterate_pair(const ScalarSequenceSpec& spec) {
  const double B = spec.errors.bound();
  const double target = std::abs(spec.x_star);
  if (!(target > 0.0)) throw ParameterError("iterate_pair: target must be nonzero");
  if (!(spec.x0 > 0.0) || spec.x0 > target / 4.0) {
    throw ParameterError("iterate_pair: requires 0 < alpha^2 <= |x*| / 4");
  }
  if (!(spec.eta > 0.0) || spec.eta > 1.0 / (12.0 * (target + B))) {
    throw ParameterError("iterate_pair: requires 0 < eta <= 1 / (12 (|x*| + B))");
  }
  ErrorStream errors = spec.errors;
  PairSequences out{Sequence(spec.horizon + 1), Sequence(spec.horizon + 1)};
  out.x_plus[0] = spec.x0;
  out.x_minus[0] = spec.x0;
  for (std::size_t t = 0; t < spec.horizon; ++t) {
    const double x = out.x_plus[t] - out.x_minus[t];
    const double b = errors.next(t, x, spec.x_star);
    const double r = 4.0 * spec.eta * (x - spec.x_star + b);
    out.x_plus[t + 1] = out.x_plus[t] * (1.0 - r) * (1.0 - r);
    out.x_minus[t + 1] = out.x_minus[t] * (1.0 + r) * (1.0 + r);
  }
  return out;
}

std::optional<std::size_t> hitting_time(std::span<const double> sequence, double threshold,
                                        Direction direction) {
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    const bool hit = direction == Direction::up ? sequence[t] >= threshold
                                                : sequence[t] <= threshold;
    if (hit) return t;
  }
  return std::nullopt;
}

HittingTimes signal_noise_race(double x_star, double y_star, double alpha, double eps, double eta,
                               std::size_t horizon) {
  ScalarSequenceSpec sig{alpha * alpha, x_star, eta, ErrorStream::zero(), horizon};
  ScalarSequenceSpec noise{alpha * alpha, y_star, eta, ErrorStream::zero(), horizon};
  const Sequence x = iterate_plain(sig);
  const Sequence y = iterate_plain(noise);
  return {hitting_time(x, x_star - eps, Direction::up), hitting_time(y, alpha, Direction::up)};
}

double bound_signal_time(double x_star, double alpha, double eps, double eta) {
  if (!(alpha > 0.0) || !(alpha * alpha < x_star) || !(eps > 0.0) || !(eta > 0.0)) {
    throw ParameterError("bound_signal_time: requires 0 < alpha^2 < x*, eps > 0, eta > 0");
  }
  return 12.0 / (32.0 * eta * x_star) * std::log(x_star * x_star / (alpha * alpha * eps));
}

double bound_noise_time(double bound, double x0, double eta) {
  if (!(x0 > 0.0 && x0 < 1.0) || !(bound > 0.0) || !(eta > 0.0) || eta > 1.0 / (8.0 * bound)) {
    throw ParameterError("bound_noise_time: requires 0 < x0 < 1, B > 0, 0 < eta <= 1/(8B)");
  }
  return 1.0 / (32.0 * eta * bound) * std::log(1.0 / (x0 * x0));
}

double large_error_decay_time(double /*x_star*/, double bound, double eta) {
  if (!(bound > 0.0) || !(eta > 0.0) || eta > 1.0 / (20.0 * bound)) {
    throw ParameterError("large_error_decay_time: requires B > 0, 0 < eta <= 1/(20B)");
  }
  return 1.0 / (10.0 * eta * bound);
}

ShrinkageProducts shrinkage_floor(std::span<const double> error_magnitudes, double eta,
                                  double /*alpha*/) {
  ShrinkageProducts p;
  for (double c : error_magnitudes) {
    const double grow = 1.0 + 8.0 * eta * c;
    const double shrink = 1.0 - 4.0 * eta * c;
    p.growth_product *= grow * grow;
    p.shrink_product *= shrink * shrink;
  }
  return p;
}

double halving_schedule_bound(double bound, double eta, double t_base, std::size_t stages) {
  if (stages == 0) throw ParameterError("halving_schedule_bound: stages must be >= 1");
  if (!(eta > 0.0) || (bound > 0.0 && eta > 1.0 / (4.0 * bound))) {
    throw ParameterError("halving_schedule_bound: requires 0 < eta <= 1/(4B)");
  }
  // Built from the same per-step factors as growth_product so equal streams compare equal.
  const int i = static_cast<int>(stages - 1);
  const double t_i = std::ldexp(t_base, i);
  const double f = 1.0 + 4.0 * eta * std::ldexp(bound, -i);
  const auto steps = static_cast<std::uint64_t>((i + 1) * t_i);
  double product = 1.0;
  for (std::uint64_t s = 0; s < steps; ++s) product *= f * f;
  return product;
}

double growth_product(std::span<const double> stream, double eta) {
  double p = 1.0;
  for (double x : stream) {
    const double f = 1.0 + 4.0 * eta * x;
    p *= f * f;
  }
  return p;
}

}  // namespace implicit_sparse::dynamics
