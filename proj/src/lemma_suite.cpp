#include "implicit_sparse/lemma_suite.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>

#include "implicit_sparse/descent.hpp"
#include "implicit_sparse/design.hpp"
#include "implicit_sparse/scalar_dynamics.hpp"

namespace implicit_sparse::dynamics {

namespace {

constexpr std::size_t kTail = 64;  // extra steps checked past a closed-form time

using Failure = std::optional<std::string>;

struct Case {
  SeededRng& rng;
  std::size_t index;
  const std::vector<double>& trace;
};

using Property = std::function<Failure(Case&)>;

double log_uniform(SeededRng& rng, double lo, double hi) {
  return std::exp(rng.uniform(std::log(lo), std::log(hi)));
}

// U(0, 1] so that a drawn fraction is never exactly zero.
double open_unit(SeededRng& rng) { return 1.0 - rng.uniform(); }

double draw_x_star(SeededRng& rng) { return log_uniform(rng, 1e-3, 1e3); }
double draw_alpha(SeededRng& rng) { return log_uniform(rng, 1e-8, 1e-1); }
double draw_eta(SeededRng& rng, double eta_max) { return eta_max * rng.uniform(0.1, 1.0); }

std::size_t ceil_count(double x) { return x <= 0.0 ? 0 : static_cast<std::size_t>(std::ceil(x)); }

ErrorStream pick_stream(Case& c, double bound) {
  switch (c.index % 5) {
    case 0:
      return ErrorStream::constant(bound);
    case 1:
      return ErrorStream::constant(-bound);
    case 2:
      return ErrorStream::uniform(bound, c.rng.derive(0x62));
    case 3:
      return ErrorStream::adversarial(bound);
    default:
      return ErrorStream::replay(c.trace, bound);
  }
}

std::string describe(std::initializer_list<std::pair<const char*, double>> fields) {
  std::ostringstream os;
  os << std::setprecision(17);
  bool first = true;
  for (const auto& [k, v] : fields) {
    os << (first ? "" : " ") << k << "=" << v;
    first = false;
  }
  return os.str();
}

Failure monotone_below(Case& c) {
  const double xs = draw_x_star(c.rng);
  const double alpha = draw_alpha(c.rng);
  const double x0 = (c.index % 2 == 0 && alpha * alpha <= xs) ? alpha * alpha : xs * open_unit(c.rng);
  const double eta = draw_eta(c.rng, 1.0 / (8.0 * xs));
  const Sequence x = iterate_plain({x0, xs, eta, ErrorStream::zero(), ceil_count(40.0 / (eta * xs))});
  for (std::size_t t = 0; t + 1 < x.size(); ++t) {
    if (!(x[t] <= x[t + 1] && x[t + 1] <= xs)) {
      return describe({{"t", double(t)}, {"x0", x0}, {"x*", xs}, {"eta", eta}, {"x_t", x[t]},
                       {"x_t+1", x[t + 1]}});
    }
  }
  return std::nullopt;
}

Failure monotone_above(Case& c) {
  const double xs = draw_x_star(c.rng);
  const double x0 = xs * (1.0 + 0.5 * c.rng.uniform());
  const double eta = draw_eta(c.rng, 1.0 / (12.0 * xs));
  const Sequence x = iterate_plain({x0, xs, eta, ErrorStream::zero(), ceil_count(40.0 / (eta * xs))});
  for (std::size_t t = 0; t + 1 < x.size(); ++t) {
    if (!(x[t] >= x[t + 1] && x[t + 1] >= xs)) {
      return describe({{"t", double(t)}, {"x0", x0}, {"x*", xs}, {"eta", eta}, {"x_t", x[t]},
                       {"x_t+1", x[t + 1]}});
    }
  }
  return std::nullopt;
}

Failure gap_halving(Case& c, bool below) {
  const double xs = draw_x_star(c.rng);
  const double gap = 0.5 * xs * open_unit(c.rng);
  const double x0 = below ? xs - gap : xs + gap;
  const double eta = draw_eta(c.rng, below ? 1.0 / (8.0 * xs) : 1.0 / (12.0 * xs));
  const std::size_t T = ceil_count(below ? 1.0 / (4.0 * eta * xs) : 1.0 / (8.0 * eta * xs));
  const Sequence x = iterate_plain({x0, xs, eta, ErrorStream::zero(), T + kTail});
  const double g0 = std::abs(x0 - xs);
  for (std::size_t t = T; t < x.size(); ++t) {
    const double g = below ? xs - x[t] : x[t] - xs;
    if (!(g >= 0.0 && g <= 0.5 * g0)) {
      return describe({{"t", double(t)}, {"T", double(T)}, {"x0", x0}, {"x*", xs}, {"eta", eta},
                       {"x_t", x[t]}});
    }
  }
  return std::nullopt;
}

Failure exp_approach_near(Case& c) {
  const double xs = draw_x_star(c.rng);
  const double gap = 0.5 * xs * open_unit(c.rng);
  const double eps = gap * log_uniform(c.rng, 1e-10, 1.0) * (1.0 - 1e-12);
  const double x0 = c.index % 2 == 0 ? xs - gap : xs + gap;
  const double eta = draw_eta(c.rng, 1.0 / (12.0 * xs));
  const std::size_t T = ceil_count(3.0 / (8.0 * eta * xs) * std::log(gap / eps));
  const Sequence x = iterate_plain({x0, xs, eta, ErrorStream::zero(), T + kTail});
  for (std::size_t t = T; t < x.size(); ++t) {
    if (!(std::abs(xs - x[t]) <= eps)) {
      return describe({{"t", double(t)}, {"T", double(T)}, {"x0", x0}, {"x*", xs}, {"eta", eta},
                       {"eps", eps}, {"x_t", x[t]}});
    }
  }
  return std::nullopt;
}

Failure exp_approach_far(Case& c) {
  const double xs = draw_x_star(c.rng);
  const double alpha = draw_alpha(c.rng);
  const double x0 = c.index % 2 == 0 ? std::min(alpha * alpha, 0.5 * xs)
                                     : 0.5 * xs * log_uniform(c.rng, 1e-12, 1.0);
  const double eps = xs * log_uniform(c.rng, 1e-10, 0.5);
  const double eta = draw_eta(c.rng, 1.0 / (8.0 * xs));
  const std::size_t T =
      ceil_count(3.0 / (8.0 * eta * xs) * std::log(xs * xs / (4.0 * x0 * eps)));
  const Sequence x = iterate_plain({x0, xs, eta, ErrorStream::zero(), T + kTail});
  for (std::size_t t = T; t < x.size(); ++t) {
    if (!(xs - eps <= x[t] && x[t] <= xs)) {
      return describe({{"t", double(t)}, {"T", double(T)}, {"x0", x0}, {"x*", xs}, {"eta", eta},
                       {"eps", eps}, {"x_t", x[t]}});
    }
  }
  return std::nullopt;
}

Failure selective_fitting(Case& c) {
  const double B = log_uniform(c.rng, 1e-3, 1e3);
  const double alpha = draw_alpha(c.rng);
  const double x0 = alpha * alpha;
  const double eta = draw_eta(c.rng, 1.0 / (8.0 * B));
  const std::size_t T = static_cast<std::size_t>(std::floor(bound_noise_time(B, x0, eta)));
  ErrorStream errors = c.index % 3 == 0   ? ErrorStream::constant(B)
                       : c.index % 3 == 1 ? ErrorStream::uniform(B, c.rng.derive(0x62))
                                          : ErrorStream::replay(c.trace, B);
  const double cap = std::sqrt(x0);
  double x = x0;
  for (std::size_t t = 0; t <= T; ++t) {
    if (!(x <= cap)) {
      return describe({{"t", double(t)}, {"T", double(T)}, {"x0", x0}, {"B", B}, {"eta", eta},
                       {"x_t", x}});
    }
    const double f = 1.0 + 4.0 * eta * errors.next(t, x, 0.0);
    x *= f * f;
  }
  return std::nullopt;
}

Failure sandwich_property(Case& c) {
  const double xs = draw_x_star(c.rng);
  const double B = xs * log_uniform(c.rng, 1e-3, 1.0);
  const double alpha = draw_alpha(c.rng);
  const double x0 = (c.index % 2 == 0 && alpha * alpha <= xs + B) ? alpha * alpha
                                                                  : (xs + B) * open_unit(c.rng);
  const double eta = draw_eta(c.rng, 1.0 / (16.0 * (xs + B)));
  ScalarSequenceSpec spec{x0, xs, eta, pick_stream(c, B), ceil_count(40.0 / (eta * (xs + B)))};
  const SandwichSequences env = sandwich(spec);
  const Sequence x = iterate_bounded(spec);
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (!(0.0 <= env.lower[t] && env.lower[t] <= x[t] && x[t] <= env.upper[t] &&
          env.upper[t] <= xs + B)) {
      return describe({{"t", double(t)}, {"x0", x0}, {"x*", xs}, {"B", B}, {"eta", eta},
                       {"lower", env.lower[t]}, {"x_t", x[t]}, {"upper", env.upper[t]}});
    }
  }
  return std::nullopt;
}

// Both tube clauses are statements about a single step of the map. They are checked at every
// visited state with the step evaluated in quad precision, since near the tube boundary the
// double-precision path cannot resolve the strict decrease.
Failure b_tube(Case& c) {
  using quad = __float128;
  const double xs = draw_x_star(c.rng);
  const double B = 0.2 * xs * open_unit(c.rng);
  const double x0 = 1.2 * xs * open_unit(c.rng);
  const double eta = draw_eta(c.rng, 5.0 / (96.0 * xs));
  ErrorStream errors = pick_stream(c, B);
  const Sequence x = iterate_bounded({x0, xs, eta, errors, ceil_count(40.0 / (eta * xs))});
  auto qabs = [](quad v) { return v < 0 ? -v : v; };
  for (std::size_t t = 0; t + 1 < x.size(); ++t) {
    const double b = errors.next(t, x[t], xs);
    const quad r = quad(4.0) * quad(eta) * (quad(x[t]) - quad(xs) + quad(b));
    const quad next = quad(x[t]) * (1 - r) * (1 - r);
    const quad g = qabs(quad(x[t]) - quad(xs));
    const quad g1 = qabs(next - quad(xs));
    const bool ok = g > quad(B) ? g1 < g : g1 <= quad(B);
    if (!ok) {
      return describe({{"t", double(t)}, {"x0", x0}, {"x*", xs}, {"B", B}, {"eta", eta},
                       {"x_t", x[t]}, {"b_t", b}, {"x_t+1", double(next)}});
    }
  }
  return std::nullopt;
}

Failure bounded_gap_halving(Case& c) {
  const double xs = draw_x_star(c.rng);
  const double eta = draw_eta(c.rng, 5.0 / (96.0 * xs));
  double B, x0;
  std::size_t T;
  if (c.index % 2 == 0) {
    // [(x* - B)/2, x* - 5B] is nonempty iff B <= x*/9.
    B = xs / 9.0 * open_unit(c.rng);
    const double lo = 0.5 * (xs - B);
    const double hi = xs - 5.0 * B;
    x0 = std::min(hi, lo + (hi - lo) * c.rng.uniform());
    T = ceil_count(5.0 / (8.0 * eta * xs));
  } else {
    // (x* + 4B, 6x*/5) is nonempty iff B < x*/20.
    B = xs / 20.0 * open_unit(c.rng) * (1.0 - 1e-9);
    const double lo = xs + 4.0 * B;
    const double hi = 1.2 * xs;
    x0 = lo + (hi - lo) * (0.5 + 0.5 * c.rng.uniform() * (1.0 - 1e-9));
    T = ceil_count(1.0 / (4.0 * eta * xs));
  }
  const Sequence x = iterate_bounded({x0, xs, eta, pick_stream(c, B), T + kTail});
  const double g0 = std::abs(x0 - xs);
  for (std::size_t t = T; t < x.size(); ++t) {
    if (!(std::abs(xs - x[t]) <= 0.5 * g0)) {
      return describe({{"t", double(t)}, {"T", double(T)}, {"x0", x0}, {"x*", xs}, {"B", B},
                       {"eta", eta}, {"x_t", x[t]}});
    }
  }
  return std::nullopt;
}

Failure bounded_exp_approach(Case& c) {
  const double xs = draw_x_star(c.rng);
  const double eta = draw_eta(c.rng, 5.0 / (96.0 * xs));
  if (c.index % 2 == 0) {
    const double B = 0.2 * xs * 0.9 * open_unit(c.rng);
    const double room = 0.2 * xs - B;
    const double eps = room * log_uniform(c.rng, 1e-10, 1.0) * 0.999;
    const double gap = B + eps + (0.2 * xs - B - eps) * open_unit(c.rng);
    const double x0 = c.index % 4 == 0 ? xs - gap : xs + gap;
    const std::size_t T = ceil_count(15.0 / (32.0 * eta * xs) * std::log(gap / eps));
    const Sequence x = iterate_bounded({x0, xs, eta, pick_stream(c, B), T + kTail});
    for (std::size_t t = T; t < x.size(); ++t) {
      if (!(std::abs(xs - x[t]) <= B + eps)) {
        return describe({{"t", double(t)}, {"T", double(T)}, {"x0", x0}, {"x*", xs}, {"B", B},
                         {"eps", eps}, {"eta", eta}, {"x_t", x[t]}});
      }
    }
    return std::nullopt;
  }
  const double B = 0.2 * xs * open_unit(c.rng);
  const double eps = (xs - B) * log_uniform(c.rng, 1e-10, 0.5);
  const double alpha = draw_alpha(c.rng);
  const double top = xs - B - eps;
  const double x0 = c.index % 4 == 1 ? std::min(alpha * alpha, top) : top * open_unit(c.rng);
  const std::size_t T =
      ceil_count(15.0 / (32.0 * eta * xs) * std::log(xs * xs / (x0 * eps)));
  const Sequence x = iterate_bounded({x0, xs, eta, pick_stream(c, B), T + kTail});
  for (std::size_t t = T; t < x.size(); ++t) {
    if (!(xs - B - eps <= x[t] && x[t] <= xs + B)) {
      return describe({{"t", double(t)}, {"T", double(T)}, {"x0", x0}, {"x*", xs}, {"B", B},
                       {"eps", eps}, {"eta", eta}, {"x_t", x[t]}});
    }
  }
  return std::nullopt;
}

Failure large_error_decay(Case& c) {
  const double xs = draw_x_star(c.rng);
  const double B = xs * log_uniform(c.rng, 1e-3, 10.0);
  const double x0 = xs + 2.0 * B * (1.0 + c.rng.uniform());
  const double eta = draw_eta(c.rng, 1.0 / (20.0 * B));
  const double bound = large_error_decay_time(xs, B, eta);
  const std::size_t T = static_cast<std::size_t>(std::floor(bound));
  const Sequence x = iterate_bounded({x0, xs, eta, pick_stream(c, B), T + 1});
  const auto hit = hitting_time(std::span<const double>(x.data(), T + 1), xs + 2.0 * B,
                                Direction::down);
  if (!hit) {
    return describe({{"T", double(T)}, {"x0", x0}, {"x*", xs}, {"B", B}, {"eta", eta},
                     {"x_T", x[T]}});
  }
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (!(x[t] >= 0.0)) {
      return describe({{"t", double(t)}, {"x0", x0}, {"x*", xs}, {"B", B}, {"eta", eta},
                       {"x_t", x[t]}});
    }
  }
  return std::nullopt;
}

Failure shrinkage(Case& c) {
  const double B = log_uniform(c.rng, 1e-3, 1e3);
  const double alpha = draw_alpha(c.rng);
  const double eta = draw_eta(c.rng, 1.0 / (8.0 * B));
  // Long enough for the growth product to pass 1/alpha.
  const std::size_t horizon = ceil_count(std::log(1.0 / alpha) / (8.0 * eta * B) * 4.0) + kTail;
  std::vector<double> mags(horizon);
  SeededRng draws = c.rng.derive(0x73);
  for (std::size_t t = 0; t < horizon; ++t) {
    switch (c.index % 3) {
      case 0: mags[t] = B; break;
      case 1: mags[t] = B * draws.uniform(); break;
      default: mags[t] = std::min(B, std::abs(c.trace[t % c.trace.size()]) * B / inf_norm(c.trace));
    }
  }
  for (std::size_t t = 1; t <= horizon; ++t) {
    const ShrinkageProducts p = shrinkage_floor(std::span<const double>(mags.data(), t), eta, alpha);
    if (p.growth_product > 1.0 / alpha) break;
    if (!(p.shrink_product >= alpha)) {
      return describe({{"t", double(t)}, {"B", B}, {"alpha", alpha}, {"eta", eta},
                       {"growth", p.growth_product}, {"shrink", p.shrink_product}});
    }
  }
  return std::nullopt;
}

Failure halving_schedule(Case& c) {
  const double B = log_uniform(c.rng, 1e-3, 1e3);
  const double eta = draw_eta(c.rng, 1.0 / (4.0 * B));
  const std::size_t t_base = 1 + c.rng.uniform_index(8);
  const std::size_t stages = 1 + c.rng.uniform_index(6);
  SeededRng draws = c.rng.derive(0x68);
  std::vector<double> p;
  for (std::size_t i = 0; i < stages; ++i) {
    const double level = std::ldexp(B, -static_cast<int>(i));
    const std::size_t len = t_base << i;
    for (std::size_t s = 0; s < len; ++s) {
      p.push_back(c.index % 2 == 0 ? level : draws.uniform(-level, level));
    }
    const double product = growth_product(p, eta);
    const double bound = halving_schedule_bound(B, eta, double(t_base), i + 1);
    if (!(product <= bound)) {
      return describe({{"stage", double(i)}, {"B", B}, {"eta", eta}, {"T", double(t_base)},
                       {"product", product}, {"bound", bound}});
    }
  }
  return std::nullopt;
}

Failure pair_product(Case& c) {
  const double mag = draw_x_star(c.rng);
  const double xs = c.index % 2 == 0 ? mag : -mag;
  const double B = mag * log_uniform(c.rng, 1e-3, 1.0);
  const double alpha = draw_alpha(c.rng);
  const double x0 = std::min(alpha * alpha, mag / 4.0);
  const double eta = draw_eta(c.rng, 1.0 / (12.0 * (mag + B)));
  ErrorStream errors = pick_stream(c, B);
  ScalarSequenceSpec spec{x0, xs, eta, errors, ceil_count(40.0 / (eta * (mag + B)))};
  const PairSequences seq = iterate_pair(spec);
  const double a4 = x0 * x0;
  // Replay the stream to accumulate prod (1 + 4 eta |b_i|) along the way.
  ErrorStream replay = errors;
  double envelope = x0;
  for (std::size_t t = 0; t < seq.x_plus.size(); ++t) {
    const double wrong = xs > 0 ? seq.x_minus[t] : seq.x_plus[t];
    if (!(seq.x_plus[t] * seq.x_minus[t] <= a4) || !(wrong <= envelope)) {
      return describe({{"t", double(t)}, {"x*", xs}, {"B", B}, {"alpha", alpha}, {"eta", eta},
                       {"x_plus", seq.x_plus[t]}, {"x_minus", seq.x_minus[t]},
                       {"envelope", envelope}});
    }
    const double b = replay.next(t, seq.x_plus[t] - seq.x_minus[t], xs);
    const double f = 1.0 + 4.0 * eta * std::abs(b);
    envelope *= f * f;
  }
  return std::nullopt;
}

Failure signal_noise(Case& c) {
  const double xs = draw_x_star(c.rng);
  const double ys = xs / 12.0 * open_unit(c.rng);
  const double eps = xs * log_uniform(c.rng, 1e-6, 0.5);
  // alpha^2 <= x*/2 keeps the signal start inside the far-approach regime.
  const double alpha = std::min({draw_alpha(c.rng), std::sqrt(eps) / xs, std::sqrt(0.5 * xs)});
  const double eta = draw_eta(c.rng, 1.0 / (8.0 * xs));
  const double bound = bound_signal_time(xs, alpha, eps, eta);
  const HittingTimes h = signal_noise_race(xs, ys, alpha, eps, eta, ceil_count(bound) + kTail);
  const double ts = h.t_signal ? double(*h.t_signal) : -1.0;
  const double tn = h.t_noise ? double(*h.t_noise) : -1.0;
  if (!h.t_signal || double(*h.t_signal) > bound || (h.t_noise && *h.t_noise < *h.t_signal)) {
    return describe({{"x*", xs}, {"y*", ys}, {"eps", eps}, {"alpha", alpha}, {"eta", eta},
                     {"t_signal", ts}, {"t_noise", tn}, {"bound", bound}});
  }
  return std::nullopt;
}

struct NamedProperty {
  const char* name;
  Property run;
};

const std::vector<NamedProperty>& properties() {
  static const std::vector<NamedProperty> all = {
      {"monotone-below", monotone_below},
      {"monotone-above", monotone_above},
      {"gap-halving-below", [](Case& c) { return gap_halving(c, true); }},
      {"gap-halving-above", [](Case& c) { return gap_halving(c, false); }},
      {"exp-approach-near", exp_approach_near},
      {"exp-approach-far", exp_approach_far},
      {"selective-fitting", selective_fitting},
      {"sandwich", sandwich_property},
      {"b-tube", b_tube},
      {"bounded-gap-halving", bounded_gap_halving},
      {"bounded-exp-approach", bounded_exp_approach},
      {"large-error-decay", large_error_decay},
      {"shrinkage-floor", shrinkage},
      {"halving-schedule", halving_schedule},
      {"pair-product", pair_product},
      {"signal-noise-race", signal_noise},
  };
  return all;
}

PropertyResult run_one(std::size_t id, const NamedProperty& prop, const LemmaSuiteOptions& options,
                       const std::vector<double>& trace) {
  PropertyResult result;
  result.name = prop.name;
  for (std::size_t i = 0; i < options.cases; ++i) {
    SeededRng rng(options.seed, stream_key(id, i));
    Case c{rng, i, trace};
    Failure f = prop.run(c);
    ++result.cases;
    if (f) {
      if (result.failures == 0) result.first_failure = "case " + std::to_string(i) + ": " + *f;
      ++result.failures;
    }
  }
  return result;
}

}  // namespace

std::vector<double> descent_error_trace() {
  const std::size_t n = 40, d = 80;
  SeededRng rng(7, 0);
  const DenseMatrix X = gen_design({}, n, d, rng.derive(1));
  SignalSpec spec;
  spec.d = d;
  spec.k = 3;
  const SparseSignal signal = gen_signal(spec, rng.derive(2));
  const RealVector xi = gen_noise(0.5, n, rng.derive(3));
  const RealVector y = add(mat_apply(X, signal.w_star), xi);

  const std::size_t j = signal.support.front();
  DescentState state = initial_state(d, 1e-6, 0.02);
  std::vector<double> trace;
  for (std::size_t t = 0; t < 400; ++t) {
    const RealVector wp = hadamard(state.u, state.u);
    const RealVector wm = hadamard(state.v, state.v);
    trace.push_back(decompose(wp, wm, signal, X, xi).b[j]);
    state = gd_step(state, X, y);
  }
  return trace;
}

std::vector<std::string> lemma_property_names() {
  std::vector<std::string> names;
  for (const auto& p : properties()) names.emplace_back(p.name);
  return names;
}

std::vector<PropertyResult> run_lemma_suite(const LemmaSuiteOptions& options) {
  const std::vector<double> trace = descent_error_trace();
  std::vector<PropertyResult> out;
  const auto& all = properties();
  for (std::size_t i = 0; i < all.size(); ++i) out.push_back(run_one(i, all[i], options, trace));
  return out;
}

PropertyResult run_lemma_property(const std::string& name, const LemmaSuiteOptions& options) {
  const auto& all = properties();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (name == all[i].name) return run_one(i, all[i], options, descent_error_trace());
  }
  throw ParameterError("unknown lemma property '" + name + "'");
}

}  // namespace implicit_sparse::dynamics
