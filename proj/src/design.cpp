#include "implicit_sparse/design.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace implicit_sparse {

namespace {

enum : std::uint64_t {
  kColumnTag = 0x636f6c,  // per-column draws
  kRowSharedTag = 0x726f77,
  kSupportTag = 0x737570,
  kSignTag = 0x736967,
};

}  // namespace

std::string to_string(DesignKind::Variant variant) {
  switch (variant) {
    case DesignKind::Variant::rademacher:
      return "rademacher";
    case DesignKind::Variant::gaussian_isotropic:
      return "gaussian";
    case DesignKind::Variant::gaussian_equicorrelated:
      return "equicorrelated";
  }
  return "unknown";
}

DesignKind::Variant parse_design_variant(const std::string& name) {
  if (name == "rademacher") return DesignKind::Variant::rademacher;
  if (name == "gaussian" || name == "gaussian-isotropic") {
    return DesignKind::Variant::gaussian_isotropic;
  }
  if (name == "equicorrelated" || name == "gaussian-equicorrelated") {
    return DesignKind::Variant::gaussian_equicorrelated;
  }
  throw ParameterError("unknown design kind '" + name + "'");
}

SparseSignal SparseSignal::from_vector(RealVector w_star) {
  SparseSignal s;
  s.w_star = std::move(w_star);
  s.w_min = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.w_star.size(); ++i) {
    const double a = std::abs(s.w_star[i]);
    if (a == 0.0) continue;
    s.support.push_back(i);
    s.w_max = std::max(s.w_max, a);
    s.w_min = std::min(s.w_min, a);
  }
  if (s.support.empty()) {
    s.w_min = 0.0;
    s.kappa = 1.0;
  } else {
    s.kappa = s.w_max / s.w_min;
  }
  return s;
}

DenseMatrix gen_design(const DesignKind& kind, std::size_t n, std::size_t d,
                       const SeededRng& rng) {
  if (n == 0 || d == 0) throw ParameterError("gen_design: n and d must be positive");
  if (kind.variant == DesignKind::Variant::gaussian_equicorrelated &&
      !(kind.mu >= 0.0 && kind.mu < 1.0)) {
    throw ParameterError("gen_design: equicorrelation mu must lie in [0, 1)");
  }

  DenseMatrix X(n, d);
  switch (kind.variant) {
    case DesignKind::Variant::rademacher:
      for (std::size_t c = 0; c < d; ++c) {
        SeededRng col = rng.derive(stream_key(kColumnTag, c));
        for (std::size_t r = 0; r < n; ++r) X(r, c) = col.rademacher();
      }
      break;
    case DesignKind::Variant::gaussian_isotropic:
      for (std::size_t c = 0; c < d; ++c) {
        SeededRng col = rng.derive(stream_key(kColumnTag, c));
        for (std::size_t r = 0; r < n; ++r) X(r, c) = col.normal();
      }
      break;
    case DesignKind::Variant::gaussian_equicorrelated: {
      // Row i is sqrt(1 - mu) g_i + sqrt(mu) h_i 1, covariance (1 - mu) I + mu 11^T.
      const double a = std::sqrt(1.0 - kind.mu);
      const double b = std::sqrt(kind.mu);
      SeededRng shared = rng.derive(kRowSharedTag);
      RealVector h(n);
      for (auto& x : h) x = shared.normal();
      for (std::size_t c = 0; c < d; ++c) {
        SeededRng col = rng.derive(stream_key(kColumnTag, c));
        for (std::size_t r = 0; r < n; ++r) X(r, c) = a * col.normal() + b * h[r];
      }
      break;
    }
  }
  return X;
}

SparseSignal gen_signal(const SignalSpec& spec, const SeededRng& rng) {
  if (spec.k > spec.d) throw ParameterError("gen_signal: sparsity k exceeds dimension d");
  if (spec.d == 0) throw ParameterError("gen_signal: d must be positive");
  if (spec.variant == SignalSpec::Variant::constant && spec.gamma == 0.0) {
    throw ParameterError("gen_signal: gamma must be nonzero");
  }
  if (spec.variant == SignalSpec::Variant::geometric && !(spec.base > 1.0)) {
    throw ParameterError("gen_signal: geometric base must exceed 1");
  }

  // Partial Fisher-Yates: the first k entries form a uniform k-subset.
  SeededRng pick = rng.derive(kSupportTag);
  std::vector<std::size_t> perm(spec.d);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = 0; i < spec.k; ++i) {
    const std::size_t j = i + pick.uniform_index(spec.d - i);
    std::swap(perm[i], perm[j]);
  }
  // Magnitude i goes to the i-th drawn index so geometric levels land at random positions.
  RealVector w(spec.d, 0.0);
  SeededRng signs = rng.derive(kSignTag);
  for (std::size_t i = 0; i < spec.k; ++i) {
    double magnitude = spec.variant == SignalSpec::Variant::constant
                           ? std::abs(spec.gamma)
                           : std::pow(spec.base, static_cast<double>(i));
    double sign = spec.variant == SignalSpec::Variant::constant && spec.gamma < 0 ? -1.0 : 1.0;
    if (spec.signs == SignPattern::random_signs) sign *= signs.rademacher();
    w[perm[i]] = sign * magnitude;
  }
  return SparseSignal::from_vector(std::move(w));
}

RealVector gen_noise(double sigma, std::size_t n, const SeededRng& rng) {
  if (!(sigma >= 0.0)) throw ParameterError("gen_noise: sigma must be nonnegative");
  RealVector xi(n, 0.0);
  if (sigma == 0.0) return xi;
  SeededRng draw = rng;
  for (auto& x : xi) x = sigma * draw.normal();
  return xi;
}

double max_noise_stat(const DenseMatrix& X, std::span<const double> xi) {
  RealVector g = mat_t_apply(X, xi);
  return inf_norm(g) / static_cast<double>(X.rows());
}

std::uint64_t binomial(std::uint64_t n, std::uint64_t k) noexcept {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const std::uint64_t num = n - k + i;
    // result * num / i stays exact because result * num is divisible by i.
    if (result > std::numeric_limits<std::uint64_t>::max() / num) {
      return std::numeric_limits<std::uint64_t>::max();
    }
    result = result * num / i;
  }
  return result;
}

RealVector symmetric_eigenvalues(const DenseMatrix& A, double tol) {
  const std::size_t m = A.rows();
  if (A.cols() != m) throw DimensionError("symmetric_eigenvalues: matrix is not square");
  DenseMatrix a = A;

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < 100 && off_norm() > tol; ++sweep) {
    for (std::size_t p = 0; p + 1 < m; ++p) {
      for (std::size_t q = p + 1; q < m; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t r = 0; r < m; ++r) {
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = c * arp - s * arq;
          a(r, q) = s * arp + c * arq;
        }
        for (std::size_t r = 0; r < m; ++r) {
          const double apr = a(p, r);
          const double aqr = a(q, r);
          a(p, r) = c * apr - s * aqr;
          a(q, r) = s * apr + c * aqr;
        }
      }
    }
  }

  RealVector eig(m);
  for (std::size_t i = 0; i < m; ++i) eig[i] = a(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

RipCertificate rip_delta_exact(const DenseMatrix& X, std::size_t s) {
  const std::size_t d = X.cols();
  if (s == 0 || s > d) throw ParameterError("rip_delta_exact: sparsity must lie in [1, d]");
  const std::uint64_t subsets = binomial(d, s);
  if (subsets > kRipEnumerationCap) {
    throw CapacityError("rip_delta_exact: C(" + std::to_string(d) + ", " + std::to_string(s) +
                        ") subsets exceed the enumeration cap of " +
                        std::to_string(kRipEnumerationCap));
  }

  const DenseMatrix G = gram_over_n(X);
  std::vector<std::size_t> idx(s);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  DenseMatrix sub(s, s);
  double delta = 0.0;
  while (true) {
    for (std::size_t i = 0; i < s; ++i)
      for (std::size_t j = 0; j < s; ++j) sub(i, j) = G(idx[i], idx[j]);
    const RealVector eig = symmetric_eigenvalues(sub);
    delta = std::max({delta, eig.back() - 1.0, 1.0 - eig.front()});

    // Next combination in lexicographic order.
    std::size_t i = s;
    while (i > 0 && idx[i - 1] == d - s + (i - 1)) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < s; ++j) idx[j] = idx[j - 1] + 1;
  }
  return {s, std::max(delta, 0.0), RipCertificate::Method::exact_enumeration};
}

double rip_inf_residual(const DenseMatrix& X, std::span<const double> z) {
  if (X.cols() != z.size()) throw DimensionError("rip_inf_residual: dimension mismatch");
  RealVector g = mat_t_apply(X, mat_apply(X, z));
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  double m = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) m = std::max(m, std::abs(g[i] * inv_n - z[i]));
  return m;
}

}  // namespace implicit_sparse
