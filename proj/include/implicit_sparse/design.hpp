#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "implicit_sparse/core.hpp"

namespace implicit_sparse {

struct DesignKind {
  enum class Variant { rademacher, gaussian_isotropic, gaussian_equicorrelated };

  Variant variant = Variant::rademacher;
  double mu = 0.0;  // equicorrelated only; must lie in [0, 1)

  static DesignKind rademacher() { return {}; }
  static DesignKind gaussian() { return {Variant::gaussian_isotropic, 0.0}; }
  static DesignKind equicorrelated(double mu) { return {Variant::gaussian_equicorrelated, mu}; }

  bool operator==(const DesignKind&) const = default;
};

std::string to_string(DesignKind::Variant variant);
DesignKind::Variant parse_design_variant(const std::string& name);

enum class SignPattern { all_positive, random_signs };

struct SignalSpec {
  enum class Variant { constant, geometric };

  Variant variant = Variant::constant;
  double gamma = 1.0;  // constant magnitude
  double base = 2.0;   // geometric ratio; magnitudes base^0 .. base^(k-1)
  std::size_t d = 0;
  std::size_t k = 0;
  SignPattern signs = SignPattern::all_positive;
};

struct SparseSignal {
  RealVector w_star;
  IndexSet support;  // sorted ascending
  double w_max = 0.0;
  double w_min = 0.0;
  double kappa = 1.0;

  // Builds the summary statistics from an explicit vector; the support is its nonzero set.
  static SparseSignal from_vector(RealVector w_star);
};

struct RipCertificate {
  enum class Method { exact_enumeration, infinity_bound_sample };

  std::size_t sparsity = 0;
  double delta = 0.0;
  Method method = Method::exact_enumeration;
};

// Upper limit on the number of column subsets rip_delta_exact will enumerate.
inline constexpr std::uint64_t kRipEnumerationCap = 200'000;

// Columns are drawn independently from per-column substreams of `rng`, so the first d
// columns of a wider design coincide with the narrower design for the same key.
DenseMatrix gen_design(const DesignKind& kind, std::size_t n, std::size_t d, const SeededRng& rng);

SparseSignal gen_signal(const SignalSpec& spec, const SeededRng& rng);

RealVector gen_noise(double sigma, std::size_t n, const SeededRng& rng);

// ||X^T xi / n||_inf
double max_noise_stat(const DenseMatrix& X, std::span<const double> xi);

// Exact RIP constant of X / sqrt(n) at sparsity s by enumerating every s-column subset.
RipCertificate rip_delta_exact(const DenseMatrix& X, std::size_t s);

// ||(X^T X / n - I) z||_inf
double rip_inf_residual(const DenseMatrix& X, std::span<const double> z);

// Eigenvalues (ascending) of a symmetric matrix by cyclic Jacobi rotations.
RealVector symmetric_eigenvalues(const DenseMatrix& A, double tol = 1e-12);

// n choose k, saturating at UINT64_MAX.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k) noexcept;

}  // namespace implicit_sparse
