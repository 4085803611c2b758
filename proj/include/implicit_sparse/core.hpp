#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "implicit_sparse/errors.hpp"

namespace implicit_sparse {

using RealVector = std::vector<double>;
using IndexSet = std::vector<std::size_t>;

// Row-major dense matrix with finite entries.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t size, double scale = 1.0);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  RealVector column(std::size_t c) const;
  const std::vector<double>& data() const noexcept { return data_; }

  // Column-major copy of the entries (the transpose in row-major order).
  std::vector<double> column_major() const;

  // Horizontal concatenation [this, other].
  DenseMatrix hstack(const DenseMatrix& other) const;

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Deterministic generator keyed by (seed, stream id). Identical keys give identical draws.
class SeededRng {
 public:
  SeededRng(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  // Independent child generator; the child key depends only on (seed, stream id, tag).
  SeededRng derive(std::uint64_t tag) const;

  std::uint64_t next_u64() { return engine_(); }
  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  double normal();  // standard Gaussian
  double rademacher();
  std::size_t uniform_index(std::size_t bound);  // [0, bound)

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> gaussian_{0.0, 1.0};
};

// SplitMix64 finalizer; used to combine stream keys.
std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t stream_key(std::uint64_t a, std::uint64_t b) noexcept;

RealVector hadamard(std::span<const double> a, std::span<const double> b);
RealVector mat_apply(const DenseMatrix& X, std::span<const double> w);
RealVector mat_t_apply(const DenseMatrix& X, std::span<const double> r);
double inf_norm(std::span<const double> v) noexcept;

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> v) noexcept;
RealVector subtract(std::span<const double> a, std::span<const double> b);
RealVector add(std::span<const double> a, std::span<const double> b);
RealVector scaled(std::span<const double> v, double factor);

// In-place variants used by hot loops; `out` must already have the right length.
void mat_apply_into(const DenseMatrix& X, std::span<const double> w, std::span<double> out);
void mat_t_apply_into(const DenseMatrix& X, std::span<const double> r, std::span<double> out);

// X^T X / n as a dense d x d matrix.
DenseMatrix gram_over_n(const DenseMatrix& X);

// Solves A x = b for symmetric positive-definite A (Cholesky). Throws SingularityError.
RealVector cholesky_solve(const DenseMatrix& A, std::span<const double> b);

bool all_finite(std::span<const double> v) noexcept;

}  // namespace implicit_sparse
