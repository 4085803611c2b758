#include "implicit_sparse/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace implicit_sparse {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw DimensionError(std::string(op) + ": length mismatch (" + std::to_string(a) + " vs " +
                         std::to_string(b) + ")");
  }
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("DenseMatrix: data length " + std::to_string(data_.size()) +
                         " does not equal rows*cols = " + std::to_string(rows_ * cols_));
  }
  if (!all_finite(data_)) {
    throw ParameterError("DenseMatrix: entries must be finite");
  }
}

DenseMatrix DenseMatrix::identity(std::size_t size, double scale) {
  DenseMatrix m(size, size);
  for (std::size_t i = 0; i < size; ++i) m(i, i) = scale;
  return m;
}

RealVector DenseMatrix::column(std::size_t c) const {
  RealVector out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

std::vector<double> DenseMatrix::column_major() const {
  std::vector<double> out(data_.size());
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) out[c * rows_ + r] = data_[r * cols_ + c];
  }
  return out;
}

DenseMatrix DenseMatrix::hstack(const DenseMatrix& other) const {
  if (other.rows_ != rows_) throw DimensionError("hstack: row counts differ");
  DenseMatrix out(rows_, cols_ + other.cols_);
  for (std::size_t r = 0; r < rows_; ++r) {
    auto dst = out.row(r);
    std::copy(row(r).begin(), row(r).end(), dst.begin());
    std::copy(other.row(r).begin(), other.row(r).end(), dst.begin() + cols_);
  }
  return out;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_key(std::uint64_t a, std::uint64_t b) noexcept {
  return mix64(mix64(a) ^ (b + 0x632be59bd9b4e019ULL));
}

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32)};
  engine_.seed(seq);
}

SeededRng SeededRng::derive(std::uint64_t tag) const {
  return SeededRng(seed_, stream_key(stream_id_, tag));
}

double SeededRng::uniform() {
  // 53 random mantissa bits.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double SeededRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double SeededRng::normal() { return gaussian_(engine_); }

double SeededRng::rademacher() { return (engine_() >> 63) != 0 ? 1.0 : -1.0; }

std::size_t SeededRng::uniform_index(std::size_t bound) {
  std::uniform_int_distribution<std::size_t> dist(0, bound - 1);
  return dist(engine_);
}

RealVector hadamard(std::span<const double> a, std::span<const double> b) {
  require_same_length(a.size(), b.size(), "hadamard");
  RealVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

void mat_apply_into(const DenseMatrix& X, std::span<const double> w, std::span<double> out) {
  require_same_length(X.cols(), w.size(), "mat_apply");
  require_same_length(X.rows(), out.size(), "mat_apply");
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto row = X.row(r);
    // Four independent partial sums let the compiler vectorize the reduction.
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t c = 0;
    for (; c + 4 <= row.size(); c += 4) {
      a0 += row[c] * w[c];
      a1 += row[c + 1] * w[c + 1];
      a2 += row[c + 2] * w[c + 2];
      a3 += row[c + 3] * w[c + 3];
    }
    for (; c < row.size(); ++c) a0 += row[c] * w[c];
    out[r] = (a0 + a1) + (a2 + a3);
  }
}

void mat_t_apply_into(const DenseMatrix& X, std::span<const double> r, std::span<double> out) {
  require_same_length(X.rows(), r.size(), "mat_t_apply");
  require_same_length(X.cols(), out.size(), "mat_t_apply");
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double ri = r[i];
    if (ri == 0.0) continue;
    const auto row = X.row(i);
    for (std::size_t c = 0; c < row.size(); ++c) out[c] += row[c] * ri;
  }
}

RealVector mat_apply(const DenseMatrix& X, std::span<const double> w) {
  require_same_length(X.cols(), w.size(), "mat_apply");
  RealVector out(X.rows());
  mat_apply_into(X, w, out);
  return out;
}

RealVector mat_t_apply(const DenseMatrix& X, std::span<const double> r) {
  require_same_length(X.rows(), r.size(), "mat_t_apply");
  RealVector out(X.cols());
  mat_t_apply_into(X, r, out);
  return out;
}

double inf_norm(std::span<const double> v) noexcept {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same_length(a.size(), b.size(), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double squared_norm(std::span<const double> v) noexcept {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return acc;
}

RealVector subtract(std::span<const double> a, std::span<const double> b) {
  require_same_length(a.size(), b.size(), "subtract");
  RealVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

RealVector add(std::span<const double> a, std::span<const double> b) {
  require_same_length(a.size(), b.size(), "add");
  RealVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

RealVector scaled(std::span<const double> v, double factor) {
  RealVector out(v.begin(), v.end());
  for (double& x : out) x *= factor;
  return out;
}

DenseMatrix gram_over_n(const DenseMatrix& X) {
  const std::size_t d = X.cols();
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  DenseMatrix G(d, d);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    const auto row = X.row(r);
    for (std::size_t i = 0; i < d; ++i) {
      const double xi = row[i];
      if (xi == 0.0) continue;
      for (std::size_t j = i; j < d; ++j) G(i, j) += xi * row[j];
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      G(i, j) *= inv_n;
      G(j, i) = G(i, j);
    }
  }
  return G;
}

RealVector cholesky_solve(const DenseMatrix& A, std::span<const double> b) {
  const std::size_t m = A.rows();
  if (A.cols() != m) throw DimensionError("cholesky_solve: matrix is not square");
  require_same_length(m, b.size(), "cholesky_solve");

  DenseMatrix L(m, m);
  for (std::size_t j = 0; j < m; ++j) {
    double diag = A(j, j);
    for (std::size_t p = 0; p < j; ++p) diag -= L(j, p) * L(j, p);
    // Relative pivot floor: treat numerically rank-deficient Gram matrices as singular.
    if (!(diag > 1e-13 * std::max(1.0, std::abs(A(j, j))))) {
      throw SingularityError("cholesky_solve: matrix is not positive definite (pivot " +
                             std::to_string(j) + ")");
    }
    L(j, j) = std::sqrt(diag);
    for (std::size_t i = j + 1; i < m; ++i) {
      double acc = A(i, j);
      for (std::size_t p = 0; p < j; ++p) acc -= L(i, p) * L(j, p);
      L(i, j) = acc / L(j, j);
    }
  }

  RealVector z(m);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = b[i];
    for (std::size_t p = 0; p < i; ++p) acc -= L(i, p) * z[p];
    z[i] = acc / L(i, i);
  }
  RealVector x(m);
  for (std::size_t ii = m; ii-- > 0;) {
    double acc = z[ii];
    for (std::size_t p = ii + 1; p < m; ++p) acc -= L(p, ii) * x[p];
    x[ii] = acc / L(ii, ii);
  }
  return x;
}

bool all_finite(std::span<const double> v) noexcept {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace implicit_sparse
