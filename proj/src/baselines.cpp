#include "implicit_sparse/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <numeric>

namespace implicit_sparse {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// Lower Cholesky factor, row-major, that supports deleting a row and column.
class CholeskyFactor {
 public:
  bool factor(std::vector<double> a, std::size_t s) {
    s_ = s;
    l_.assign(s * s, 0.0);
    for (std::size_t j = 0; j < s; ++j) {
      const double* lj = &l_[j * s];
      const double ajj = a[j * s + j];
      const double diag = ajj - dot(lj, lj, j);
      if (!(diag > 1e-13 * std::max(1.0, std::abs(ajj)))) return false;
      const double d = std::sqrt(diag);
      l_[j * s + j] = d;
      for (std::size_t i = j + 1; i < s; ++i) {
        l_[i * s + j] = (a[i * s + j] - dot(&l_[i * s], lj, j)) / d;
      }
    }
    return true;
  }

  // Givens rotations restore the triangle after row q is dropped.
  void remove(std::size_t q) {
    const std::size_t m = s_ - 1;
    std::vector<double> t(m * s_);
    for (std::size_t i = 0, src = 0; i < m; ++i, ++src) {
      if (src == q) ++src;
      std::copy_n(&l_[src * s_], s_, &t[i * s_]);
    }
    for (std::size_t j = q; j < m; ++j) {
      const double a = t[j * s_ + j];
      const double b = t[j * s_ + j + 1];
      const double rr = std::hypot(a, b);
      if (rr == 0.0) continue;
      const double c = a / rr;
      const double sn = b / rr;
      for (std::size_t i = j; i < m; ++i) {
        const double x = t[i * s_ + j];
        const double y = t[i * s_ + j + 1];
        t[i * s_ + j] = c * x + sn * y;
        t[i * s_ + j + 1] = c * y - sn * x;
      }
    }
    l_.assign(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) std::copy_n(&t[i * s_], i + 1, &l_[i * m]);
    s_ = m;
  }

  RealVector solve(std::span<const double> b) const {
    RealVector z(s_);
    for (std::size_t i = 0; i < s_; ++i) {
      z[i] = (b[i] - dot(&l_[i * s_], z.data(), i)) / l_[i * s_ + i];
    }
    for (std::size_t i = s_; i-- > 0;) {
      double acc = z[i];
      for (std::size_t p = i + 1; p < s_; ++p) acc -= l_[p * s_ + i] * z[p];
      z[i] = acc / l_[i * s_ + i];
    }
    return z;
  }

 private:
  std::size_t s_ = 0;
  std::vector<double> l_;
};

double soft(double z, double lambda) {
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

}  // namespace

double lasso_objective(const DenseMatrix& X, std::span<const double> y, std::span<const double> w,
                       double lambda) {
  const RealVector r = subtract(y, mat_apply(X, w));
  double l1 = 0.0;
  for (double v : w) l1 += std::abs(v);
  return squared_norm(r) / (2.0 * static_cast<double>(X.rows())) + lambda * l1;
}

LassoSolver::LassoSolver(const DenseMatrix& X, std::span<const double> y)
    : n_(X.rows()), d_(X.cols()), cols_(X.column_major()), col_sq_(X.cols()), y_(y.begin(), y.end()) {
  if (y.size() != n_) throw DimensionError("LassoSolver: y length does not match X rows");
  const double inv_n = 1.0 / static_cast<double>(n_);
  for (std::size_t j = 0; j < d_; ++j) {
    std::span<const double> col(cols_.data() + j * n_, n_);
    col_sq_[j] = squared_norm(col) * inv_n;
  }
  lambda_max_ = lasso_lambda_max(X, y);
}

double LassoSolver::objective(const RealVector& w, const RealVector& r, double lambda) const {
  double l1 = 0.0;
  for (double v : w) l1 += std::abs(v);
  return squared_norm(r) / (2.0 * static_cast<double>(n_)) + lambda * l1;
}

double LassoSolver::coordinate_pass(std::span<const std::size_t> coords, double lambda,
                                    RealVector& w, RealVector& r) const {
  const double inv_n = 1.0 / static_cast<double>(n_);
  double max_change = 0.0;
  for (std::size_t j : coords) {
    if (col_sq_[j] == 0.0) continue;
    const double* col = cols_.data() + j * n_;
    const double g = dot(col, r.data(), n_);
    const double old = w[j];
    const double updated = soft(g * inv_n + col_sq_[j] * old, lambda) / col_sq_[j];
    const double delta = updated - old;
    if (delta != 0.0) {
      for (std::size_t i = 0; i < n_; ++i) r[i] -= col[i] * delta;
      w[j] = updated;
      max_change = std::max(max_change, std::abs(delta));
    }
  }
  return max_change;
}

const std::vector<double>& LassoSolver::gram_column(std::size_t j) const {
  auto it = gram_.find(j);
  if (it != gram_.end()) return it->second;
  std::vector<double> col(d_);
  const double* cj = cols_.data() + j * n_;
  const double inv_n = 1.0 / static_cast<double>(n_);
  for (std::size_t k = 0; k < d_; ++k) {
    const double* ck = cols_.data() + k * n_;
    col[k] = dot(cj, ck, n_) * inv_n;
  }
  return gram_.emplace(j, std::move(col)).first->second;
}

void LassoSolver::active_set_refine(std::vector<std::size_t>& active, double lambda,
                                    RealVector& w, RealVector& r) const {
  const double inv_n = 1.0 / static_cast<double>(n_);
  CholeskyFactor factor;
  bool built = false;
  double ridge = 0.0;
  std::size_t refinements = 0;
  for (std::size_t iter = 0; iter < 4 * n_ && !active.empty(); ++iter) {
    const std::size_t s = active.size();
    if (!built) {
      double max_diag = 0.0;
      for (std::size_t j : active) max_diag = std::max(max_diag, gram_column(j)[j]);
      // A small ridge when the pattern has more columns than rows or is numerically singular.
      for (double rg : {0.0, 1e-8 * max_diag}) {
        if (rg == 0.0 && s > n_) continue;
        std::vector<double> g(s * s);
        for (std::size_t p = 0; p < s; ++p) {
          const std::vector<double>& col = gram_column(active[p]);
          for (std::size_t q = 0; q < s; ++q) g[p * s + q] = col[active[q]];
          g[p * s + p] += rg;
        }
        if (factor.factor(std::move(g), s)) {
          ridge = rg;
          built = true;
          break;
        }
      }
      if (!built) return;
    }

    RealVector rhs(s);  // minus the gradient of the smooth objective on this sign pattern
    for (std::size_t p = 0; p < s; ++p) {
      const double* col = cols_.data() + active[p] * n_;
      rhs[p] = dot(col, r.data(), n_) * inv_n - lambda * (w[active[p]] > 0.0 ? 1.0 : -1.0);
    }
    const RealVector dir = factor.solve(rhs);
    if (!all_finite(dir)) return;

    // Exact line search along dir, capped at the first sign change.
    double slope = 0.0;
    double curvature = 0.0;
    for (std::size_t p = 0; p < s; ++p) {
      const std::vector<double>& col = gram_column(active[p]);
      double gd = 0.0;
      for (std::size_t q = 0; q < s; ++q) gd += col[active[q]] * dir[q];
      slope += rhs[p] * dir[p];
      curvature += dir[p] * gd;
    }
    if (!(slope > 0.0 && curvature > 0.0)) return;
    double step = slope / curvature;
    std::size_t blocking = s;
    for (std::size_t p = 0; p < s; ++p) {
      const double from = w[active[p]];
      if (dir[p] == 0.0 || (from > 0.0) == (dir[p] > 0.0)) continue;
      const double t = -from / dir[p];
      if (t < step) {
        step = t;
        blocking = p;
      }
    }
    RealVector w_new = w;
    for (std::size_t p = 0; p < s; ++p) {
      const double from = w[active[p]];
      double v = from + step * dir[p];
      if (p == blocking || (from > 0.0) != (v > 0.0)) v = 0.0;
      w_new[active[p]] = v;
    }
    RealVector r_new = y_;
    for (std::size_t j : active) {
      if (w_new[j] == 0.0) continue;
      const double* col = cols_.data() + j * n_;
      for (std::size_t i = 0; i < n_; ++i) r_new[i] -= col[i] * w_new[j];
    }
    if (!(objective(w_new, r_new, lambda) <= objective(w, r, lambda))) return;
    w = std::move(w_new);
    r = std::move(r_new);

    for (std::size_t p = s; p-- > 0;) {
      if (w[active[p]] != 0.0) continue;
      factor.remove(p);
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(p));
    }
    if (blocking == s) {
      if (++refinements == 3) return;
      if (ridge > 0.0 && active.size() <= n_) built = false;
    }
  }
}

LassoResult LassoSolver::solve(const LassoConfig& cfg, std::optional<RealVector> warm_start) const {
  if (!(cfg.lambda >= 0.0)) throw ParameterError("lasso: lambda must be nonnegative");
  if (!(cfg.tol > 0.0)) throw ParameterError("lasso: tol must be positive");

  LassoResult res;
  res.w = warm_start ? std::move(*warm_start) : RealVector(d_, 0.0);
  if (res.w.size() != d_) throw DimensionError("lasso: warm start has wrong length");

  RealVector r = y_;
  for (std::size_t j = 0; j < d_; ++j) {
    if (res.w[j] == 0.0) continue;
    const double* col = cols_.data() + j * n_;
    for (std::size_t i = 0; i < n_; ++i) r[i] -= col[i] * res.w[j];
  }

  std::vector<std::size_t> all(d_);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> active;

  // Full sweeps decide convergence; between them the nonzero coordinates are iterated to
  // convergence on their own, which is where most of the work happens along a path.
  while (res.sweeps < cfg.max_sweeps) {
    const double change = coordinate_pass(all, cfg.lambda, res.w, r);
    ++res.sweeps;
    if (cfg.record_objective) res.objective_trace.push_back(objective(res.w, r, cfg.lambda));
    if (change < cfg.tol) {
      res.converged = true;
      break;
    }
    active.clear();
    for (std::size_t j = 0; j < d_; ++j)
      if (res.w[j] != 0.0) active.push_back(j);
    active_set_refine(active, cfg.lambda, res.w, r);
    while (res.sweeps < cfg.max_sweeps) {
      const double inner = coordinate_pass(active, cfg.lambda, res.w, r);
      ++res.sweeps;
      if (cfg.record_objective) res.objective_trace.push_back(objective(res.w, r, cfg.lambda));
      if (inner < cfg.tol) break;
    }
  }
  return res;
}

LassoResult lasso_cd(const DenseMatrix& X, std::span<const double> y, const LassoConfig& cfg,
                     std::optional<RealVector> warm_start) {
  if (X.rows() != y.size()) throw DimensionError("lasso_cd: y length does not match X rows");
  return LassoSolver(X, y).solve(cfg, std::move(warm_start));
}

RealVector soft_threshold_closed_form(std::span<const double> w_ls, double lambda) {
  if (!(lambda >= 0.0)) throw ParameterError("soft_threshold_closed_form: lambda must be >= 0");
  RealVector out(w_ls.size());
  for (std::size_t i = 0; i < w_ls.size(); ++i) out[i] = soft(w_ls[i], lambda);
  return out;
}

// Same arithmetic as a coordinate pass from zero, so the first path point is exactly zero.
double lasso_lambda_max(const DenseMatrix& X, std::span<const double> y) {
  if (X.rows() != y.size()) throw DimensionError("lasso_lambda_max: y length does not match X rows");
  const std::vector<double> cols = X.column_major();
  const std::size_t n = X.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  double best = 0.0;
  for (std::size_t j = 0; j < X.cols(); ++j) {
    best = std::max(best, std::abs(dot(cols.data() + j * n, y.data(), n) * inv_n));
  }
  return best;
}

LassoPath lasso_path(const DenseMatrix& X, std::span<const double> y, double lambda_max,
                     double lambda_min_ratio, std::size_t count, const LassoConfig& base) {
  if (!(lambda_max > 0.0)) throw ParameterError("lasso_path: lambda_max must be positive");
  if (!(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0)) {
    throw ParameterError("lasso_path: lambda_min_ratio must lie in (0, 1)");
  }
  if (count == 0) throw ParameterError("lasso_path: count must be positive");
  if (X.rows() != y.size()) throw DimensionError("lasso_path: y length does not match X rows");

  LassoPath path;
  const LassoSolver solver(X, y);
  const double log_ratio = std::log(lambda_min_ratio);
  std::optional<RealVector> warm;
  for (std::size_t i = 0; i < count; ++i) {
    const double frac = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
    LassoConfig cfg = base;
    cfg.lambda = lambda_max * std::exp(log_ratio * frac);
    LassoResult res = solver.solve(cfg, warm);
    if (!res.converged) ++path.unconverged;
    warm = res.w;
    path.lambdas.push_back(cfg.lambda);
    path.sweeps.push_back(res.sweeps);
    path.solutions.push_back(std::move(res.w));
  }
  return path;
}

LambdaSelection oracle_lambda_select(const LassoPath& path, const SparseSignal& w_star) {
  if (path.solutions.empty()) throw ParameterError("oracle_lambda_select: empty path");
  LambdaSelection best;
  bool first = true;
  for (std::size_t i = 0; i < path.solutions.size(); ++i) {
    const double err = squared_norm(subtract(path.solutions[i], w_star.w_star));
    // Strict improvement only: on ties the earlier (larger) lambda wins.
    if (first || err < best.l2_error_sq) {
      best.index = i;
      best.lambda = path.lambdas[i];
      best.l2_error_sq = err;
      first = false;
    }
  }
  best.solution = path.solutions[best.index];
  return best;
}

RealVector oracle_ls(const DenseMatrix& X, std::span<const double> y, const IndexSet& support) {
  const std::size_t n = X.rows();
  if (y.size() != n) throw DimensionError("oracle_ls: y length does not match X rows");
  RealVector w(X.cols(), 0.0);
  const std::size_t s = support.size();
  if (s == 0) return w;
  if (s > n) throw SingularityError("oracle_ls: support larger than the number of rows");
  for (std::size_t j : support) {
    if (j >= X.cols()) throw DimensionError("oracle_ls: support index out of range");
  }

  DenseMatrix G(s, s);
  RealVector rhs(s, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = X.row(i);
    for (std::size_t a = 0; a < s; ++a) {
      const double xa = row[support[a]];
      rhs[a] += xa * y[i];
      for (std::size_t b = 0; b <= a; ++b) G(a, b) += xa * row[support[b]];
    }
  }
  for (std::size_t a = 0; a < s; ++a)
    for (std::size_t b = 0; b < a; ++b) G(b, a) = G(a, b);

  const RealVector coef = cholesky_solve(G, rhs);
  for (std::size_t a = 0; a < s; ++a) w[support[a]] = coef[a];
  return w;
}

}  // namespace implicit_sparse
