#pragma once

// Dense least-squares kernels: subset fits, the weighted LS value v(w),
// and rank-one updates of the normal-equations Cholesky factor.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "lts/dataset.hpp"

namespace lts {

inline constexpr double kPivotTolerance = 1e-10;
inline constexpr double kRidgeFactor = 1e-8;

/// Incremental weighted least-squares state for a 0/1 weight vector.
struct FitState {
  Matrix chol;        // lower factor L with L L^T = X_S^T X_S
  Vector beta;
  Vector residuals;   // y - X beta for all n observations
  double rss = 0.0;   // sum of squared residuals over `active`
  IndexSet active;    // sorted
};

namespace detail {

// In-place lower Cholesky. Fails when a pivot drops below
// kPivotTolerance times the largest diagonal entry of the input.
inline bool cholesky_lower(const Matrix& M, Matrix& L) {
  const Eigen::Index d = M.rows();
  L.setZero(d, d);
  const double max_diag = d > 0 ? M.diagonal().maxCoeff() : 0.0;
  if (!(max_diag > 0.0)) return false;
  const double threshold = kPivotTolerance * max_diag;
  for (Eigen::Index j = 0; j < d; ++j) {
    double pivot = M(j, j) - L.row(j).head(j).squaredNorm();
    if (!(pivot > threshold)) return false;
    L(j, j) = std::sqrt(pivot);
    for (Eigen::Index i = j + 1; i < d; ++i) {
      L(i, j) = (M(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
    }
  }
  return true;
}

// Solves (L L^T) z = b.
inline Vector chol_solve(const Matrix& L, const Vector& b) {
  Vector z = L.triangularView<Eigen::Lower>().solve(b);
  return L.transpose().triangularView<Eigen::Upper>().solve(z);
}

// Rank-one update of a lower Cholesky factor: L L^T + x x^T.
inline bool chol_rank_one_update(Matrix& L, Vector x) {
  const Eigen::Index d = L.rows();
  for (Eigen::Index k = 0; k < d; ++k) {
    const double r = std::hypot(L(k, k), x(k));
    if (!(r > 0.0)) return false;
    const double c = r / L(k, k);
    const double s = x(k) / L(k, k);
    L(k, k) = r;
    for (Eigen::Index i = k + 1; i < d; ++i) {
      L(i, k) = (L(i, k) + s * x(i)) / c;
      x(i) = c * x(i) - s * L(i, k);
    }
  }
  return true;
}

inline Matrix weighted_gram(const Dataset& data, const Vector& w) {
  return data.X().transpose() * w.asDiagonal() * data.X();
}

}  // namespace detail

/// Ordinary least squares on the rows in `subset`; residuals cover all n rows.
inline FitState ols_fit(const Dataset& data, IndexSet subset) {
  std::sort(subset.begin(), subset.end());
  subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
  const Index d = data.d();
  if (subset.size() < d) throw RankDeficient("subset has fewer than d observations");

  Matrix M = Matrix::Zero(d, d);
  Vector b = Vector::Zero(d);
  for (Index i : subset) {
    if (i >= data.n()) throw InvalidSpec("subset index out of range");
    auto x = data.row(i);
    M.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    b += x.transpose() * data.y()(i);
  }
  M = M.selfadjointView<Eigen::Lower>();

  FitState state;
  if (!detail::cholesky_lower(M, state.chol)) throw RankDeficient("X^T X is numerically singular on subset");
  state.beta = detail::chol_solve(state.chol, b);
  state.residuals = data.y() - data.X() * state.beta;
  state.rss = 0.0;
  for (Index i : subset) state.rss += state.residuals(i) * state.residuals(i);
  state.active = std::move(subset);
  return state;
}

/// Coefficients of the weighted LS fit at w. A ridge term eps*I with
/// eps = 1e-8 * trace(M) / d is added only when M(w) is singular.
/// Returns the ridge value actually used (0 when none).
inline double weighted_beta(const Dataset& data, const Vector& w, Vector& beta) {
  const Index d = data.d();
  Matrix M = detail::weighted_gram(data, w);
  Vector b = data.X().transpose() * (w.array() * data.y().array()).matrix();
  Matrix L;
  if (detail::cholesky_lower(M, L)) {
    beta = detail::chol_solve(L, b);
    return 0.0;
  }
  const double trace = M.trace();
  if (!(trace > 0.0)) {
    beta = Vector::Zero(d);
    return 0.0;
  }
  const double eps = kRidgeFactor * trace / static_cast<double>(d);
  M.diagonal().array() += eps;
  beta = M.llt().solve(b);
  return eps;
}

/// v(w): least weighted sum of squared residuals over beta.
inline double wls_value(const Dataset& data, const Vector& w) {
  Vector beta;
  const double eps = weighted_beta(data, w, beta);
  const Vector r = data.y() - data.X() * beta;
  return std::max(0.0, (w.array() * r.array().square()).sum() + eps * beta.squaredNorm());
}

/// Exact infimum of the weighted LS problem, also when M(w) is singular
/// (minimum-norm solution through a complete orthogonal decomposition).
/// Never overestimates v(w); used where a certified lower bound is needed.
inline double wls_infimum(const Dataset& data, const Vector& w) {
  const Vector sw = w.cwiseMax(0.0).cwiseSqrt();
  const Matrix A = sw.asDiagonal() * data.X();
  const Vector b = sw.asDiagonal() * data.y();
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A);
  const Vector beta = cod.solve(b);
  return std::max(0.0, (b - A * beta).squaredNorm());
}

/// r_j^2 / (1 + x_j^T M^{-1} x_j): the RSS increase from adding row j.
inline double rss_increment(const FitState& state, const Dataset& data, Index j) {
  const Vector x = data.row(j).transpose();
  const Vector z = state.chol.triangularView<Eigen::Lower>().solve(x);
  if (!z.allFinite()) throw RankDeficient("singular Cholesky factor");
  const double rj = state.residuals(j);
  return rj * rj / (1.0 + z.squaredNorm());
}

/// Returns the fit on active + {j} using an O(d^2) factor update.
inline FitState rank_one_add(const FitState& state, const Dataset& data, Index j) {
  const Vector x = data.row(j).transpose();
  const Vector z = detail::chol_solve(state.chol, x);
  const double denom = 1.0 + x.dot(z);
  const double rj = state.residuals(j);

  FitState next;
  next.chol = state.chol;
  if (!detail::chol_rank_one_update(next.chol, x)) throw RankDeficient("rank-one update annihilated a pivot");
  next.beta = state.beta + z * (rj / denom);
  next.residuals = data.y() - data.X() * next.beta;
  next.rss = state.rss + rj * rj / denom;
  next.active = state.active;
  next.active.insert(std::upper_bound(next.active.begin(), next.active.end(), j), j);
  return next;
}

/// Permutation of 0..n-1 ordering residuals by (|r|, index).
inline IndexSet order_by_abs_residual(const Vector& residuals) {
  IndexSet order(static_cast<Index>(residuals.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return std::abs(residuals(a)) < std::abs(residuals(b));
  });
  return order;
}

/// Sum of the h smallest squared residuals of beta.
inline double lts_objective(const Dataset& data, const Vector& beta, Index h) {
  if (h < 1 || h > data.n()) throw InfeasibleConfig("coverage h must satisfy 1 <= h <= n");
  const Vector r = data.y() - data.X() * beta;
  const IndexSet order = order_by_abs_residual(r);
  double total = 0.0;
  for (Index k = 0; k < h; ++k) total += r(order[k]) * r(order[k]);
  return total;
}

}  // namespace lts
