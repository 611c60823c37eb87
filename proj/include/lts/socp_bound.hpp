#pragma once

// Continuous relaxation of the linearized trimmed-squares problem at a
// branch-and-bound node:
//
//   min  sum_k u_k
//   s.t. u_k >= r_k^2 - pi_k (1 - w_k),  u_k >= 0,  r = y - X beta,
//        e^T w = h,  0 <= w <= 1,  w fixed on s0 (to 0) and s1 (to 1).
//
// Each quadratic constraint is a rotated second-order cone. The solver is a
// primal-dual interior-point method on the smooth convex form. The reported
// lower bound never comes from the primal iterate: it is the Lagrangian
// dual function evaluated in closed form at multipliers lambda in [0, 1]^n,
//
//   g(lambda) = v(lambda) - sum_{k not in s1} lambda_k pi_k
//               + (sum of the m smallest lambda_k pi_k over free k),
//
// with m = h - |s1| and v the exact weighted LS infimum, so it is a valid
// bound for any lambda even on early termination.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string_view>

#include "lts/regress.hpp"
#include "lts/subset_tree.hpp"

namespace lts {

inline constexpr double kExcludedCapFactor = 10.0;

struct RelaxationProblem {
  const Dataset* data = nullptr;
  Vector pi;      // per-observation caps, all > 0
  IndexSet s0;
  IndexSet s1;
  Index h = 0;
};

enum class RelaxationStatus { Optimal, GapTooLarge, Infeasible };

inline std::string_view to_string(RelaxationStatus s) {
  switch (s) {
    case RelaxationStatus::Optimal: return "optimal";
    case RelaxationStatus::GapTooLarge: return "gap_too_large";
    case RelaxationStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

struct RelaxationResult {
  double lower_bound = 0.0;
  double primal_value = 0.0;
  Vector w;
  Vector beta;
  Vector residuals;
  bool consistent = false;
  RelaxationStatus status = RelaxationStatus::Optimal;
  Index newton_steps = 0;
};

struct RelaxationOptions {
  double tol = 1e-7;          // relative duality gap
  Index max_iter = 100;
};

/// Caps for a node: pi_global on free and s1 observations, 10 * pi_global on s0.
inline RelaxationProblem build_node_problem(const Dataset& data, double pi_global, const NodeState& node, Index h) {
  if (!(pi_global > 0.0)) throw InvalidSpec("pi bound must be positive");
  RelaxationProblem prob;
  prob.data = &data;
  prob.pi = Vector::Constant(static_cast<Eigen::Index>(data.n()), pi_global);
  for (Index k : node.s0) prob.pi(static_cast<Eigen::Index>(k)) = kExcludedCapFactor * pi_global;
  prob.s0 = node.s0;
  prob.s1 = node.s1;
  prob.h = h;
  return prob;
}

/// True iff residuals_k^2 < pi_k (strictly) for every k outside `excluded`.
inline bool check_consistency(const Vector& residuals, const Vector& pi, const IndexSet& excluded) {
  std::vector<char> skip(static_cast<Index>(residuals.size()), 0);
  for (Index k : excluded)
    if (k < skip.size()) skip[k] = 1;
  for (Eigen::Index k = 0; k < residuals.size(); ++k) {
    if (skip[static_cast<Index>(k)]) continue;
    if (!(residuals(k) * residuals(k) < pi(k))) return false;
  }
  return true;
}

namespace detail {

enum class Role : char { Free, One, Zero };

struct RelaxLayout {
  std::vector<Role> role;
  IndexSet free;  // observations with a variable weight
  Index m = 0;    // weight still to distribute over `free`
};

inline RelaxLayout relax_layout(const RelaxationProblem& prob) {
  const Index n = prob.data->n();
  RelaxLayout L;
  L.role.assign(n, Role::Free);
  for (Index k : prob.s1) L.role[k] = Role::One;
  for (Index k : prob.s0) L.role[k] = Role::Zero;
  for (Index k = 0; k < n; ++k)
    if (L.role[k] == Role::Free) L.free.push_back(k);
  L.m = prob.h - prob.s1.size();
  // Forced weights are not variables.
  if (L.m == 0 || L.m == L.free.size()) {
    const Role fixed = L.m == 0 ? Role::Zero : Role::One;
    for (Index k : L.free) L.role[k] = fixed;
    L.free.clear();
    L.m = 0;
  }
  return L;
}

// Exact minimum over (w, u) of the relaxation objective for fixed residuals.
// Fills `w` with a minimizing weight vector.
inline double relaxation_objective(const Vector& r, const Vector& pi, const RelaxLayout& L, Vector& w) {
  const Eigen::Index n = r.size();
  w = Vector::Zero(n);
  double total = 0.0;
  std::vector<std::pair<double, Index>> slopes;
  double capacity_free = 0.0;
  std::vector<double> zero_cost(static_cast<Index>(n), 0.0);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double r2 = r(k) * r(k);
    switch (L.role[static_cast<Index>(k)]) {
      case Role::One:
        w(k) = 1.0;
        total += r2;
        break;
      case Role::Zero:
        total += std::max(0.0, r2 - pi(k));
        break;
      case Role::Free:
        total += std::max(0.0, r2 - pi(k));
        zero_cost[static_cast<Index>(k)] = std::max(0.0, 1.0 - r2 / pi(k));
        capacity_free += zero_cost[static_cast<Index>(k)];
        slopes.emplace_back(pi(k), static_cast<Index>(k));
        break;
    }
  }
  double remaining = static_cast<double>(L.m);
  // Zero-cost mass first, in index order.
  for (Index k : L.free) {
    const double take = std::min(remaining, zero_cost[k]);
    w(static_cast<Eigen::Index>(k)) = take;
    remaining -= take;
  }
  if (remaining > 0.0) {
    std::stable_sort(slopes.begin(), slopes.end());
    for (const auto& [slope, k] : slopes) {
      if (remaining <= 0.0) break;
      const double room = 1.0 - w(static_cast<Eigen::Index>(k));
      const double take = std::min(remaining, room);
      w(static_cast<Eigen::Index>(k)) += take;
      total += slope * take;
      remaining -= take;
    }
  }
  return total;
}

// Lagrangian dual function; a lower bound for every lambda in [0,1]^n.
inline double relaxation_dual(const Dataset& data, const Vector& pi, const RelaxLayout& L, Vector lambda) {
  lambda = lambda.cwiseMax(0.0).cwiseMin(1.0);
  double linear = 0.0;
  std::vector<double> free_costs;
  free_costs.reserve(L.free.size());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    switch (L.role[static_cast<Index>(k)]) {
      case Role::One:
        // only v depends on these multipliers and v is non-decreasing
        lambda(k) = 1.0;
        break;
      case Role::Zero:
        linear -= lambda(k) * pi(k);
        break;
      case Role::Free:
        linear -= lambda(k) * pi(k);
        free_costs.push_back(lambda(k) * pi(k));
        break;
    }
  }
  std::sort(free_costs.begin(), free_costs.end());
  for (Index j = 0; j < L.m && j < free_costs.size(); ++j) linear += free_costs[j];
  return wls_infimum(data, lambda) + linear;
}

// Least-norm correction of the multipliers making sum_k lambda_k r_k x_k
// vanish at the primal residuals r, the stationarity condition of the
// weighted fit. Free observations with a fractional weight share one
// value of lambda_k pi_k; other multipliers strictly inside (0, 1) move
// individually.
inline Vector polish_multipliers(const Dataset& data, const Vector& pi, const RelaxLayout& L, const Vector& residuals,
                                 const Vector& weights, Vector lambda) {
  constexpr double fractional_tol = 1e-6;
  IndexSet group, mid;
  double level = 0.0;
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    const Index kk = static_cast<Index>(k);
    if (L.role[kk] == Role::One) {
      lambda(k) = 1.0;
    } else if (L.role[kk] == Role::Free && weights(k) > fractional_tol && weights(k) < 1.0 - fractional_tol) {
      group.push_back(kk);
      level += lambda(k) * pi(k);
    } else if (lambda(k) > 0.0 && lambda(k) < 1.0) {
      mid.push_back(kk);
    }
  }
  if (!group.empty()) {
    level /= static_cast<double>(group.size());
    for (Index k : group) lambda(static_cast<Eigen::Index>(k)) = level / pi(static_cast<Eigen::Index>(k));
  }
  const Eigen::Index cols = static_cast<Eigen::Index>(mid.size()) + (group.empty() ? 0 : 1);
  if (cols == 0) return lambda.cwiseMax(0.0).cwiseMin(1.0);

  Vector target = Vector::Zero(data.X().cols());
  for (Eigen::Index k = 0; k < lambda.size(); ++k) target -= lambda(k) * residuals(k) * data.X().row(k).transpose();
  Matrix A = Matrix::Zero(data.X().cols(), cols);
  for (Index j = 0; j < mid.size(); ++j) {
    const auto k = static_cast<Eigen::Index>(mid[j]);
    A.col(static_cast<Eigen::Index>(j)) = residuals(k) * data.X().row(k).transpose();
  }
  if (!group.empty()) {
    for (Index k : group) {
      const auto kk = static_cast<Eigen::Index>(k);
      A.col(cols - 1) += residuals(kk) / pi(kk) * data.X().row(kk).transpose();
    }
  }
  const Vector delta = Eigen::CompleteOrthogonalDecomposition<Matrix>(A).solve(target);
  for (Index j = 0; j < mid.size(); ++j) lambda(static_cast<Eigen::Index>(mid[j])) += delta(static_cast<Eigen::Index>(j));
  if (!group.empty()) {
    for (Index k : group) lambda(static_cast<Eigen::Index>(k)) += delta(cols - 1) / pi(static_cast<Eigen::Index>(k));
  }
  return lambda.cwiseMax(0.0).cwiseMin(1.0);
}

// Best dual bound over the raw multipliers, copies snapped to {0, 1} near
// the bounds, and their polished versions. Each candidate is a valid
// bound, so is their maximum.
inline double certified_dual(const Dataset& data, const Vector& pi, const RelaxLayout& L, const Vector& lambda,
                             const Vector& residuals, const Vector& weights) {
  double best = relaxation_dual(data, pi, L, lambda);
  for (double eps : {0.0, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-8}) {
    Vector snapped = lambda.cwiseMax(0.0).cwiseMin(1.0);
    for (Eigen::Index k = 0; k < snapped.size(); ++k) {
      if (snapped(k) > 1.0 - eps) snapped(k) = 1.0;
      else if (snapped(k) < eps) snapped(k) = 0.0;
    }
    if (eps > 0.0) best = std::max(best, relaxation_dual(data, pi, L, snapped));
    best = std::max(best, relaxation_dual(data, pi, L, polish_multipliers(data, pi, L, residuals, weights, snapped)));
  }
  return best;
}

// Primal-dual interior-point iteration on the problem scaled so that caps
// are O(1). Variables x = (beta, w_free, u). Inequalities, in order:
//   cone_k:  r_k^2 - pi_k (1 - w_k) - u_k <= 0     (n)
//   -u_k <= 0                                       (n)
//   -w_j <= 0,  w_j - 1 <= 0                        (2 nf)
// plus sum(w_free) = m when nf > 0.
class PrimalDualSolver {
 public:
  PrimalDualSolver(const Dataset& data, const Vector& pi, const RelaxLayout& layout, double scale)
      : X_(data.X()), y_(data.y() / std::sqrt(scale)), pi_(pi / scale), L_(layout) {
    n_ = static_cast<Index>(X_.rows());
    d_ = static_cast<Index>(X_.cols());
    nf_ = L_.free.size();
    dim_ = d_ + nf_ + n_;
    m_ = 2 * n_ + 2 * nf_;
    fixed_w_ = Vector::Zero(ei(n_));
    free_pos_.assign(n_, kNone);
    for (Index k = 0; k < n_; ++k)
      if (L_.role[k] == Role::One) fixed_w_(ei(k)) = 1.0;
    for (Index j = 0; j < nf_; ++j) free_pos_[L_.free[j]] = j;
  }

  void start(const Vector& beta0) {
    x_ = Vector::Zero(ei(dim_));
    x_.head(ei(d_)) = beta0;
    const double w0 = nf_ > 0 ? static_cast<double>(L_.m) / static_cast<double>(nf_) : 0.0;
    for (Index j = 0; j < nf_; ++j) x_(ei(d_ + j)) = w0;
    const Vector r = y_ - X_ * beta0;
    const double mean_r2 = r.squaredNorm() / static_cast<double>(n_);
    for (Index k = 0; k < n_; ++k) {
      const double excess = r(ei(k)) * r(ei(k)) - pi_(ei(k)) * (1.0 - weight(x_, k));
      x_(u_index(k)) = std::max(0.0, excess) + 1.0 + mean_r2;
    }
    const Vector f = constraints(x_);
    const double t0 = std::max(1.0, static_cast<double>(m_) / std::max(objective(), 1e-8));
    lambda_ = (-f).cwiseInverse() / t0;
    nu_ = 0.0;
  }

  double objective() const { return x_.tail(ei(n_)).sum(); }
  Vector beta() const { return x_.head(ei(d_)); }
  Vector cone_multipliers() const { return lambda_.head(ei(n_)); }
  double surrogate_gap() const { return -constraints(x_).dot(lambda_); }

  Vector weights() const {
    Vector w = fixed_w_;
    for (Index j = 0; j < nf_; ++j) w(ei(L_.free[j])) = x_(ei(d_ + j));
    return w;
  }

  // One Mehrotra predictor-corrector step. Returns false when no
  // progress is possible.
  bool step() {
    const Vector f = constraints(x_);
    const double mu = -f.dot(lambda_) / static_cast<double>(m_);
    if (!(mu > 0.0)) return false;

    Matrix H = Matrix::Zero(ei(dim_), ei(dim_));
    const Vector r = y_ - X_ * x_.head(ei(d_));
    const auto D = ei(d_);
    for (Index k = 0; k < n_; ++k) {
      const auto kk = ei(k);
      const Vector xk = X_.row(kk).transpose();
      const double lam = lambda_(kk);
      const double c = lam / -f(kk);
      const Vector gb = -2.0 * r(kk) * xk;
      const auto ui = u_index(k);
      H.topLeftCorner(D, D) += (2.0 * lam) * (xk * xk.transpose()) + c * (gb * gb.transpose());
      H.block(0, ui, D, 1) -= c * gb;
      H(ui, ui) += c + lambda_(ei(n_ + k)) / -f(ei(n_ + k));
      const Index j = free_pos_[k];
      if (j != kNone) {
        const auto wi = ei(d_ + j);
        const double p = pi_(kk);
        H.block(0, wi, D, 1) += c * p * gb;
        H(wi, wi) += c * p * p;
        H(wi, ui) -= c * p;
      }
    }
    for (Index j = 0; j < nf_; ++j) {
      const auto wi = ei(d_ + j);
      H(wi, wi) += lambda_(ei(2 * n_ + 2 * j)) / -f(ei(2 * n_ + 2 * j)) +
                   lambda_(ei(2 * n_ + 2 * j + 1)) / -f(ei(2 * n_ + 2 * j + 1));
    }
    H = H.selfadjointView<Eigen::Upper>();
    Eigen::LDLT<Matrix> ldlt(H);
    if (ldlt.info() != Eigen::Success) return false;
    // The system is badly conditioned near the boundary; refine.
    auto solve = [&](const Vector& b) {
      Vector z = ldlt.solve(b);
      for (int round = 0; round < 2; ++round) z += ldlt.solve(b - H * z);
      return z;
    };
    Vector Ha;
    if (nf_ > 0) Ha = solve(equality_row());

    Direction affine = direction(f, r, Vector::Zero(ei(m_)), solve, Ha);
    if (!affine.valid) return false;
    const double s_aff = step_length(f, affine, 1.0);
    const Vector f_aff = constraints(x_ + s_aff * affine.dx);
    const double mu_aff = -f_aff.dot(lambda_ + s_aff * affine.dlambda) / static_cast<double>(m_);
    const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

    Vector rho = (affine.dlambda.array() * affine.df.array()).matrix();
    rho.array() += sigma * mu;
    Direction combined = direction(f, r, rho, solve, Ha);
    double s = combined.valid ? step_length(f, combined, 0.99) : 0.0;
    if (s < 0.1) {
      // Jammed near the boundary: fall back to a pure centering step.
      Direction centering = direction(f, r, Vector::Constant(ei(m_), mu), solve, Ha);
      const double sc = centering.valid ? step_length(f, centering, 0.99) : 0.0;
      if (sc > s) {
        combined = std::move(centering);
        s = sc;
      }
    }
    if (!(s > 0.0)) return false;
    x_ += s * combined.dx;
    lambda_ += s * combined.dlambda;
    nu_ += s * (combined.nu - nu_);
    return true;
  }

 private:
  struct Direction {
    Vector dx, dlambda, df;
    double nu = 0.0;
    bool valid = false;
  };

  // Newton direction for the perturbed complementarity -lambda_i f_i = rho_i.
  template <class Solve>
  Direction direction(const Vector& f, const Vector& r, const Vector& rho, Solve& solve, const Vector& Ha) const {
    Vector rhs = Vector::Zero(ei(dim_));
    const auto D = ei(d_);
    for (Index k = 0; k < n_; ++k) {
      const auto kk = ei(k);
      const double s = rho(kk) / -f(kk);
      const auto ui = u_index(k);
      rhs.head(D) += (-2.0 * r(kk) * s) * X_.row(kk).transpose();
      rhs(ui) += 1.0 - s - rho(ei(n_ + k)) / -f(ei(n_ + k));
      const Index j = free_pos_[k];
      if (j != kNone) rhs(ei(d_ + j)) += pi_(kk) * s;
    }
    for (Index j = 0; j < nf_; ++j) {
      rhs(ei(d_ + j)) += -rho(ei(2 * n_ + 2 * j)) / -f(ei(2 * n_ + 2 * j)) +
                         rho(ei(2 * n_ + 2 * j + 1)) / -f(ei(2 * n_ + 2 * j + 1));
    }
    Direction out;
    out.dx = -solve(rhs);
    if (nf_ > 0) {
      const Vector a = equality_row();
      const double pri = a.dot(x_) - static_cast<double>(L_.m);
      out.nu = (a.dot(out.dx) + pri) / a.dot(Ha);
      out.dx -= out.nu * Ha;
    }
    if (!out.dx.allFinite()) return out;
    out.df = constraint_directional(x_, out.dx);
    // second-order change of the cone constraints
    const Vector Xdb = X_ * out.dx.head(D);
    out.df.head(ei(n_)) += Xdb.array().square().matrix();
    out.dlambda.resize(ei(m_));
    const Vector df_lin = constraint_directional(x_, out.dx);
    for (Index i = 0; i < m_; ++i) {
      const auto ii = ei(i);
      out.dlambda(ii) = (-lambda_(ii) * f(ii) - rho(ii) - lambda_(ii) * df_lin(ii)) / f(ii);
    }
    out.valid = out.dlambda.allFinite();
    return out;
  }

  // Largest fraction of the boundary step keeping lambda > 0 and f < 0.
  double step_length(const Vector& f, const Direction& dir, double fraction) const {
    (void)f;
    double s_max = 1.0 / fraction;
    for (Eigen::Index i = 0; i < dir.dlambda.size(); ++i)
      if (dir.dlambda(i) < 0.0) s_max = std::min(s_max, -lambda_(i) / dir.dlambda(i));
    double s = std::min(1.0, fraction * s_max);
    for (int ls = 0; ls < 60; ++ls, s *= 0.5) {
      if (constraints(x_ + s * dir.dx).maxCoeff() < 0.0) return s;
    }
    return 0.0;
  }

  static constexpr Index kNone = std::numeric_limits<Index>::max();
  static Eigen::Index ei(Index i) { return static_cast<Eigen::Index>(i); }
  Eigen::Index u_index(Index k) const { return ei(d_ + nf_ + k); }

  double weight(const Vector& x, Index k) const {
    const Index j = free_pos_[k];
    return j == kNone ? fixed_w_(ei(k)) : x(ei(d_ + j));
  }

  Vector equality_row() const {
    Vector a = Vector::Zero(ei(dim_));
    a.segment(ei(d_), ei(nf_)).setOnes();
    return a;
  }

  Vector constraints(const Vector& x) const {
    Vector f(ei(m_));
    const Vector r = y_ - X_ * x.head(ei(d_));
    for (Index k = 0; k < n_; ++k) {
      const auto kk = ei(k);
      f(kk) = r(kk) * r(kk) - pi_(kk) * (1.0 - weight(x, k)) - x(u_index(k));
      f(ei(n_ + k)) = -x(u_index(k));
    }
    for (Index j = 0; j < nf_; ++j) {
      f(ei(2 * n_ + 2 * j)) = -x(ei(d_ + j));
      f(ei(2 * n_ + 2 * j + 1)) = x(ei(d_ + j)) - 1.0;
    }
    return f;
  }

  // Gradient of constraint i applied to dx.
  Vector constraint_directional(const Vector& x, const Vector& dx) const {
    Vector out(ei(m_));
    const Vector r = y_ - X_ * x.head(ei(d_));
    const Vector Xdb = X_ * dx.head(ei(d_));
    for (Index k = 0; k < n_; ++k) {
      const auto kk = ei(k);
      const Index j = free_pos_[k];
      const double dw = j == kNone ? 0.0 : dx(ei(d_ + j));
      out(kk) = -2.0 * r(kk) * Xdb(kk) + pi_(kk) * dw - dx(u_index(k));
      out(ei(n_ + k)) = -dx(u_index(k));
    }
    for (Index j = 0; j < nf_; ++j) {
      out(ei(2 * n_ + 2 * j)) = -dx(ei(d_ + j));
      out(ei(2 * n_ + 2 * j + 1)) = dx(ei(d_ + j));
    }
    return out;
  }

  Matrix X_;
  Vector y_;
  Vector pi_;
  const RelaxLayout& L_;
  Index n_ = 0, d_ = 0, nf_ = 0, dim_ = 0, m_ = 0;
  Vector fixed_w_;
  IndexSet free_pos_;
  Vector x_;
  Vector lambda_;
  double nu_ = 0.0;
};

}  // namespace detail

inline RelaxationResult solve_relaxation(const RelaxationProblem& prob, const RelaxationOptions& opts = {}) {
  if (prob.data == nullptr) throw InvalidSpec("relaxation problem has no data");
  if (!(opts.tol > 0.0)) throw InvalidSpec("relaxation tolerance must be positive");
  const Dataset& data = *prob.data;
  const Index n = data.n();
  if (static_cast<Index>(prob.pi.size()) != n || !(prob.pi.minCoeff() > 0.0))
    throw InvalidSpec("relaxation caps must be positive, one per observation");

  RelaxationResult result;
  if (prob.s1.size() > prob.h || n < prob.s0.size() || n - prob.s0.size() < prob.h) {
    result.status = RelaxationStatus::Infeasible;
    result.lower_bound = std::numeric_limits<double>::infinity();
    result.primal_value = std::numeric_limits<double>::infinity();
    return result;
  }

  const detail::RelaxLayout layout = detail::relax_layout(prob);
  auto converged = [&](double primal, double lower) {
    return primal - lower <= opts.tol * (1.0 + std::abs(primal));
  };
  auto finish = [&](const Vector& beta, double lower) {
    result.beta = beta;
    result.residuals = data.y() - data.X() * beta;
    Vector w_greedy;
    result.primal_value = detail::relaxation_objective(result.residuals, prob.pi, layout, w_greedy);
    if (result.w.size() == 0) result.w = w_greedy;
    result.lower_bound = std::min(lower, result.primal_value);
    result.status = converged(result.primal_value, result.lower_bound) ? RelaxationStatus::Optimal
                                                                        : RelaxationStatus::GapTooLarge;
    result.consistent = check_consistency(result.residuals, prob.pi, prob.s0);
    return result;
  };

  Vector ones_weight = Vector::Zero(static_cast<Eigen::Index>(n));
  for (Index k = 0; k < n; ++k)
    if (layout.role[k] == detail::Role::One) ones_weight(static_cast<Eigen::Index>(k)) = 1.0;

  // Weight-determined nodes: weighted least squares on the ones, exact
  // whenever the excluded residuals stay under their caps.
  if (layout.free.empty()) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(ones_weight.asDiagonal() * data.X());
    const Vector beta = cod.solve(ones_weight.asDiagonal() * data.y());
    const double lower = detail::relaxation_dual(data, prob.pi, layout, ones_weight);
    Vector w_tmp;
    const double primal = detail::relaxation_objective(data.y() - data.X() * beta, prob.pi, layout, w_tmp);
    if (converged(primal, lower)) return finish(beta, lower);
  }

  const double scale = std::max(prob.pi.mean(), std::numeric_limits<double>::min());
  const double root_scale = std::sqrt(scale);
  detail::PrimalDualSolver solver(data, prob.pi, layout, scale);
  Vector start_weight = ones_weight;
  for (Index k : layout.free)
    start_weight(static_cast<Eigen::Index>(k)) = static_cast<double>(layout.m) / static_cast<double>(layout.free.size());
  Vector beta0;
  weighted_beta(data, start_weight, beta0);
  solver.start(beta0 / root_scale);

  double best_lower = -std::numeric_limits<double>::infinity();
  for (Index it = 0; it < opts.max_iter; ++it) {
    const bool moved = solver.step();
    ++result.newton_steps;
    const double obj = solver.objective();
    if (solver.surrogate_gap() <= 10.0 * opts.tol * (1.0 + obj) || !moved) {
      // multipliers are invariant under the scaling
      const Vector r = data.y() - data.X() * (solver.beta() * root_scale);
      best_lower = std::max(best_lower, detail::certified_dual(data, prob.pi, layout, solver.cone_multipliers(), r, solver.weights()));
      Vector w_tmp;
      const double primal = detail::relaxation_objective(r, prob.pi, layout, w_tmp);
      if (converged(primal, best_lower) || !moved) break;
    }
  }
  const Vector r_final = data.y() - data.X() * (solver.beta() * root_scale);
  best_lower = std::max(best_lower, detail::certified_dual(data, prob.pi, layout, solver.cone_multipliers(), r_final, solver.weights()));
  result.w = solver.weights();
  return finish(solver.beta() * root_scale, best_lower);
}

}  // namespace lts
