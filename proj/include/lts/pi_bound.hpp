#pragma once

// Approximate residual cap: the maximum of the concave weighted LS value
// v(w) over the capped simplex {e^T w = q, 0 <= w <= 1}, computed by
// Frank-Wolfe with away steps and exact line search. The Frank-Wolfe gap
// certifies the distance to the optimum since v is concave.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "lts/regress.hpp"

namespace lts {

struct PiBound {
  double pi = 0.0;
  double q = 0.0;
  Index iterations = 0;
  double certified_gap = 0.0;
  bool converged = false;
};

struct PiOptions {
  double tol = 1e-6;
  Index max_iter = 5000;
};

/// Squared residuals of the (ridge-safe) weighted fit at w; a supergradient of v.
inline Vector v_supergradient(const Dataset& data, const Vector& w) {
  Vector beta;
  weighted_beta(data, w, beta);
  return (data.y() - data.X() * beta).array().square().matrix();
}

namespace detail {

struct WeightedEval {
  double value = 0.0;
  Vector grad;
};

inline WeightedEval evaluate_weighted(const Dataset& data, const Vector& w) {
  Vector beta;
  const double eps = weighted_beta(data, w, beta);
  WeightedEval e;
  e.grad = (data.y() - data.X() * beta).array().square().matrix();
  e.value = std::max(0.0, w.dot(e.grad) + eps * beta.squaredNorm());
  return e;
}

// argmax g^T s over {e^T s = q, 0 <= s <= 1}; ties broken by index.
inline Vector capped_simplex_vertex(const Vector& g, double q) {
  const Index n = static_cast<Index>(g.size());
  IndexSet order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return g(a) > g(b); });
  Vector s = Vector::Zero(g.size());
  const Index whole = std::min(n, static_cast<Index>(std::floor(q)));
  for (Index k = 0; k < whole; ++k) s(order[k]) = 1.0;
  const double frac = q - static_cast<double>(whole);
  if (whole < n && frac > 0.0) s(order[whole]) = frac;
  return s;
}

// Vertex of the minimal face containing w that minimizes g: coordinates
// at 0 or 1 stay put, the remaining mass goes to the smallest g among the
// fractional coordinates.
inline Vector away_vertex(const Vector& g, const Vector& w, double q) {
  constexpr double eps = 1e-15;
  Vector a = Vector::Zero(g.size());
  IndexSet fractional;
  double mass = q;
  for (Eigen::Index k = 0; k < g.size(); ++k) {
    if (w(k) >= 1.0 - eps) {
      a(k) = 1.0;
      mass -= 1.0;
    } else if (w(k) > eps) {
      fractional.push_back(static_cast<Index>(k));
    }
  }
  std::stable_sort(fractional.begin(), fractional.end(), [&](Index x, Index y) { return g(x) < g(y); });
  for (Index k : fractional) {
    if (mass <= 0.0) break;
    a(k) = std::min(1.0, mass);
    mass -= a(k);
  }
  return a;
}

// Largest gamma with w + gamma * dir inside the unit box.
inline double max_box_step(const Vector& w, const Vector& dir) {
  double step = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < w.size(); ++k) {
    if (dir(k) > 0.0) step = std::min(step, (1.0 - w(k)) / dir(k));
    else if (dir(k) < 0.0) step = std::min(step, -w(k) / dir(k));
  }
  return step;
}

// Golden-section maximization of a concave function on [0, hi].
template <class F>
double golden_max(F&& f, double hi, int iterations = 60) {
  constexpr double inv_phi = 0.6180339887498949;
  double a = 0.0, b = hi;
  double c = b - inv_phi * (b - a), e = a + inv_phi * (b - a);
  double fc = f(c), fe = f(e);
  for (int it = 0; it < iterations; ++it) {
    if (fc < fe) {
      a = c;
      c = e;
      fc = fe;
      e = a + inv_phi * (b - a);
      fe = f(e);
    } else {
      b = e;
      e = c;
      fe = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    }
  }
  double best = 0.5 * (a + b);
  // Full steps land on faces, which is where the maximizer usually lives.
  if (f(hi) >= f(best)) best = hi;
  return best;
}

}  // namespace detail

/// Pi bound with weight mass q. On hitting the iteration cap the best
/// iterate is returned with `converged == false` and its certified gap.
inline PiBound estimate_pi(const Dataset& data, double q, const PiOptions& opts = {}) {
  const Index n = data.n();
  if (!(q > 0.0) || q > static_cast<double>(n)) throw InvalidSpec("pi bound mass q must satisfy 0 < q <= n");
  if (!(opts.tol > 0.0)) throw InvalidSpec("pi bound tolerance must be positive");

  Vector w = Vector::Constant(static_cast<Eigen::Index>(n), q / static_cast<double>(n));
  PiBound result;
  result.q = q;
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();

  for (Index it = 0; it < opts.max_iter; ++it) {
    const detail::WeightedEval here = detail::evaluate_weighted(data, w);
    const Vector s = detail::capped_simplex_vertex(here.grad, q);
    const double fw_gap = std::max(0.0, here.grad.dot(s - w));
    lower = std::max(lower, here.value);
    upper = std::min(upper, here.value + fw_gap);
    result.iterations = it + 1;
    if (upper - lower <= opts.tol * (1.0 + lower)) {
      result.converged = true;
      break;
    }
    const Vector away = detail::away_vertex(here.grad, w, q);
    const double away_gap = here.grad.dot(w - away);
    Vector dir;
    double max_step = 1.0;
    if (fw_gap >= away_gap) {
      dir = s - w;
    } else {
      dir = w - away;
      max_step = detail::max_box_step(w, dir);
    }
    const double step = detail::golden_max(
        [&](double gamma) { return detail::evaluate_weighted(data, w + gamma * dir).value; }, max_step);
    w += step * dir;
    w = w.cwiseMax(0.0).cwiseMin(1.0);
  }
  result.pi = lower;
  result.certified_gap = std::max(0.0, upper - lower);
  return result;
}

inline PiBound estimate_pi_default(const Dataset& data, const PiOptions& opts = {}) {
  return estimate_pi(data, static_cast<double>(data.d()) / 2.0, opts);
}

}  // namespace lts
