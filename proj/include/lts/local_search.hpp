#pragma once

// Concentration steps: fit, keep the h smallest absolute residuals, refit.

#include <algorithm>
#include <limits>
#include <vector>

#include "lts/regress.hpp"

namespace lts {

inline constexpr Index kDefaultCStepIterations = 50;
inline constexpr double kImprovementTolerance = 1e-12;

struct Incumbent {
  IndexSet subset;  // sorted, size h
  Vector beta;
  double objective = std::numeric_limits<double>::infinity();

  bool empty() const { return subset.empty(); }
};

inline Incumbent incumbent_from_fit(const FitState& fit) { return {fit.active, fit.beta, fit.rss}; }

/// Replaces `current` when `candidate` is better by more than 1e-12.
inline bool update_incumbent(Incumbent& current, const Incumbent& candidate) {
  if (!(candidate.objective < current.objective - kImprovementTolerance)) return false;
  current = candidate;
  return true;
}

namespace detail {

// OLS fit on the h smallest |r|; when that subset is rank deficient the
// last selected index is swapped for the next-smallest residual.
inline FitState concentrate(const Dataset& data, const Vector& residuals, Index h) {
  const IndexSet order = order_by_abs_residual(residuals);
  IndexSet subset(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(h));
  for (Index next = h;; ++next) {
    try {
      return ols_fit(data, subset);
    } catch (const RankDeficient&) {
      if (next >= order.size()) throw;
      subset.back() = order[next];
    }
  }
}

}  // namespace detail

/// Iterates C-steps from `start_beta` until the selected subset repeats or
/// `max_iter` refits were made. When `history` is given it receives the
/// objective after every refit.
inline Incumbent c_steps(const Dataset& data, const Vector& start_beta, Index h,
                         Index max_iter = kDefaultCStepIterations, std::vector<double>* history = nullptr) {
  if (h < data.d() || h > data.n()) throw InfeasibleConfig("coverage h must satisfy d <= h <= n");
  if (max_iter < 1) throw InvalidSpec("c_steps needs max_iter >= 1");
  if (static_cast<Index>(start_beta.size()) != data.d()) throw InvalidSpec("start beta has wrong length");
  if (history) history->clear();

  Vector residuals = data.y() - data.X() * start_beta;
  FitState fit = detail::concentrate(data, residuals, h);
  if (history) history->push_back(fit.rss);
  for (Index it = 1; it < max_iter; ++it) {
    FitState next = detail::concentrate(data, fit.residuals, h);
    if (next.active == fit.active) break;
    // Rounding can make a new subset look marginally worse; keep the best.
    if (!(next.rss < fit.rss)) break;
    fit = std::move(next);
    if (history) history->push_back(fit.rss);
  }
  return incumbent_from_fit(fit);
}

}  // namespace lts
