#pragma once

// Least trimmed squares by branch and bound over the subset tree.
//
//   SBB    relaxation bounds and residual ordering at the top levels,
//          monotone bounds below, C-steps at every reached leaf.
//   BBA    monotone bounds only.
//   Brute  every h-subset in lexicographic order.

#include <chrono>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "lts/local_search.hpp"
#include "lts/pi_bound.hpp"
#include "lts/regress.hpp"
#include "lts/socp_bound.hpp"
#include "lts/subset_tree.hpp"

namespace lts {

enum class Mode { SBB, BBA, Brute };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::SBB: return "sbb";
    case Mode::BBA: return "bba";
    case Mode::Brute: return "brute";
  }
  return "unknown";
}

inline Mode parse_mode(std::string_view s) {
  if (s == "sbb") return Mode::SBB;
  if (s == "bba") return Mode::BBA;
  if (s == "brute") return Mode::Brute;
  throw InvalidSpec("unknown mode '" + std::string(s) + "'");
}

inline constexpr std::uint64_t kDefaultLeafThreshold = 1'000'000;
inline constexpr std::uint64_t kNoRelaxation = std::numeric_limits<std::uint64_t>::max();

struct SolverConfig {
  std::optional<Index> h;              // default floor(n/2) + floor((d+1)/2)
  std::optional<double> q;             // default d/2
  std::uint64_t socp_leaf_threshold = kDefaultLeafThreshold;
  Mode mode = Mode::SBB;
  double tol_relax = 1e-7;
  double tol_pi = 1e-6;
  bool unsafe_inconsistent_prune = false;
  Index max_cstep_iter = kDefaultCStepIterations;
  std::optional<Index> socp_depth;     // default d
  bool bba_csteps = false;
  bool record_events = false;
};

enum class PruneKind { Monotone, Relaxation };

struct PruneEvent {
  PruneKind kind = PruneKind::Monotone;
  IndexSet s1;
  IndexSet s0;
  double bound = 0.0;
  double incumbent = 0.0;
};

struct SolveStats {
  std::uint64_t nodes_visited = 0;
  std::uint64_t leaves_visited = 0;
  std::uint64_t monotone_prunes = 0;
  std::uint64_t socp_calls = 0;
  std::uint64_t socp_prunes = 0;
  std::uint64_t inconsistent_relaxations = 0;
  std::uint64_t gap_too_large = 0;
  std::uint64_t incumbent_updates = 0;

  friend bool operator==(const SolveStats&, const SolveStats&) = default;
};

struct SolveReport {
  Mode mode = Mode::SBB;
  Index h = 0;
  double q = 0.0;
  double pi = 0.0;
  Vector beta;
  IndexSet subset;  // 0-based, sorted
  double objective = 0.0;
  SolveStats stats;
  std::vector<PruneEvent> events;
  std::chrono::duration<double> elapsed{0.0};
};

/// Validates the configuration against the data and fills in defaults.
inline SolverConfig resolve_config(const Dataset& data, SolverConfig cfg) {
  const Index n = data.n(), d = data.d();
  if (!cfg.h) cfg.h = default_coverage(n, d);
  if (*cfg.h < d || *cfg.h > n) throw InfeasibleConfig("coverage h must satisfy d <= h <= n");
  if (!cfg.q) cfg.q = static_cast<double>(d) / 2.0;
  if (!(*cfg.q > 0.0) || *cfg.q > static_cast<double>(n)) throw InfeasibleConfig("q must satisfy 0 < q <= n");
  if (!(cfg.tol_relax > 0.0) || !(cfg.tol_pi > 0.0)) throw InfeasibleConfig("tolerances must be positive");
  if (cfg.max_cstep_iter < 1) throw InfeasibleConfig("max_cstep_iter must be at least 1");
  if (!cfg.socp_depth) cfg.socp_depth = d;
  return cfg;
}

namespace detail {

inline SolveReport finish_report(SolveReport report, const Incumbent& best,
                                 std::chrono::steady_clock::time_point start) {
  if (best.empty()) throw RankDeficient("no h-subset with full column rank was found");
  report.beta = best.beta;
  report.subset = best.subset;
  report.objective = best.objective;
  report.elapsed = std::chrono::steady_clock::now() - start;
  return report;
}

inline SolveReport solve_brute(const Dataset& data, const SolverConfig& cfg, SolveReport report,
                               std::chrono::steady_clock::time_point start) {
  const Index n = data.n(), h = *cfg.h;
  Incumbent best;
  IndexSet subset(h);
  for (Index i = 0; i < h; ++i) subset[i] = i;
  for (;;) {
    ++report.stats.leaves_visited;
    try {
      const FitState fit = ols_fit(data, subset);
      // strict improvement keeps the lexicographically first minimizer
      if (best.empty() || fit.rss < best.objective) {
        best = incumbent_from_fit(fit);
        ++report.stats.incumbent_updates;
      }
    } catch (const RankDeficient&) {
    }
    // next combination in lexicographic order
    Index i = h;
    while (i > 0 && subset[i - 1] == n - h + i - 1) --i;
    if (i == 0) break;
    ++subset[i - 1];
    for (Index j = i; j < h; ++j) subset[j] = subset[j - 1] + 1;
  }
  report.stats.nodes_visited = report.stats.leaves_visited;
  return finish_report(std::move(report), best, start);
}

class BranchAndBound {
 public:
  BranchAndBound(const Dataset& data, const SolverConfig& cfg, SolveReport& report, Incumbent& best)
      : data_(data), cfg_(cfg), report_(report), best_(best), h_(*cfg.h), fits_(*cfg.h + 1) {
    relax_ = cfg.mode == Mode::SBB && cfg.socp_leaf_threshold != kNoRelaxation;
    csteps_ = cfg.mode == Mode::SBB || cfg.bba_csteps;
    relax_opts_.tol = cfg.tol_relax;
  }

  Visit operator()(const NodeState& node) {
    const Index depth = node.depth();
    update_fit(node);
    const std::optional<FitState>& fit = fits_[depth];

    if (fit && !(fit->rss < best_.objective)) {
      ++report_.stats.monotone_prunes;
      log(PruneKind::Monotone, node, fit->rss);
      return Visit::prune();
    }
    if (depth == h_) {
      ++report_.stats.leaves_visited;
      if (fit) offer_leaf(*fit);
      return Visit::descend();
    }
    if (relax_ && depth >= 1 && depth <= *cfg_.socp_depth &&
        leaves_below(node, data_.n(), h_, cfg_.socp_leaf_threshold + 1) > cfg_.socp_leaf_threshold) {
      if (std::optional<Visit> v = relaxation_visit(node)) return *v;
    }
    if (fit) return Visit::reorder(order_by_increment(node, *fit));
    return Visit::descend();
  }

 private:
  void update_fit(const NodeState& node) {
    const Index depth = node.depth();
    std::optional<FitState>& slot = fits_[depth];
    slot.reset();
    if (depth < data_.d()) return;
    try {
      const std::optional<FitState>& parent = fits_[depth - 1];
      if (depth > data_.d() && parent) slot = rank_one_add(*parent, data_, node.s1.back());
      else slot = ols_fit(data_, node.s1);
    } catch (const RankDeficient&) {
      slot.reset();
    }
  }

  void offer_leaf(const FitState& fit) {
    if (update_incumbent(best_, incumbent_from_fit(fit))) ++report_.stats.incumbent_updates;
    if (!csteps_) return;
    try {
      if (update_incumbent(best_, c_steps(data_, fit.beta, h_, cfg_.max_cstep_iter))) ++report_.stats.incumbent_updates;
    } catch (const RankDeficient&) {
    }
  }

  std::optional<Visit> relaxation_visit(const NodeState& node) {
    ++report_.stats.socp_calls;
    const RelaxationResult res = solve_relaxation(build_node_problem(data_, report_.pi, node, h_), relax_opts_);
    if (!res.consistent) ++report_.stats.inconsistent_relaxations;
    if (res.status == RelaxationStatus::GapTooLarge) {
      ++report_.stats.gap_too_large;
      return std::nullopt;
    }
    if ((res.consistent || cfg_.unsafe_inconsistent_prune) && res.lower_bound > best_.objective) {
      ++report_.stats.socp_prunes;
      log(PruneKind::Relaxation, node, res.lower_bound);
      return Visit::prune();
    }
    if (res.status != RelaxationStatus::Optimal) return std::nullopt;
    // largest residuals at the left
    ChildOrder order;
    order.candidates = node.free;
    std::stable_sort(order.candidates.begin(), order.candidates.end(), [&](Index a, Index b) {
      return std::abs(res.residuals(static_cast<Eigen::Index>(a))) > std::abs(res.residuals(static_cast<Eigen::Index>(b)));
    });
    for (Index k : order.candidates) order.scores.push_back(std::abs(res.residuals(static_cast<Eigen::Index>(k))));
    return Visit::reorder(std::move(order));
  }

  ChildOrder order_by_increment(const NodeState& node, const FitState& fit) const {
    std::vector<std::pair<double, Index>> keyed;
    keyed.reserve(node.free.size());
    for (Index k : node.free) keyed.emplace_back(rss_increment(fit, data_, k), k);
    std::stable_sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    ChildOrder order;
    for (const auto& [score, k] : keyed) {
      order.candidates.push_back(k);
      order.scores.push_back(score);
    }
    return order;
  }

  void log(PruneKind kind, const NodeState& node, double bound) {
    if (cfg_.record_events) report_.events.push_back({kind, node.s1, node.s0, bound, best_.objective});
  }

  const Dataset& data_;
  const SolverConfig& cfg_;
  SolveReport& report_;
  Incumbent& best_;
  Index h_;
  std::vector<std::optional<FitState>> fits_;
  bool relax_ = false;
  bool csteps_ = false;
  RelaxationOptions relax_opts_;
};

}  // namespace detail

/// Runs the configured mode. Throws InfeasibleConfig on a bad configuration
/// and RankDeficient when no full-rank h-subset exists.
inline SolveReport solve(const Dataset& data, SolverConfig cfg) {
  const auto start = std::chrono::steady_clock::now();
  cfg = resolve_config(data, cfg);
  SolveReport report;
  report.mode = cfg.mode;
  report.h = *cfg.h;
  report.q = *cfg.q;
  if (cfg.mode == Mode::Brute) return detail::solve_brute(data, cfg, std::move(report), start);

  const Index n = data.n(), h = *cfg.h;
  Incumbent best;
  NodeState root = NodeState::root(n);
  try {
    const FitState ls = ols_fit(data, root.free);
    if (cfg.mode == Mode::SBB || cfg.bba_csteps) best = c_steps(data, ls.beta, h, cfg.max_cstep_iter);
    else best = incumbent_from_fit(detail::concentrate(data, ls.residuals, h));
    // Root candidates by the starting fit, smallest residuals first.
    root.free = order_by_abs_residual(data.y() - data.X() * ls.beta);
  } catch (const RankDeficient&) {
  }
  if (cfg.mode == Mode::SBB && cfg.socp_leaf_threshold != kNoRelaxation) {
    PiOptions popts;
    popts.tol = cfg.tol_pi;
    report.pi = estimate_pi(data, *cfg.q, popts).pi;
    // A zero cap means a perfect fit on q mass; relaxations then carry no information.
    if (!(report.pi > 0.0)) cfg.socp_leaf_threshold = kNoRelaxation;
  }

  detail::BranchAndBound visitor(data, cfg, report, best);
  const TraversalStats traversal = dfs(std::move(root), n, h, visitor);
  report.stats.nodes_visited = traversal.nodes_visited;
  return detail::finish_report(std::move(report), best, start);
}

}  // namespace lts
