#pragma once

// Narendra-Fukunaga enumeration tree over the h-subsets of {0..n-1}.
//
// A node fixes the indices in s1 to 1 and those in s0 to 0. Its remaining
// candidates are kept in an ordered list `free`; the l-th child moves
// free[l] into s1 and the l earlier candidates into s0, so siblings never
// share a leaf. Reordering `free` before expansion reorders the children.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "lts/dataset.hpp"

namespace lts {

struct NodeState {
  IndexSet s1;    // in insertion order
  IndexSet s0;
  IndexSet free;  // candidate order used for the next expansion
  Index depth() const { return s1.size(); }

  static NodeState root(Index n) {
    NodeState node;
    node.free.resize(n);
    for (Index i = 0; i < n; ++i) node.free[i] = i;
    return node;
  }
};

/// Permutation of a node's candidates with one score per candidate.
struct ChildOrder {
  IndexSet candidates;
  std::vector<double> scores;
};

inline bool is_feasible(const NodeState& node, Index h) {
  return node.s1.size() <= h && node.free.size() >= h - node.s1.size();
}

inline std::vector<NodeState> children(const NodeState& node, Index n, Index h) {
  (void)n;
  std::vector<NodeState> out;
  if (!is_feasible(node, h) || node.depth() >= h) return out;
  const Index missing = h - node.depth();
  const Index count = node.free.size() - missing + 1;
  out.reserve(count);
  for (Index l = 0; l < count; ++l) {
    NodeState child;
    child.s1 = node.s1;
    child.s1.push_back(node.free[l]);
    child.s0 = node.s0;
    child.s0.insert(child.s0.end(), node.free.begin(), node.free.begin() + static_cast<std::ptrdiff_t>(l));
    child.free.assign(node.free.begin() + static_cast<std::ptrdiff_t>(l + 1), node.free.end());
    out.push_back(std::move(child));
  }
  return out;
}

/// Binomial coefficient, exact up to `cap` and saturated above it.
inline std::uint64_t binomial(Index a, Index b, std::uint64_t cap = std::numeric_limits<std::uint64_t>::max()) {
  if (b > a) return 0;
  b = std::min(b, a - b);
  unsigned __int128 result = 1;
  for (Index i = 1; i <= b; ++i) {
    result = result * static_cast<unsigned __int128>(a - b + i) / i;
    if (result > cap) return cap;
  }
  return static_cast<std::uint64_t>(result);
}

/// Number of h-subsets that extend s1 while avoiding s0.
inline std::uint64_t leaves_below(const NodeState& node, Index n, Index h,
                                  std::uint64_t cap = std::numeric_limits<std::uint64_t>::max()) {
  if (node.s1.size() > h) return 0;
  const Index fixed = node.s0.size() + node.s1.size();
  if (fixed > n) return 0;
  return binomial(n - fixed, h - node.s1.size(), cap);
}

enum class Action { Descend, Prune };

struct Visit {
  Action action = Action::Descend;
  std::optional<ChildOrder> order;

  static Visit descend() { return {}; }
  static Visit prune() { return {Action::Prune, std::nullopt}; }
  static Visit reorder(ChildOrder order) { return {Action::Descend, std::move(order)}; }
};

struct TraversalStats {
  std::uint64_t nodes_visited = 0;
  std::uint64_t pruned = 0;
  std::uint64_t leaves = 0;

  TraversalStats& operator+=(const TraversalStats& o) {
    nodes_visited += o.nodes_visited;
    pruned += o.pruned;
    leaves += o.leaves;
    return *this;
  }
};

namespace detail {

template <class Visitor>
void dfs_expand(NodeState& node, Index n, Index h, Visitor& visit, TraversalStats& stats) {
  ++stats.nodes_visited;
  Visit decision = visit(static_cast<const NodeState&>(node));
  if (decision.action == Action::Prune) {
    ++stats.pruned;
    return;
  }
  if (node.depth() == h) {
    ++stats.leaves;
    return;
  }
  if (decision.order) {
    IndexSet a = decision.order->candidates, b = node.free;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) throw InvalidSpec("child order is not a permutation of the node's candidates");
    node.free = std::move(decision.order->candidates);
  }
  for (NodeState& child : children(node, n, h)) dfs_expand(child, n, h, visit, stats);
}

}  // namespace detail

/// Depth-first traversal. `visit(const NodeState&) -> Visit` is called on
/// every node in preorder; a pruned leaf is not counted as reached.
template <class Visitor>
TraversalStats dfs(NodeState root, Index n, Index h, Visitor&& visit) {
  TraversalStats stats;
  if (!is_feasible(root, h)) return stats;
  detail::dfs_expand(root, n, h, visit, stats);
  return stats;
}

}  // namespace lts
