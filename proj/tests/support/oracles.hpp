// Brute-force reference solutions shared by the unit and acceptance tests.
#ifndef EVCS_TESTS_ORACLES_HPP
#define EVCS_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace oracle {

/// Integer-grid allocation problem: from state 0 at instant k0, choose
/// a_k in [0, cap_k] ON ports per cycle. Bounds are in grid steps relative to
/// the start. Cost is sum a_k price_k plus weight_j * max(upper_j - S_j, 0)
/// on every visited state after the start.
struct GridProblem {
  int k0 = 0;
  std::vector<long> upper;  // instants 0..H
  std::vector<long> lower;  // instants 0..H, empty when no lower bound
  std::vector<double> price;  // per grid step, cycles 0..H-1
  std::vector<int> cap;       // cycles 0..H-1
  std::vector<double> weight; // instants 0..H, empty for none
};

struct GridSolution {
  double cost = 0.0;
  std::vector<int> actions;
};

namespace detail {

inline void enumerate(const GridProblem& p, int j, long s, double cost, std::vector<int>& path,
                      std::optional<GridSolution>& best) {
  const int H = static_cast<int>(p.price.size());
  if (j == H) {
    if (!best || cost < best->cost) best = GridSolution{cost, path};
    return;
  }
  for (int a = 0; a <= p.cap[static_cast<std::size_t>(j)]; ++a) {
    const long next = s + a;
    const auto jn = static_cast<std::size_t>(j + 1);
    // Without a lower bound the start may already sit above the upper one.
    const long ub = p.lower.empty() ? std::max(p.upper[jn], 0L) : p.upper[jn];
    if (next > ub) break;
    if (!p.lower.empty() && next < p.lower[jn]) continue;
    double c = cost + a * p.price[static_cast<std::size_t>(j)];
    if (!p.weight.empty()) c += p.weight[jn] * static_cast<double>(std::max(p.upper[jn] - next, 0L));
    path.push_back(a);
    enumerate(p, j + 1, next, c, path, best);
    path.pop_back();
  }
}

}  // namespace detail

/// Minimum over every feasible action sequence; nullopt when none exists.
inline std::optional<GridSolution> enumerate_dp(const GridProblem& p) {
  std::optional<GridSolution> best;
  std::vector<int> path;
  detail::enumerate(p, p.k0, 0, 0.0, path, best);
  return best;
}

/// Maximum of sum gamma_i F_i over 0/1 vectors with at most `cap` ones, only
/// on eligible entries, by listing all 2^n vectors.
inline double best_selection_value(const std::vector<double>& priority, const std::vector<bool>& eligible, int cap) {
  const std::size_t n = priority.size();
  double best = 0.0;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    int ones = 0;
    double v = 0.0;
    bool ok = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(mask >> i & 1u)) continue;
      if (!eligible[i]) ok = false;
      ++ones;
      v += priority[i];
    }
    if (ok && ones <= cap) best = std::max(best, v);
  }
  return best;
}

/// Unit-step job for the realizability check: `units` whole steps to place
/// in cycles [first, last), at most one per cycle.
struct UnitJob {
  int first = 0;
  int last = 0;
  int units = 0;
};

/// Whether an aggregate plan of ON counts per cycle can be split across the
/// jobs so that every planned unit lands on a job with demand left. Solved as
/// a bipartite max flow (source -> job -> cycle -> sink) by augmenting paths.
inline bool plan_realizable(const std::vector<UnitJob>& jobs, const std::vector<int>& plan) {
  const int nj = static_cast<int>(jobs.size());
  const int nc = static_cast<int>(plan.size());
  const int src = nj + nc, snk = src + 1, nodes = snk + 1;
  std::vector<std::vector<int>> cap(static_cast<std::size_t>(nodes), std::vector<int>(static_cast<std::size_t>(nodes), 0));
  const auto at = [&](int a, int b) -> int& { return cap[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]; };
  long need = 0;
  for (int i = 0; i < nj; ++i) {
    at(src, i) = jobs[static_cast<std::size_t>(i)].units;
    for (int k = std::max(jobs[static_cast<std::size_t>(i)].first, 0);
         k < std::min(jobs[static_cast<std::size_t>(i)].last, nc); ++k) {
      at(i, nj + k) = 1;
    }
  }
  for (int k = 0; k < nc; ++k) {
    at(nj + k, snk) = plan[static_cast<std::size_t>(k)];
    need += plan[static_cast<std::size_t>(k)];
  }
  long flow = 0;
  std::vector<int> parent(static_cast<std::size_t>(nodes));
  for (;;) {
    std::fill(parent.begin(), parent.end(), -1);
    parent[static_cast<std::size_t>(src)] = src;
    std::vector<int> queue{src};
    for (std::size_t q = 0; q < queue.size() && parent[static_cast<std::size_t>(snk)] < 0; ++q) {
      const int u = queue[q];
      for (int v = 0; v < nodes; ++v) {
        if (parent[static_cast<std::size_t>(v)] < 0 && at(u, v) > 0) {
          parent[static_cast<std::size_t>(v)] = u;
          queue.push_back(v);
        }
      }
    }
    if (parent[static_cast<std::size_t>(snk)] < 0) break;
    int push = std::numeric_limits<int>::max();
    for (int v = snk; v != src; v = parent[static_cast<std::size_t>(v)]) {
      push = std::min(push, at(parent[static_cast<std::size_t>(v)], v));
    }
    for (int v = snk; v != src; v = parent[static_cast<std::size_t>(v)]) {
      at(parent[static_cast<std::size_t>(v)], v) -= push;
      at(v, parent[static_cast<std::size_t>(v)]) += push;
    }
    flow += push;
  }
  return flow == need;
}

}  // namespace oracle

#endif  // EVCS_TESTS_ORACLES_HPP
