#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "ma/errors.hpp"
#include "ma/numerics.hpp"

namespace ma {

// ---------------------------------------------------------------------------
// Point clouds
// ---------------------------------------------------------------------------

using Point = std::array<double, 4>;  // first dim() coordinates are live

class PointCloud {
 public:
  PointCloud(std::vector<Point> pts, std::vector<double> weights, int dim)
      : pts_(std::move(pts)), w_(std::move(weights)), dim_(dim) {
    if (dim_ < 1 || dim_ > 4) throw parameter_error("PointCloud: dim must be in 1..4");
    if (pts_.empty() || pts_.size() != w_.size())
      throw parameter_error("PointCloud: points and weights must match and be nonempty");
    double sum = 0.0;
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      for (int d = 0; d < dim_; ++d)
        if (!std::isfinite(pts_[i][d])) throw parameter_error("PointCloud: non-finite coordinate");
      if (w_[i] < 0.0) throw parameter_error("PointCloud: negative weight");
      sum += w_[i];
    }
    if (std::abs(sum - 1.0) > 1e-12) throw parameter_error("PointCloud: weights must sum to 1");
  }

  static PointCloud uniform2d(std::vector<Point> pts) {
    const std::size_t k = pts.size();
    return PointCloud(std::move(pts), std::vector<double>(k, 1.0 / static_cast<double>(k)), 2);
  }
  static PointCloud uniform(std::vector<Point> pts, int dim) {
    const std::size_t k = pts.size();
    return PointCloud(std::move(pts), std::vector<double>(k, 1.0 / static_cast<double>(k)), dim);
  }

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(pts_.size()); }
  const Point& point(int i) const { return pts_[i]; }
  double weight(int i) const { return w_[i]; }

  bool uniform_weights() const {
    const double expect = 1.0 / size();
    for (double w : w_)
      if (std::abs(w - expect) > 1e-12) return false;
    return true;
  }

 private:
  std::vector<Point> pts_;
  std::vector<double> w_;
  int dim_;
};

inline double sqdist(const Point& a, const Point& b, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) {
    const double diff = a[d] - b[d];
    s += diff * diff;
  }
  return s;
}

inline double dot(const Point& a, const Point& b, int dim) {
  double s = 0.0;
  for (int d = 0; d < dim; ++d) s += a[d] * b[d];
  return s;
}

inline void require_same_dim(const PointCloud& x, const PointCloud& y, const char* what) {
  if (x.dim() != y.dim()) throw spec_mismatch_error(std::string(what) + ": dimensions differ");
}

// ---------------------------------------------------------------------------
// Optimal assignment (Monge problem on equal uniform clouds)
// ---------------------------------------------------------------------------

struct Assignment {
  std::vector<int> to_y;    // j = to_y[i] pairs X_i with Y_j
  double total_cost = 0.0;  // sum of |X - Y|^2 / 2 over the pairs
};

namespace detail {

// Jonker-Volgenant style shortest augmenting path with dual potentials.
// Costs come through a functor, so no k x k matrix is materialized.
// Returns row -> column matching plus the duals. O(k^3), deterministic.
struct HungarianResult {
  std::vector<int> col_of_row;
  std::vector<double> u, v;  // duals: u_i + v_j <= c_ij, tight on the matching
};

template <class CostFn>
HungarianResult hungarian(CostFn&& cost, int n) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  HungarianResult r;
  r.col_of_row.assign(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) r.col_of_row[p[j] - 1] = j - 1;
  r.u.assign(n, 0.0);
  r.v.assign(n, 0.0);
  for (int i = 0; i < n; ++i) r.u[i] = u[i + 1];
  for (int j = 0; j < n; ++j) r.v[j] = v[j + 1];
  return r;
}

// Kuhn augmenting-path feasibility for bipartite matching on an adjacency
// matrix restricted to free rows/cols.
inline bool kuhn_match(const std::vector<std::vector<int>>& adj, int rows, int cols,
                       std::vector<int>& match_col) {
  match_col.assign(cols, -1);
  std::vector<char> seen(cols, 0);
  std::vector<int> match_row(rows, -1);
  std::function<bool(int)> try_row = [&](int r) -> bool {
    for (int c : adj[r]) {
      if (seen[c]) continue;
      seen[c] = 1;
      if (match_col[c] < 0 || try_row(match_col[c])) {
        match_col[c] = r;
        match_row[r] = c;
        return true;
      }
    }
    return false;
  };
  for (int r = 0; r < rows; ++r) {
    std::fill(seen.begin(), seen.end(), 0);
    if (!try_row(r)) return false;
  }
  return true;
}

}  // namespace detail

// Exact minimizer of sum |X_i - Y_{pi(i)}|^2 / 2 over permutations.
// Optimality is certified by dual feasibility; among equally optimal
// permutations the lexicographically smallest one is returned.
inline Assignment solve_assignment(const PointCloud& x, const PointCloud& y) {
  require_same_dim(x, y, "solve_assignment");
  if (x.size() != y.size())
    throw parameter_error("solve_assignment: clouds must have equal cardinality");
  if (!x.uniform_weights() || !y.uniform_weights())
    throw parameter_error("solve_assignment: weights must be uniform; use solve_plan instead");
  const int k = x.size();
  if (k > 10000) throw parameter_error("solve_assignment: k exceeds 10^4");

  const int dim = x.dim();
  auto cost = [&](int i, int j) { return 0.5 * sqdist(x.point(i), y.point(j), dim); };

  detail::HungarianResult hr = detail::hungarian(cost, k);

  // Dual feasibility certificate.
  double scale = 0.0, min_rc = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      const double c = cost(i, j);
      scale = std::max(scale, std::abs(c));
      min_rc = std::min(min_rc, c - hr.u[i] - hr.v[j]);
    }
  if (min_rc < -1e-9 * (1.0 + scale))
    throw no_convergence_error("solve_assignment: dual certificate failed", 0.0, 0);

  // Lexicographic tie-break over the tight-edge graph, only when ties exist.
  const double tie_eps = 1e-12 * (1.0 + scale);
  std::vector<std::vector<int>> tight(k);
  long tight_edges = 0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (cost(i, j) - hr.u[i] - hr.v[j] <= tie_eps) {
        tight[i].push_back(j);
        ++tight_edges;
      }
  std::vector<int> perm = hr.col_of_row;
  if (tight_edges > k && k <= 512) {
    std::vector<int> fixed(k, -1);
    std::vector<char> col_taken(k, 0);
    for (int i = 0; i < k; ++i) {
      for (int j : tight[i]) {
        if (col_taken[j]) continue;
        // Feasibility of completing rows i+1..k-1 on the remaining columns.
        std::vector<std::vector<int>> rest(k - i - 1);
        for (int r = i + 1; r < k; ++r)
          for (int c : tight[r])
            if (!col_taken[c] && c != j) rest[r - i - 1].push_back(c);
        std::vector<int> match;
        if (k - i - 1 == 0 || detail::kuhn_match(rest, k - i - 1, k, match)) {
          fixed[i] = j;
          col_taken[j] = 1;
          break;
        }
      }
      if (fixed[i] < 0) throw no_convergence_error("solve_assignment: tie refinement failed", 0, 0);
    }
    perm = fixed;
  }

  Assignment a;
  a.to_y = perm;
  std::vector<double> terms(k);
  for (int i = 0; i < k; ++i) terms[i] = cost(i, perm[i]);
  a.total_cost = pairwise_sum(terms);
  return a;
}

// ---------------------------------------------------------------------------
// Kantorovich plans (transportation simplex)
// ---------------------------------------------------------------------------

struct TransportPlan {
  int m = 0, n = 0;
  std::vector<double> nu;           // m*n, row-major
  std::vector<double> row_pot, col_pot;  // dual potentials
  double total_cost = 0.0;          // with the 1/2 cost convention

  double at(int i, int j) const { return nu[static_cast<std::size_t>(i) * n + j]; }
  double marginal_error(const PointCloud& x, const PointCloud& y) const {
    double err = 0.0;
    for (int i = 0; i < m; ++i) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += at(i, j);
      err = std::max(err, std::abs(s - x.weight(i)));
    }
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int i = 0; i < m; ++i) s += at(i, j);
      err = std::max(err, std::abs(s - y.weight(j)));
    }
    return err;
  }
};

namespace detail {

// Dense transportation simplex over the Kantorovich polytope. Deterministic:
// northwest-corner start, Dantzig entering rule with index tie-breaks, Bland
// fallback after a degenerate stall.
inline TransportPlan transport_simplex(const std::vector<double>& cost,
                                       const std::vector<double>& a,
                                       const std::vector<double>& b) {
  const int m = static_cast<int>(a.size());
  const int n = static_cast<int>(b.size());
  const int nodes = m + n;

  double scale = 0.0;
  for (double c : cost) scale = std::max(scale, std::abs(c));
  const double opt_eps = 1e-11 * (1.0 + scale);

  std::vector<double> flow(static_cast<std::size_t>(m) * n, 0.0);
  std::vector<char> basic(static_cast<std::size_t>(m) * n, 0);
  auto id = [n](int i, int j) { return static_cast<std::size_t>(i) * n + j; };

  // Northwest-corner start; ties spawn zero-flow basic arcs to keep the tree
  // at m + n - 1 arcs.
  {
    std::vector<double> ra = a, rb = b;
    int i = 0, j = 0;
    while (i < m && j < n) {
      const double t = std::min(ra[i], rb[j]);
      flow[id(i, j)] = t;
      basic[id(i, j)] = 1;
      ra[i] -= t;
      rb[j] -= t;
      if (i == m - 1 && j == n - 1) break;
      if (ra[i] <= rb[j] && i < m - 1) {
        ++i;
      } else if (j < n - 1) {
        ++j;
      } else {
        ++i;
      }
    }
  }

  std::vector<double> u(m, 0.0), v(n, 0.0);
  std::vector<int> parent(nodes, -1), parent_arc(nodes, -1), order(nodes);

  auto compute_duals = [&]() {
    // Tree walk from row 0. Nodes: rows [0,m), cols [m, m+n).
    std::vector<std::vector<std::pair<int, int>>> adj(nodes);  // (other node, arc)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        if (basic[id(i, j)]) {
          adj[i].push_back({m + j, static_cast<int>(id(i, j))});
          adj[m + j].push_back({i, static_cast<int>(id(i, j))});
        }
    std::fill(parent.begin(), parent.end(), -1);
    std::vector<char> seen(nodes, 0);
    int head = 0, tail = 0;
    order[tail++] = 0;
    seen[0] = 1;
    u[0] = 0.0;
    while (head < tail) {
      const int node = order[head++];
      for (auto [other, arc] : adj[node]) {
        if (seen[other]) continue;
        seen[other] = 1;
        parent[other] = node;
        parent_arc[other] = arc;
        const int i = arc / n, j = arc % n;
        if (other >= m)
          v[j] = cost[arc] - u[i];
        else
          u[i] = cost[arc] - v[j];
        order[tail++] = other;
      }
    }
    if (tail != nodes)
      throw no_convergence_error("transport_simplex: basis lost tree structure", 0, 0);
  };

  const long max_pivots = 200L * (m + n) * (m + n) + 10000;
  bool bland = false;
  long degenerate_run = 0;

  for (long pivot = 0; pivot < max_pivots; ++pivot) {
    compute_duals();

    int ei = -1, ej = -1;
    double best = -opt_eps;
    for (int i = 0; i < m && (!bland || ei < 0); ++i)
      for (int j = 0; j < n; ++j) {
        if (basic[id(i, j)]) continue;
        const double rc = cost[id(i, j)] - u[i] - v[j];
        if (rc < best) {
          best = rc;
          ei = i;
          ej = j;
          if (bland) break;
        }
      }
    if (ei < 0) {
      TransportPlan plan;
      plan.m = m;
      plan.n = n;
      plan.nu = std::move(flow);
      plan.row_pot = std::move(u);
      plan.col_pot = std::move(v);
      std::vector<double> terms;
      terms.reserve(static_cast<std::size_t>(m) * n);
      for (std::size_t k = 0; k < plan.nu.size(); ++k)
        if (plan.nu[k] != 0.0) terms.push_back(plan.nu[k] * cost[k]);
      plan.total_cost = pairwise_sum(terms);
      return plan;
    }

    // Cycle: tree path from row ei to col m+ej, plus the entering arc.
    // Flows alternate +/- along the cycle starting with + on the entry.
    std::vector<int> path_arcs;
    std::vector<int> path_nodes;
    {
      // Walk both endpoints to the root, splice at the meeting point.
      std::vector<int> up_a, up_b;
      for (int nd = ei; nd != -1; nd = parent[nd]) up_a.push_back(nd);
      for (int nd = m + ej; nd != -1; nd = parent[nd]) up_b.push_back(nd);
      std::vector<char> in_a(nodes, 0);
      for (int nd : up_a) in_a[nd] = 1;
      int meet = -1;
      for (int nd : up_b)
        if (in_a[nd]) {
          meet = nd;
          break;
        }
      for (int nd = ei; nd != meet; nd = parent[nd]) {
        path_nodes.push_back(nd);
        path_arcs.push_back(parent_arc[nd]);
      }
      path_nodes.push_back(meet);
      std::vector<int> tailArcs, tailNodes;
      for (int nd = m + ej; nd != meet; nd = parent[nd]) {
        tailNodes.push_back(nd);
        tailArcs.push_back(parent_arc[nd]);
      }
      std::reverse(tailArcs.begin(), tailArcs.end());
      std::reverse(tailNodes.begin(), tailNodes.end());
      for (int arc : tailArcs) path_arcs.push_back(arc);
      for (int nd : tailNodes) path_nodes.push_back(nd);
    }

    // Sign pattern: traversing ei -> ... -> m+ej; the entering arc closes the
    // cycle with +. Arcs leaving a row node are -, entering a row node are +
    // when walking in cycle direction (alternating row/col nodes).
    double theta = std::numeric_limits<double>::infinity();
    int leave = -1;
    {
      int node = ei;
      std::size_t at = 0;
      for (int arc : path_arcs) {
        const bool from_row = node < m;
        // Arc consumes flow iff it is traversed col->row ... alternation:
        // entering arc (ei, ej) gets +; neighbors along the path alternate.
        // Walking from ei: the first tree arc shares row ei -> gets -.
        const bool minus = (at % 2 == 0);
        if (minus && flow[arc] < theta - 1e-18) {
          theta = flow[arc];
          leave = arc;
        } else if (minus && std::abs(flow[arc] - theta) <= 1e-18 && (leave < 0 || arc < leave)) {
          theta = std::min(theta, flow[arc]);
          leave = arc;
        }
        ++at;
        node = path_nodes[at];
        (void)from_row;
      }
    }
    if (leave < 0) throw no_convergence_error("transport_simplex: unbounded pivot", 0, 0);

    {
      std::size_t at = 0;
      for (int arc : path_arcs) {
        flow[arc] += (at % 2 == 0) ? -theta : theta;
        ++at;
      }
      flow[id(ei, ej)] += theta;
    }
    basic[id(ei, ej)] = 1;
    basic[leave] = 0;
    flow[leave] = 0.0;

    degenerate_run = theta <= 1e-15 ? degenerate_run + 1 : 0;
    if (degenerate_run > 4L * (m + n)) bland = true;
  }
  throw no_convergence_error("transport_simplex: pivot budget exhausted", 0, 0);
}

inline TransportPlan solve_plan_with_cost(const PointCloud& x, const PointCloud& y,
                                          const std::vector<double>& cost) {
  const int m = x.size(), n = y.size();
  if (static_cast<long>(m) * n > 1000000)
    throw parameter_error("solve_plan: product of cloud sizes exceeds 10^6");
  std::vector<double> a(m), b(n);
  double sa = 0, sb = 0;
  for (int i = 0; i < m; ++i) sa += (a[i] = x.weight(i));
  for (int j = 0; j < n; ++j) sb += (b[j] = y.weight(j));
  if (std::abs(sa - sb) > 1e-9)
    throw infeasible_error("solve_plan: marginal masses differ beyond 1e-9");
  // Absorb the (tiny) remaining mismatch so the simplex sees balanced data.
  for (double& w : b) w *= sa / sb;

  TransportPlan plan = detail::transport_simplex(cost, a, b);

  // Complementary slackness certificate.
  double scale = 0.0;
  for (double c : cost) scale = std::max(scale, std::abs(c));
  const double eps = 1e-9 * (1.0 + scale);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) {
      const double rc = cost[static_cast<std::size_t>(i) * n + j] - plan.row_pot[i] - plan.col_pot[j];
      if (rc < -eps || (plan.at(i, j) > 1e-12 && std::abs(rc) > eps))
        throw no_convergence_error("solve_plan: optimality certificate failed", rc, 0);
    }
  return plan;
}

}  // namespace detail

// Minimizes sum nu_ij |X_i - Y_j|^2 / 2 over the transportation polytope.
inline TransportPlan solve_plan(const PointCloud& x, const PointCloud& y) {
  require_same_dim(x, y, "solve_plan");
  const int m = x.size(), n = y.size();
  std::vector<double> cost(static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      cost[static_cast<std::size_t>(i) * n + j] = 0.5 * sqdist(x.point(i), y.point(j), x.dim());
  return detail::solve_plan_with_cost(x, y, cost);
}

// Wasserstein-2 metric: square root of the unhalved optimal squared
// displacement (the plan optimizes the halved cost; the argmin coincides).
inline double wasserstein2(const PointCloud& x, const PointCloud& y) {
  const TransportPlan plan = solve_plan(x, y);
  return std::sqrt(std::max(0.0, 2.0 * plan.total_cost));
}

// ---------------------------------------------------------------------------
// Cyclical monotonicity and potentials
// ---------------------------------------------------------------------------

struct CycleCheck {
  bool monotone = true;
  std::vector<int> witness;  // violating cycle as point indices
};

// Checks sum <X_t, Y_t> >= sum <X_t, Y_{t+1}> over all cycles up to
// max_cycle. Exhaustive; meant for the small instances the oracles cover.
inline CycleCheck check_cyclical_monotonicity(const PointCloud& x, const PointCloud& y,
                                              const Assignment& a, int max_cycle) {
  require_same_dim(x, y, "check_cyclical_monotonicity");
  if (max_cycle < 2 || max_cycle > 6)
    throw parameter_error("check_cyclical_monotonicity: max_cycle must be in 2..6");
  const int k = x.size();
  if (static_cast<int>(a.to_y.size()) != k)
    throw parameter_error("check_cyclical_monotonicity: assignment size mismatch");

  double scale = 0.0;
  for (int i = 0; i < k; ++i)
    scale = std::max({scale, std::abs(dot(x.point(i), y.point(a.to_y[i]), x.dim()))});
  const double tol = 1e-12 * (1.0 + scale);

  CycleCheck result;
  std::vector<int> subset;

  auto evaluate_cycle = [&](const std::vector<int>& cyc) {
    double own = 0.0, cross = 0.0;
    const int mlen = static_cast<int>(cyc.size());
    for (int t = 0; t < mlen; ++t) {
      const int i = cyc[t];
      const int inext = cyc[(t + 1) % mlen];
      own += dot(x.point(i), y.point(a.to_y[i]), x.dim());
      cross += dot(x.point(i), y.point(a.to_y[inext]), x.dim());
    }
    if (own < cross - tol * mlen) {
      result.monotone = false;
      result.witness = cyc;
      return false;
    }
    return true;
  };

  std::function<bool(int, int)> choose = [&](int start, int need) -> bool {
    if (need == 0) {
      // Anchor the first element, permute the rest over all cyclic orders.
      std::vector<int> tail(subset.begin() + 1, subset.end());
      std::sort(tail.begin(), tail.end());
      do {
        std::vector<int> cyc;
        cyc.push_back(subset[0]);
        cyc.insert(cyc.end(), tail.begin(), tail.end());
        if (!evaluate_cycle(cyc)) return false;
      } while (std::next_permutation(tail.begin(), tail.end()));
      return true;
    }
    for (int i = start; i <= k - need; ++i) {
      subset.push_back(i);
      const bool keep = choose(i + 1, need - 1);
      subset.pop_back();
      if (!keep) return false;
    }
    return true;
  };

  for (int mlen = 2; mlen <= std::min(max_cycle, k); ++mlen) {
    subset.clear();
    if (!choose(0, mlen)) break;
  }
  return result;
}

struct DiscretePotential {
  std::vector<double> phi;    // at the X points, phi = 0 at the base point
  std::vector<Point> grads;   // the assigned Y points (subgradients)
  double feasibility_residual = 0.0;  // min over constraints, >= -1e-9 when feasible
};

// Rockafellar construction: longest paths over w(i->j) = <Y_i, X_j - X_i>
// from the lexicographically smallest X point. A positive cycle certifies the
// failure of cyclical monotonicity and is thrown as the witness.
inline DiscretePotential recover_potential(const PointCloud& x, const PointCloud& y,
                                           const Assignment& a) {
  require_same_dim(x, y, "recover_potential");
  const int k = x.size();
  if (static_cast<int>(a.to_y.size()) != k)
    throw parameter_error("recover_potential: assignment size mismatch");

  auto weight = [&](int i, int j) {
    double s = 0.0;
    for (int d = 0; d < x.dim(); ++d)
      s += y.point(a.to_y[i])[d] * (x.point(j)[d] - x.point(i)[d]);
    return s;
  };

  int base = 0;
  for (int i = 1; i < k; ++i) {
    for (int d = 0; d < x.dim(); ++d) {
      if (x.point(i)[d] < x.point(base)[d]) {
        base = i;
        break;
      }
      if (x.point(i)[d] > x.point(base)[d]) break;
    }
  }

  double scale = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) scale = std::max(scale, std::abs(weight(i, j)));
  const double cycle_tol = 1e-12 * (1.0 + scale);

  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::vector<double> phi(k, kNegInf);
  std::vector<int> pred(k, -1);
  phi[base] = 0.0;
  for (int round = 0; round < k - 1; ++round) {
    bool changed = false;
    for (int i = 0; i < k; ++i) {
      if (phi[i] == kNegInf) continue;
      for (int j = 0; j < k; ++j) {
        if (j == i) continue;
        const double cand = phi[i] + weight(i, j);
        if (cand > phi[j] + cycle_tol) {
          phi[j] = cand;
          pred[j] = i;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }
  // One more round: any improvement exposes a positive cycle.
  for (int i = 0; i < k; ++i) {
    if (phi[i] == kNegInf) continue;
    for (int j = 0; j < k; ++j) {
      if (j == i) continue;
      if (phi[i] + weight(i, j) > phi[j] + cycle_tol * k) {
        // Walk predecessors to land inside the positive cycle, then collect it.
        int node = i;
        for (int step = 0; step < k; ++step) node = pred[node] >= 0 ? pred[node] : node;
        std::vector<int> cycle;
        int cur = node;
        do {
          cycle.push_back(cur);
          cur = pred[cur] >= 0 ? pred[cur] : cur;
        } while (cur != node && cycle.size() <= static_cast<std::size_t>(k));
        std::reverse(cycle.begin(), cycle.end());
        throw infeasible_error("recover_potential: assignment is not cyclically monotone", cycle);
      }
    }
  }

  DiscretePotential pot;
  pot.phi = std::move(phi);
  pot.grads.resize(k);
  for (int i = 0; i < k; ++i) pot.grads[i] = y.point(a.to_y[i]);
  pot.feasibility_residual = 0.0;
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      pot.feasibility_residual =
          std::min(pot.feasibility_residual, pot.phi[j] - pot.phi[i] - weight(i, j));
    }
  return pot;
}

// ---------------------------------------------------------------------------
// Correlation / cost duality
// ---------------------------------------------------------------------------

struct DualityReport {
  double max_correlation = 0.0;
  double min_cost = 0.0;            // with the 1/2 convention
  double second_moments = 0.0;      // (sum w |X|^2 + sum w |Y|^2) / 2
  double identity_gap = 0.0;        // |max K + min C - second_moments|
  bool same_support = false;
};

inline DualityReport correlation_duality_check(const PointCloud& x, const PointCloud& y) {
  require_same_dim(x, y, "correlation_duality_check");
  const int m = x.size(), n = y.size();
  const TransportPlan cost_plan = solve_plan(x, y);

  std::vector<double> neg_corr(static_cast<std::size_t>(m) * n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      neg_corr[static_cast<std::size_t>(i) * n + j] = -dot(x.point(i), y.point(j), x.dim());
  const TransportPlan corr_plan = detail::solve_plan_with_cost(x, y, neg_corr);

  DualityReport rep;
  rep.min_cost = cost_plan.total_cost;
  rep.max_correlation = -corr_plan.total_cost;
  double mom = 0.0;
  for (int i = 0; i < m; ++i) mom += 0.5 * x.weight(i) * dot(x.point(i), x.point(i), x.dim());
  for (int j = 0; j < n; ++j) mom += 0.5 * y.weight(j) * dot(y.point(j), y.point(j), y.dim());
  rep.second_moments = mom;
  rep.identity_gap = std::abs(rep.max_correlation + rep.min_cost - rep.second_moments);
  rep.same_support = true;
  for (std::size_t k = 0; k < cost_plan.nu.size(); ++k) {
    const bool s1 = cost_plan.nu[k] > 1e-12;
    const bool s2 = corr_plan.nu[k] > 1e-12;
    if (s1 != s2) {
      rep.same_support = false;
      break;
    }
  }
  return rep;
}

}  // namespace ma
