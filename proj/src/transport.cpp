#include "edl/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "edl/errors.hpp"
#include "edl/parallel.hpp"

namespace edl {

std::vector<double> pairwise_sq_cost(std::span<const double> a, std::size_t na,
                                     std::span<const double> b, std::size_t nb,
                                     int d) {
  if (a.size() != na * static_cast<std::size_t>(d) ||
      b.size() != nb * static_cast<std::size_t>(d)) {
    throw Error("pairwise_sq_cost: buffer sizes do not match n * dim");
  }
  std::vector<double> cost(na * nb);
  parallel_for(na, [&](std::size_t j) {
    const double* xj = a.data() + j * d;
    for (std::size_t k = 0; k < nb; ++k) {
      const double* yk = b.data() + k * d;
      double r2 = 0.0;
      for (int t = 0; t < d; ++t) {
        const double u = xj[t] - yk[t];
        r2 += u * u;
      }
      cost[j * nb + k] = r2;
    }
  });
  return cost;
}

std::vector<int> solve_assignment(const std::vector<double>& cost, int n) {
  if (n < 1) throw Error("solve_assignment: n must be >= 1");
  if (cost.size() != static_cast<std::size_t>(n) * n)
    throw Error("solve_assignment: cost matrix must be n x n");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
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
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j) {
    if (p[j]) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

double TransportPlan::entry(int j, int k) const {
  if (exact) return assignment[j] == k ? 1.0 / n : 0.0;
  return plan[static_cast<std::size_t>(j) * m + k];
}

std::vector<double> TransportPlan::barycentric_map(std::span<const double> y,
                                                   int d) const {
  std::vector<double> out(static_cast<std::size_t>(n) * d, 0.0);
  if (exact) {
    for (int j = 0; j < n; ++j) {
      const double* yk = y.data() + static_cast<std::size_t>(assignment[j]) * d;
      for (int t = 0; t < d; ++t) out[static_cast<std::size_t>(j) * d + t] = yk[t];
    }
    return out;
  }
  for (int j = 0; j < n; ++j) {
    const double* row = plan.data() + static_cast<std::size_t>(j) * m;
    double rs = 0.0;
    for (int k = 0; k < m; ++k) {
      rs += row[k];
      for (int t = 0; t < d; ++t)
        out[static_cast<std::size_t>(j) * d + t] += row[k] * y[static_cast<std::size_t>(k) * d + t];
    }
    for (int t = 0; t < d; ++t) out[static_cast<std::size_t>(j) * d + t] /= rs;
  }
  return out;
}

std::vector<double> TransportPlan::barycentric_map_reverse(
    std::span<const double> x, int d) const {
  std::vector<double> out(static_cast<std::size_t>(m) * d, 0.0);
  if (exact) {
    for (int j = 0; j < n; ++j) {
      const int k = assignment[j];
      const double* xj = x.data() + static_cast<std::size_t>(j) * d;
      for (int t = 0; t < d; ++t) out[static_cast<std::size_t>(k) * d + t] = xj[t];
    }
    return out;
  }
  std::vector<double> cs(static_cast<std::size_t>(m), 0.0);
  for (int j = 0; j < n; ++j) {
    const double* row = plan.data() + static_cast<std::size_t>(j) * m;
    const double* xj = x.data() + static_cast<std::size_t>(j) * d;
    for (int k = 0; k < m; ++k) {
      cs[k] += row[k];
      for (int t = 0; t < d; ++t) out[static_cast<std::size_t>(k) * d + t] += row[k] * xj[t];
    }
  }
  for (int k = 0; k < m; ++k)
    for (int t = 0; t < d; ++t) out[static_cast<std::size_t>(k) * d + t] /= cs[k];
  return out;
}

TransportPlan assignment_plan(const std::vector<double>& cost, int n) {
  TransportPlan p;
  p.n = n;
  p.m = n;
  p.exact = true;
  p.assignment = solve_assignment(cost, n);
  p.iterations = 0;
  p.marginal_violation = 0.0;
  double c = 0.0;
  for (int j = 0; j < n; ++j) c += cost[static_cast<std::size_t>(j) * n + p.assignment[j]];
  p.cost = c / n;
  return p;
}

TransportPlan sinkhorn_plan(const std::vector<double>& cost, int n, int m,
                            double epsilon, int max_iters, double tol) {
  if (n < 1 || m < 1) throw Error("sinkhorn_plan: empty marginals");
  if (cost.size() != static_cast<std::size_t>(n) * m)
    throw Error("sinkhorn_plan: cost matrix must be n x m");
  if (epsilon <= 0) throw Error("sinkhorn_plan: epsilon must be > 0");
  if (max_iters < 1) throw Error("sinkhorn_plan: max_iters must be >= 1");

  const double inv_eps = 1.0 / epsilon;
  const double log_a = -std::log(static_cast<double>(n));
  const double log_b = -std::log(static_cast<double>(m));
  // Dual potentials scaled by 1/eps: plan entries are exp(f_j + g_k - C_jk/eps).
  std::vector<double> f(n, 0.0), g(m, 0.0);
  std::vector<double> ce(cost.size());  // C/eps, cached
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t j) {
    for (int k = 0; k < m; ++k)
      ce[j * m + k] = cost[j * m + k] * inv_eps;
  });

  // Terms more than 36.8 nats below the row maximum are < 1e-16 relative and
  // cannot move the log-sum at double precision.
  constexpr double kDrop = -37.0;

  auto row_update = [&] {
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t j) {
      const double* c = ce.data() + j * m;
      double best = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < m; ++k) {
        const double v = g[k] - c[k];
        if (v > best) best = v;
      }
      double s = 0.0;
      for (int k = 0; k < m; ++k) {
        const double v = g[k] - c[k] - best;
        if (v > kDrop) s += std::exp(v);
      }
      f[j] = log_a - (best + std::log(s));
    });
  };
  auto col_update = [&] {
    // Column pass: transpose traversal, kept serial per column chunk.
    parallel_for(static_cast<std::size_t>(m), [&](std::size_t k) {
      double best = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < n; ++j) {
        const double v = f[j] - ce[static_cast<std::size_t>(j) * m + k];
        if (v > best) best = v;
      }
      double s = 0.0;
      for (int j = 0; j < n; ++j) {
        const double v = f[j] - ce[static_cast<std::size_t>(j) * m + k] - best;
        if (v > kDrop) s += std::exp(v);
      }
      g[k] = log_b - (best + std::log(s));
    });
  };

  const double a_target = 1.0 / n;
  const double b_target = 1.0 / m;
  double violation = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < max_iters; ++it) {
    row_update();
    col_update();
    if (it % 5 == 4 || it == max_iters - 1) {
      // After the column update, column marginals are exact; check rows.
      double worst = 0.0;
      for (int j = 0; j < n; ++j) {
        const double* c = ce.data() + static_cast<std::size_t>(j) * m;
        double rs = 0.0;
        for (int k = 0; k < m; ++k) {
          const double v = f[j] + g[k] - c[k];
          if (v > kDrop + std::log(a_target)) rs += std::exp(v);
        }
        worst = std::max(worst, std::abs(rs - a_target));
      }
      violation = worst;
      if (violation < tol) {
        ++it;
        break;
      }
    }
  }
  if (violation >= tol) {
    throw Error("sinkhorn_plan: no convergence after " + std::to_string(max_iters) +
                " iterations (marginal violation " + std::to_string(violation) + ")");
  }

  TransportPlan p;
  p.n = n;
  p.m = m;
  p.exact = false;
  p.iterations = it;
  p.plan.resize(cost.size());
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t j) {
    const double* c = ce.data() + j * m;
    for (int k = 0; k < m; ++k) p.plan[j * m + k] = std::exp(f[j] + g[k] - c[k]);
  });
  double total_cost = 0.0;
  double worst = 0.0;
  std::vector<double> col_sums(m, 0.0);
  for (int j = 0; j < n; ++j) {
    const double* row = p.plan.data() + static_cast<std::size_t>(j) * m;
    double rs = 0.0;
    for (int k = 0; k < m; ++k) {
      rs += row[k];
      col_sums[k] += row[k];
      total_cost += row[k] * cost[static_cast<std::size_t>(j) * m + k];
    }
    worst = std::max(worst, std::abs(rs - a_target));
  }
  for (int k = 0; k < m; ++k) worst = std::max(worst, std::abs(col_sums[k] - b_target));
  p.cost = total_cost;
  p.marginal_violation = worst;
  return p;
}

double median_cost(std::vector<double> cost) {
  if (cost.empty()) throw Error("median_cost: empty matrix");
  const std::size_t mid = cost.size() / 2;
  std::nth_element(cost.begin(), cost.begin() + mid, cost.end());
  return cost[mid];
}

}  // namespace edl
