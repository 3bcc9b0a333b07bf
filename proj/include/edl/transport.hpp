#pragma once

#include <span>
#include <vector>

namespace edl {

/// Dense squared-Euclidean cost matrix, row index into a, column into b.
std::vector<double> pairwise_sq_cost(std::span<const double> a, std::size_t na,
                                     std::span<const double> b, std::size_t nb,
                                     int d);

/// Minimum-cost perfect matching of a square cost matrix (shortest augmenting
/// path, O(n^3)). Returns col index assigned to each row.
std::vector<int> solve_assignment(const std::vector<double>& cost, int n);

/// Coupling between uniform empirical measures (1/n, 1/m).
struct TransportPlan {
  int n = 0, m = 0;
  std::vector<double> plan;     // n*m row-major; empty on the exact path
  std::vector<int> assignment;  // row -> col on the exact path; else empty
  double cost = 0.0;            // <P, C>
  int iterations = 0;
  double marginal_violation = 0.0;  // max |row/col sum - marginal|
  bool exact = false;

  /// P_{jk} as a function, valid for both representations.
  double entry(int j, int k) const;
  /// Barycentric projection sum_k P_jk y_k / sum_k P_jk for every row.
  std::vector<double> barycentric_map(std::span<const double> y, int d) const;
  /// Reverse projection sum_j P_jk x_j / sum_j P_jk for every column.
  std::vector<double> barycentric_map_reverse(std::span<const double> x, int d) const;
};

/// Entropic OT between uniform marginals by log-domain Sinkhorn iteration.
/// Stops when the worst marginal violation drops below tol; throws with the
/// final violation if max_iters is exhausted first.
TransportPlan sinkhorn_plan(const std::vector<double>& cost, int n, int m,
                            double epsilon, int max_iters, double tol = 1e-9);

/// Exact plan (permutation / n) via solve_assignment; square costs only.
TransportPlan assignment_plan(const std::vector<double>& cost, int n);

/// Median of the entries of a cost matrix (used for epsilon defaults).
double median_cost(std::vector<double> cost);

}  // namespace edl
