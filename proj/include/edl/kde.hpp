#pragma once

#include <span>
#include <vector>

namespace edl {

/// Gaussian kernel K_h(x,y) = C_h^{-1} exp(-|x-y|^2 / (2 h^2)) with
/// C_h = (2 pi)^{d/2} h^d.
struct KernelConfig {
  double bandwidth = 0.05;
  int dim = 1;

  double norm_const() const;
  void validate() const;
};

/// Smoothed empirical density (K_h * rho_N)(x) = (1/N) sum_j K_h(x, x_j).
/// The particle at the query location, if any, is included in the sum.
double kde_density(std::span<const double> points, std::size_t n,
                   const KernelConfig& kc, std::span<const double> x);

/// log of kde_density, evaluated stably by factoring out the largest kernel
/// weight. Throws KdeUnderflowError when even the unnormalized weight sum
/// falls below 1e-300 ("query outside data support").
double kde_log_density(std::span<const double> points, std::size_t n,
                       const KernelConfig& kc, std::span<const double> x);

/// grad_x log (K_h * rho_N)(x) = sum_j w_j (x_j - x) / h^2 / sum_j w_j with
/// the same max-weight stabilization and underflow floor.
void kde_grad_log_density(std::span<const double> points, std::size_t n,
                          const KernelConfig& kc, std::span<const double> x,
                          std::span<double> out);
std::vector<double> kde_grad_log_density(std::span<const double> points,
                                         std::size_t n, const KernelConfig& kc,
                                         std::span<const double> x);

/// Batched evaluation of log density and grad-log-density at every member of
/// the point set itself (the only queries the losses ever make). Since the
/// self weight is exp(0) = 1, the stabilized sums reduce to plain sums and a
/// single pass over sources suffices; results match the pointwise functions
/// bit-for-bit. Parallel over query points.
struct KdeMemberTables {
  std::vector<double> log_density;       // n
  std::vector<double> grad_log_density;  // n * d
};
KdeMemberTables kde_member_tables(std::span<const double> points, std::size_t n,
                                  const KernelConfig& kc);

}  // namespace edl
