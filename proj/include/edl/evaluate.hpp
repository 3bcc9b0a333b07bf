#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edl/dataset.hpp"
#include "edl/kde.hpp"
#include "edl/potentials.hpp"

namespace edl {

/// Options for the equilibrium-weighted relative gradient error
///   || grad psi_L - grad psi_T ||_{L2(rho_eq)} / || grad psi_T ||_{L2(rho_eq)}
/// with rho_eq proportional to exp(-psi_T) (the benchmark convention), or
/// exp(-psi_T / kbt) when rho_eq_uses_kbt is set.
struct GradErrorOptions {
  std::vector<double> lo, hi;   // evaluation box, default [-2, 2]^d
  int grid_resolution = 201;    // per axis, used for d <= 2
  long mc_samples = 200000;     // used for d >= 3 (importance sampling)
  std::uint64_t seed = 0;
  bool rho_eq_uses_kbt = false;
  double kbt = 0.125;

  static GradErrorOptions defaults(int d);
};

double weighted_grad_error(const Potential& learned, const Potential& truth,
                           const GradErrorOptions& opt);

/// Re-simulates the dynamics under pot and reports the smoothed free energy
/// at every snapshot plus centered-difference dE/dt at interior snapshots.
struct EnergyRateCurve {
  std::vector<double> energy_times;  // all snapshot times
  std::vector<double> energy;        // discrete energy at each snapshot
  std::vector<double> rate_times;    // interior times
  std::vector<double> rate;          // (E_{k+1} - E_{k-1}) / (t_{k+1} - t_{k-1})
};
EnergyRateCurve energy_rate_curve(const Potential& pot, const SimConfig& cfg,
                                  const KernelConfig& kc);

/// 2-Wasserstein distance between point clouds under squared-Euclidean cost:
/// sqrt(matching cost / N). Exact assignment up to exact_threshold points,
/// debiased entropic approximation above. Unequal clouds are subsampled to
/// the smaller size first (seeded).
struct W2Options {
  int exact_threshold = 256;
  double epsilon_factor = 1e-3;  // epsilon = factor * median squared cost
  int max_subsample = 2000;      // cap on cloud size before solving
  int sinkhorn_iters = 20000;
  std::uint64_t seed = 0;
};
double wasserstein2(std::span<const double> cloud_a, std::size_t na,
                    std::span<const double> cloud_b, std::size_t nb, int d,
                    const W2Options& opt = {});

/// Lattice export of both potentials with the learned one shifted by the
/// mean difference over the lattice (the additive constant is not
/// identifiable). d <= 3.
struct GridExport {
  int dim = 0;
  int resolution = 0;
  std::vector<double> coords;        // row-major lattice points, size M*d
  std::vector<double> value_true;    // M
  std::vector<double> value_learned; // M, gauge-aligned
  double shift = 0.0;                // constant added to the learned values
};
GridExport export_grid(const Potential& learned, const Potential& truth,
                       const std::vector<double>& lo,
                       const std::vector<double>& hi, int resolution);
void write_grid_csv(const GridExport& g, const std::string& path);

}  // namespace edl
