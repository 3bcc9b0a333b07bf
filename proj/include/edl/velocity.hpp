#pragma once

#include <span>
#include <vector>

#include "edl/dataset.hpp"
#include "edl/kde.hpp"
#include "edl/potentials.hpp"

namespace edl {

/// How particle velocities are produced for the dissipation data term.
struct VelocitySource {
  enum class Mode { ForceBalance, OptimalTransport };
  Mode mode = Mode::ForceBalance;

  /// Entropic regularization; <= 0 selects 1e-2 * median squared pairwise cost.
  double ot_epsilon = 0.0;
  int ot_iters = 20000;
  /// Snapshot sizes up to this use exact assignment instead of Sinkhorn.
  int exact_threshold = 64;
  double ot_tol = 1e-9;

  void validate() const;
};

/// Fills ds velocities with the force-balance values
///   v_j = -kbt * grad log(K_h * rho_N)(x_j) - grad psi_true(x_j),
/// where the smoothed density is built from the same snapshot's particles.
/// Available at data-generation time only (it needs the true potential).
void force_balance_velocities(ParticleDataset& ds, const Potential& pot_true,
                              const KernelConfig& kc, double kbt);

/// OT velocity estimate attached to snapA: a plan between the two uniform
/// empirical measures under squared-Euclidean cost (exact assignment when
/// n <= exact_threshold, else Sinkhorn + barycentric projection), then
/// v_j = (T(x_j) - x_j) / dt.
std::vector<double> ot_velocity(std::span<const double> snap_a,
                                std::span<const double> snap_b, std::size_t n,
                                int d, double dt, const VelocitySource& vs);

/// Same plan read backwards: velocities attached to snapB via the reverse
/// barycentric projection, v_k = (y_k - T~(y_k)) / dt.
std::vector<double> ot_velocity_backward(std::span<const double> snap_a,
                                         std::span<const double> snap_b,
                                         std::size_t n, int d, double dt,
                                         const VelocitySource& vs);

/// Estimates velocities for every snapshot of ds from consecutive pairs
/// (s_i, s_{i+1}); the final snapshot reuses the last pair backwards.
/// Particle indices are deliberately ignored across snapshots.
void estimate_ot_velocities(ParticleDataset& ds, const VelocitySource& vs);

/// In-place environmental perturbation v <- v + lambda * v_max * sin(x) for
/// 1d datasets, where v_max = max_j |v_j| over the whole dataset before the
/// perturbation. Returns v_max.
double apply_environment_sine(ParticleDataset& ds, double lambda);

}  // namespace edl
