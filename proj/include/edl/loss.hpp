#pragma once

#include <span>
#include <vector>

#include "edl/dataset.hpp"
#include "edl/kde.hpp"
#include "edl/potentials.hpp"

namespace edl {

/// Time quadrature for the dissipation integral over the window.
///  - PaperLiteral: delta_s times the plain sum over every in-window snapshot
///    (reproduces the benchmark discretization verbatim; note it weights the
///    window as M * delta_s rather than (M-1) * delta_s).
///  - Trapezoid: endpoint weights halved, consistent with the window length.
enum class Quadrature { PaperLiteral, Trapezoid };

struct LossSpec {
  double alpha = 0.5;  // 0: velocity data only; 1: model gradient only
  double kbt = 0.125;
  double window_begin = 0.0;  // must be snapshot times, begin < end
  double window_end = 0.0;
  Quadrature quadrature = Quadrature::PaperLiteral;

  void validate() const;
};

/// Result of one loss evaluation.
///  - For the energy and differential-form losses, per_ensemble holds the
///    signed pre-squaring residuals and total == sum of their squares.
///  - For the velocity-residual loss, per_ensemble holds each ensemble's mean
///    contribution and total is their mean.
/// grad is d(total)/d(theta) and is filled only for NeuralPotential inputs.
struct LossValue {
  double total = 0.0;
  std::vector<double> per_ensemble;
  std::vector<double> grad;
};

/// Per-snapshot quantities that do not depend on the potential parameters:
/// kbt * log and kbt * grad-log of the snapshot's own smoothed density at its
/// particles, plus sum |v_j|^2 when velocities exist. Built once per dataset
/// and window; every loss evaluation during training reuses it.
class LossTables {
 public:
  static LossTables build(const ParticleDataset& ds, const KernelConfig& kc,
                          const LossSpec& spec);

  int window_first() const { return i0_; }
  int window_count() const { return k_; }
  double delta_s() const { return delta_s_; }
  double kbt() const { return kbt_; }
  bool has_velocity_sums() const { return !velsq_.empty(); }

  std::span<const double> score(int q, int li) const;  // kbt * grad log, n*d
  double kbt_log_density_sum(int q, int li) const;     // sum_j kbt * ln rho(x_j)
  double velocity_sq_sum(int q, int li) const;
  double quad_weight(int li, Quadrature quad) const;

 private:
  int q_ = 0, k_ = 0, n_ = 0, d_ = 0, i0_ = 0;
  double delta_s_ = 0.0, kbt_ = 0.0;
  std::vector<double> score_;       // q * k * n * d
  std::vector<double> kbt_ln_sum_;  // q * k
  std::vector<double> velsq_;       // q * k
};

/// Smoothed free energy of one snapshot,
///   (1/N) sum_j [ kbt ln(K_h * rho_N)(x_j) + psi(x_j) ],
/// with the density built from the snapshot's own particles.
double discrete_energy(std::span<const double> snapshot, std::size_t n,
                       const Potential& pot, const KernelConfig& kc, double kbt);

/// Dissipation-rate estimate at one snapshot,
///   (1-alpha)/N sum_j |v_j|^2 + alpha/N sum_j |kbt grad ln rho + grad psi|^2.
/// velocities may be empty iff alpha == 1.
double dissipation_rate(std::span<const double> positions,
                        std::span<const double> velocities, std::size_t n,
                        const Potential& pot, const KernelConfig& kc,
                        double kbt, double alpha);

/// Time quadrature of the dissipation rate over the window, per ensemble.
std::vector<double> discrete_dissipation(const ParticleDataset& ds,
                                         const Potential& pot,
                                         const KernelConfig& kc,
                                         const LossSpec& spec);

/// Energy-dissipation residual loss: per ensemble
///   r_q = E_q(T_end) - E_q(T_begin) + dissipation_q,   total = sum_q r_q^2.
/// For a NeuralPotential the output bias cancels between the two energy terms
/// and is omitted from the evaluation, which makes the loss exactly invariant
/// under psi -> psi + c (its gradient entry is identically zero).
LossValue energy_dissipation_loss(const LossTables& tables,
                                  const ParticleDataset& ds,
                                  const Potential& pot, const LossSpec& spec);
LossValue energy_dissipation_loss(const ParticleDataset& ds,
                                  const Potential& pot, const KernelConfig& kc,
                                  const LossSpec& spec);

/// Pointwise velocity-residual baseline: mean over in-window (q, i, j) of
///   (1/2) |v_j + kbt grad ln rho(x_j) + grad psi(x_j)|^2.
LossValue pde_velocity_loss(const LossTables& tables, const ParticleDataset& ds,
                            const Potential& pot, const LossSpec& spec);
LossValue pde_velocity_loss(const ParticleDataset& ds, const Potential& pot,
                            const KernelConfig& kc, const LossSpec& spec);

/// Single-interval differential-form residual at snapshot pair (i, i+1):
///   sum_q | (E_q(s_{i+1}) - E_q(s_i)) / delta_s + rate_q(s_i; alpha=1) |^2.
LossValue differential_form_loss(const ParticleDataset& ds, const Potential& pot,
                                 const KernelConfig& kc, double kbt,
                                 int snapshot_index);

/// Training objective for the differential-form family: the sum of the
/// single-interval residual losses over every consecutive in-window pair.
LossValue differential_form_window_loss(const LossTables& tables,
                                        const ParticleDataset& ds,
                                        const Potential& pot,
                                        const LossSpec& spec);

}  // namespace edl
