#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "edl/dataset.hpp"
#include "edl/loss.hpp"
#include "edl/potentials.hpp"

namespace edl {

enum class LossKind { EnergyAlpha, PdeVelocity, DifferentialForm };

struct TrainConfig {
  int epochs = 5000;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::uint64_t seed = 0;  // weight initialization
  int hidden = 64;
  LossKind loss_kind = LossKind::EnergyAlpha;
  LossSpec loss;
  int log_every = 500;

  void validate() const;
};

struct AdamState {
  std::vector<double> m, v;
  long t = 0;

  static AdamState zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }
};

/// One Adam update with bias correction; deterministic. Throws on non-finite
/// gradient entries, naming the first offending parameter index.
void adam_step(std::vector<double>& theta, const std::vector<double>& grad,
               AdamState& state, const TrainConfig& cfg);

struct TrainResult {
  NeuralPotential model;
  std::vector<double> loss_history;                 // one entry per epoch
  std::vector<std::pair<int, double>> logged;       // (epoch, loss) at log_every
  bool diverged = false;
  int divergence_epoch = -1;  // model holds the last finite iterate
};

/// Full-batch minimization of the selected loss over all ensembles. The
/// theta-independent KDE tables are built once up front; every epoch then
/// costs one fused loss+gradient sweep. Deterministic given (data, config).
/// epoch_callback, when set, runs after each Adam step (checkpointing etc.).
TrainResult train(const ParticleDataset& ds, const KernelConfig& kc,
                  NeuralPotential init, const TrainConfig& cfg,
                  const std::function<void(int, const NeuralPotential&, double)>&
                      epoch_callback = {});

/// Loss dispatch shared by train() and one-off evaluations.
LossValue evaluate_loss(const LossTables& tables, const ParticleDataset& ds,
                        const Potential& pot, LossKind kind, const LossSpec& spec);

}  // namespace edl
