#include "edl/train.hpp"

#include <cmath>
#include <string>

#include "edl/errors.hpp"

namespace edl {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (lr <= 0) throw ConfigError("train.lr must be > 0");
  if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("train.beta1 must lie in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("train.beta2 must lie in [0, 1)");
  if (eps_adam <= 0) throw ConfigError("train.eps_adam must be > 0");
  if (hidden < 1) throw ConfigError("train.hidden must be >= 1");
  if (log_every < 1) throw ConfigError("train.log_every must be >= 1");
  loss.validate();
}

void adam_step(std::vector<double>& theta, const std::vector<double>& grad,
               AdamState& state, const TrainConfig& cfg) {
  if (grad.size() != theta.size() || state.m.size() != theta.size() ||
      state.v.size() != theta.size()) {
    throw Error("adam_step: parameter/gradient/state size mismatch");
  }
  for (std::size_t p = 0; p < grad.size(); ++p) {
    if (!std::isfinite(grad[p]))
      throw Error("adam_step: non-finite gradient at parameter index " +
                  std::to_string(p));
  }
  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t p = 0; p < theta.size(); ++p) {
    state.m[p] = cfg.beta1 * state.m[p] + (1.0 - cfg.beta1) * grad[p];
    state.v[p] = cfg.beta2 * state.v[p] + (1.0 - cfg.beta2) * grad[p] * grad[p];
    const double mhat = state.m[p] / bc1;
    const double vhat = state.v[p] / bc2;
    theta[p] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps_adam);
  }
}

LossValue evaluate_loss(const LossTables& tables, const ParticleDataset& ds,
                        const Potential& pot, LossKind kind,
                        const LossSpec& spec) {
  switch (kind) {
    case LossKind::EnergyAlpha:
      return energy_dissipation_loss(tables, ds, pot, spec);
    case LossKind::PdeVelocity:
      return pde_velocity_loss(tables, ds, pot, spec);
    case LossKind::DifferentialForm:
      return differential_form_window_loss(tables, ds, pot, spec);
  }
  throw Error("evaluate_loss: unknown loss kind");
}

TrainResult train(const ParticleDataset& ds, const KernelConfig& kc,
                  NeuralPotential init, const TrainConfig& cfg,
                  const std::function<void(int, const NeuralPotential&, double)>&
                      epoch_callback) {
  cfg.validate();
  if (init.dim() != ds.dim()) throw Error("train: model dimension mismatch");
  const bool needs_velocities =
      cfg.loss_kind == LossKind::PdeVelocity ||
      (cfg.loss_kind == LossKind::EnergyAlpha && cfg.loss.alpha < 1.0);
  if (needs_velocities && !ds.has_velocities())
    throw Error("train: selected loss requires velocity data");

  const LossTables tables = LossTables::build(ds, kc, cfg.loss);

  TrainResult res{std::move(init), {}, {}, false, -1};
  res.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
  AdamState state = AdamState::zeros(res.model.params().size());
  std::vector<double> backup;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const LossValue lv =
        evaluate_loss(tables, ds, res.model, cfg.loss_kind, cfg.loss);
    bool finite = std::isfinite(lv.total);
    for (double g : lv.grad) finite = finite && std::isfinite(g);
    if (!finite) {
      // Keep the last finite iterate.
      if (!backup.empty()) res.model.params() = backup;
      res.diverged = true;
      res.divergence_epoch = epoch;
      break;
    }
    res.loss_history.push_back(lv.total);
    if (epoch % cfg.log_every == 0 || epoch == cfg.epochs - 1)
      res.logged.emplace_back(epoch, lv.total);
    backup = res.model.params();
    adam_step(res.model.params(), lv.grad, state, cfg);
    if (epoch_callback) epoch_callback(epoch, res.model, lv.total);
  }
  return res;
}

}  // namespace edl
