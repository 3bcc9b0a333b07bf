#include "edl/loss.hpp"

#include <cmath>
#include <string>

#include "edl/errors.hpp"
#include "edl/parallel.hpp"

namespace edl {

void LossSpec::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ConfigError("loss.alpha must lie in [0, 1]");
  if (kbt < 0) throw ConfigError("loss.kbt must be >= 0");
  if (!(window_begin < window_end))
    throw ConfigError("loss.window must satisfy begin < end");
}

// ---------------------------------------------------------------------------
// LossTables

LossTables LossTables::build(const ParticleDataset& ds, const KernelConfig& kc,
                             const LossSpec& spec) {
  spec.validate();
  kc.validate();
  if (kc.dim != ds.dim())
    throw Error("LossTables: kernel dimension does not match dataset");
  LossTables t;
  t.q_ = ds.ensembles();
  t.n_ = ds.particles();
  t.d_ = ds.dim();
  t.kbt_ = spec.kbt;
  t.i0_ = ds.snapshot_index(spec.window_begin);
  const int i1 = ds.snapshot_index(spec.window_end);
  if (i1 <= t.i0_)
    throw Error("LossTables: window must span at least two snapshots");
  t.k_ = i1 - t.i0_ + 1;
  t.delta_s_ = (spec.window_end - spec.window_begin) / (t.k_ - 1);
  for (int li = 0; li + 1 < t.k_; ++li) {
    const double gap = ds.times()[t.i0_ + li + 1] - ds.times()[t.i0_ + li];
    if (std::abs(gap - t.delta_s_) > 1e-9)
      throw Error("LossTables: in-window snapshots must be uniformly spaced");
  }

  const std::size_t n = static_cast<std::size_t>(t.n_);
  const std::size_t blocksz = n * static_cast<std::size_t>(t.d_);
  t.score_.assign(static_cast<std::size_t>(t.q_) * t.k_ * blocksz, 0.0);
  t.kbt_ln_sum_.assign(static_cast<std::size_t>(t.q_) * t.k_, 0.0);
  if (ds.has_velocities())
    t.velsq_.assign(static_cast<std::size_t>(t.q_) * t.k_, 0.0);

  for (int q = 0; q < t.q_; ++q) {
    for (int li = 0; li < t.k_; ++li) {
      const auto pos = ds.positions(q, t.i0_ + li);
      const KdeMemberTables kt = kde_member_tables(pos, n, kc);
      const std::size_t base = (static_cast<std::size_t>(q) * t.k_ + li);
      double* sc = t.score_.data() + base * blocksz;
      for (std::size_t e = 0; e < blocksz; ++e)
        sc[e] = spec.kbt * kt.grad_log_density[e];
      double lnsum = 0.0;
      for (std::size_t j = 0; j < n; ++j) lnsum += spec.kbt * kt.log_density[j];
      t.kbt_ln_sum_[base] = lnsum;
      if (ds.has_velocities()) {
        const auto vel = ds.velocities(q, t.i0_ + li);
        double s = 0.0;
        for (double v : vel) s += v * v;
        t.velsq_[base] = s;
      }
    }
  }
  return t;
}

std::span<const double> LossTables::score(int q, int li) const {
  const std::size_t blocksz = static_cast<std::size_t>(n_) * d_;
  return {score_.data() + (static_cast<std::size_t>(q) * k_ + li) * blocksz,
          blocksz};
}

double LossTables::kbt_log_density_sum(int q, int li) const {
  return kbt_ln_sum_[static_cast<std::size_t>(q) * k_ + li];
}

double LossTables::velocity_sq_sum(int q, int li) const {
  if (velsq_.empty()) throw Error("LossTables: velocity sums not available");
  return velsq_[static_cast<std::size_t>(q) * k_ + li];
}

double LossTables::quad_weight(int li, Quadrature quad) const {
  if (quad == Quadrature::PaperLiteral) return 1.0;
  return (li == 0 || li == k_ - 1) ? 0.5 : 1.0;
}

// ---------------------------------------------------------------------------
// Per-snapshot accumulation
//
// For each particle j the kernels form u = base_j + grad psi(x_j), where
// base_j is the precomputed kbt * grad log rho (plus the observed velocity
// for the velocity-residual loss), and accumulate
//   psi_sum = sum_j psi(x_j)          (endpoint energies)
//   sq_sum  = sum_j |u|^2             (dissipation / residual quadratic term)
//   dpsi[p] = sum_j d psi / d theta_p
//   dsq[p]  = sum_j u . d(grad psi)/d theta_p      (note: no factor 2)
// For a NeuralPotential psi is evaluated without its output bias b2; the
// losses only ever difference psi sums, where b2 cancels identically.

namespace {

struct SnapshotAccum {
  double psi_sum = 0.0;
  double sq_sum = 0.0;
  std::vector<double> dpsi;
  std::vector<double> dsq;
};

void accumulate_snapshot(std::span<const double> pos,
                         std::span<const double> score,
                         std::span<const double> vel, std::size_t n, int d,
                         const Potential& pot, const NeuralPotential* nn,
                         bool need_psi, bool need_sq, bool need_grad,
                         SnapshotAccum& out) {
  out.psi_sum = 0.0;
  out.sq_sum = 0.0;
  if (need_grad && nn) {
    out.dpsi.assign(nn->param_count(), 0.0);
    out.dsq.assign(nn->param_count(), 0.0);
  }
  const bool with_vel = !vel.empty();

  if (nn) {
    const int hs = nn->hidden();
    std::vector<double> th(hs), tph(hs);
    double* dpsi = out.dpsi.data();
    double* dsq = out.dsq.data();
    for (std::size_t j = 0; j < n; ++j) {
      const double* x = pos.data() + j * d;
      double psi = 0.0;
      double grad[8] = {0, 0, 0, 0, 0, 0, 0, 0};
      for (int h = 0; h < hs; ++h) {
        double z = nn->b1(h);
        for (int k = 0; k < d; ++k) z += nn->w1(h, k) * x[k];
        const double t = std::tanh(z);
        const double tp = 1.0 - t * t;
        th[h] = t;
        tph[h] = tp;
        psi += nn->w2(h) * t;
        const double c = nn->w2(h) * tp;
        for (int k = 0; k < d; ++k) grad[k] += c * nn->w1(h, k);
      }
      if (need_psi) out.psi_sum += psi;
      double u[8];
      if (need_sq) {
        double s = 0.0;
        for (int k = 0; k < d; ++k) {
          u[k] = score[j * d + k] + grad[k];
          if (with_vel) u[k] += vel[j * d + k];
          s += u[k] * u[k];
        }
        out.sq_sum += s;
      }
      if (need_grad) {
        for (int h = 0; h < hs; ++h) {
          const double t = th[h];
          const double tp = tph[h];
          const double w2h = nn->w2(h);
          if (need_sq) {
            const double tpp = -2.0 * t * tp;
            double a = 0.0;
            for (int k = 0; k < d; ++k) a += nn->w1(h, k) * u[k];
            dsq[nn->w2_index(h)] += tp * a;
            const double c1 = w2h * tpp * a;
            dsq[nn->b1_index(h)] += c1;
            const double c2 = w2h * tp;
            for (int k = 0; k < d; ++k)
              dsq[nn->w1_index(h, k)] += c2 * u[k] + c1 * x[k];
          }
          if (need_psi) {
            dpsi[nn->w2_index(h)] += t;
            const double cb = w2h * tp;
            dpsi[nn->b1_index(h)] += cb;
            for (int k = 0; k < d; ++k) dpsi[nn->w1_index(h, k)] += cb * x[k];
          }
        }
      }
    }
    return;
  }

  // Generic analytic potential: values and gradients only.
  for (std::size_t j = 0; j < n; ++j) {
    const auto x = pos.subspan(j * d, d);
    if (need_psi) out.psi_sum += pot.value(x);
    if (need_sq) {
      double g[8];
      pot.gradient(x, std::span<double>(g, d));
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        double u = score[j * d + k] + g[k];
        if (with_vel) u += vel[j * d + k];
        s += u * u;
      }
      out.sq_sum += s;
    }
  }
}

const NeuralPotential* as_neural(const Potential& pot) {
  return dynamic_cast<const NeuralPotential*>(&pot);
}

void check_pot(const ParticleDataset& ds, const Potential& pot) {
  if (pot.dim() != ds.dim())
    throw Error("loss: potential dimension does not match dataset");
  if (ds.dim() > 8) throw Error("loss: dimensions above 8 are not supported");
}

}  // namespace

// ---------------------------------------------------------------------------
// Public single-snapshot operations

double discrete_energy(std::span<const double> snapshot, std::size_t n,
                       const Potential& pot, const KernelConfig& kc,
                       double kbt) {
  kc.validate();
  if (pot.dim() != kc.dim) throw Error("discrete_energy: dimension mismatch");
  if (n == 0) throw Error("discrete_energy: empty snapshot");
  const KdeMemberTables kt = kde_member_tables(snapshot, n, kc);
  double s_ln = 0.0;
  for (std::size_t j = 0; j < n; ++j) s_ln += kbt * kt.log_density[j];
  double s_psi = 0.0;
  const int d = kc.dim;
  for (std::size_t j = 0; j < n; ++j)
    s_psi += pot.value(snapshot.subspan(j * d, d));
  return (s_ln + s_psi) / static_cast<double>(n);
}

double dissipation_rate(std::span<const double> positions,
                        std::span<const double> velocities, std::size_t n,
                        const Potential& pot, const KernelConfig& kc,
                        double kbt, double alpha) {
  kc.validate();
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw Error("dissipation_rate: alpha must lie in [0, 1]");
  if (velocities.empty() && alpha < 1.0)
    throw Error("dissipation_rate: velocities required for alpha < 1");
  if (n == 0) throw Error("dissipation_rate: empty snapshot");
  const int d = kc.dim;
  if (pot.dim() != d) throw Error("dissipation_rate: dimension mismatch");

  const KdeMemberTables kt = kde_member_tables(positions, n, kc);
  double sm = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double g[8];
    pot.gradient(positions.subspan(j * d, d), std::span<double>(g, d));
    for (int k = 0; k < d; ++k) {
      const double u = kbt * kt.grad_log_density[j * d + k] + g[k];
      sm += u * u;
    }
  }
  double sv = 0.0;
  if (!velocities.empty()) {
    if (velocities.size() != n * static_cast<std::size_t>(d))
      throw Error("dissipation_rate: velocity buffer size mismatch");
    for (double v : velocities) sv += v * v;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  return (1.0 - alpha) * (sv * inv_n) + alpha * (sm * inv_n);
}

std::vector<double> discrete_dissipation(const ParticleDataset& ds,
                                         const Potential& pot,
                                         const KernelConfig& kc,
                                         const LossSpec& spec) {
  spec.validate();
  check_pot(ds, pot);
  if (spec.alpha < 1.0 && !ds.has_velocities())
    throw Error("discrete_dissipation: velocities required for alpha < 1");
  const int i0 = ds.snapshot_index(spec.window_begin);
  const int i1 = ds.snapshot_index(spec.window_end);
  if (i1 <= i0) throw Error("discrete_dissipation: empty window");
  const int k_count = i1 - i0 + 1;
  const double delta_s = (spec.window_end - spec.window_begin) / (k_count - 1);
  std::vector<double> out(static_cast<std::size_t>(ds.ensembles()), 0.0);
  for (int q = 0; q < ds.ensembles(); ++q) {
    double acc = 0.0;
    for (int li = 0; li < k_count; ++li) {
      double w = 1.0;
      if (spec.quadrature == Quadrature::Trapezoid && (li == 0 || li == k_count - 1))
        w = 0.5;
      const auto pos = ds.positions(q, i0 + li);
      std::span<const double> vel;
      if (ds.has_velocities()) vel = ds.velocities(q, i0 + li);
      acc += w * dissipation_rate(pos, vel, ds.particles(), pot, kc, spec.kbt,
                                  spec.alpha);
    }
    out[q] = delta_s * acc;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Energy-dissipation loss

LossValue energy_dissipation_loss(const LossTables& tables,
                                  const ParticleDataset& ds,
                                  const Potential& pot, const LossSpec& spec) {
  spec.validate();
  check_pot(ds, pot);
  if (tables.kbt() != spec.kbt)
    throw Error("energy_dissipation_loss: tables were built for another kbt");
  if (spec.alpha < 1.0 && !tables.has_velocity_sums())
    throw Error("energy_dissipation_loss: velocities required for alpha < 1");

  const NeuralPotential* nn = as_neural(pot);
  const int q_count = ds.ensembles();
  const int k_count = tables.window_count();
  const std::size_t n = static_cast<std::size_t>(ds.particles());
  const int d = ds.dim();
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<SnapshotAccum> blocks(static_cast<std::size_t>(q_count) * k_count);
  parallel_for(blocks.size(), [&](std::size_t b) {
    const int q = static_cast<int>(b) / k_count;
    const int li = static_cast<int>(b) % k_count;
    const bool endpoint = (li == 0 || li == k_count - 1);
    accumulate_snapshot(ds.positions(q, tables.window_first() + li),
                        tables.score(q, li), {}, n, d, pot, nn,
                        /*need_psi=*/endpoint, /*need_sq=*/spec.alpha > 0.0,
                        /*need_grad=*/nn != nullptr, blocks[b]);
  });

  LossValue out;
  out.per_ensemble.resize(static_cast<std::size_t>(q_count));
  const std::size_t p_count = nn ? static_cast<std::size_t>(nn->param_count()) : 0;
  if (nn) out.grad.assign(p_count, 0.0);
  std::vector<double> grad_r(p_count);

  for (int q = 0; q < q_count; ++q) {
    const SnapshotAccum& first = blocks[static_cast<std::size_t>(q) * k_count];
    const SnapshotAccum& last =
        blocks[static_cast<std::size_t>(q) * k_count + (k_count - 1)];
    const double e_begin =
        (tables.kbt_log_density_sum(q, 0) + first.psi_sum) * inv_n;
    const double e_end =
        (tables.kbt_log_density_sum(q, k_count - 1) + last.psi_sum) * inv_n;

    double diss = 0.0;
    for (int li = 0; li < k_count; ++li) {
      const double w = tables.quad_weight(li, spec.quadrature);
      const double sv =
          spec.alpha < 1.0 ? tables.velocity_sq_sum(q, li) : 0.0;
      const double sm =
          spec.alpha > 0.0
              ? blocks[static_cast<std::size_t>(q) * k_count + li].sq_sum
              : 0.0;
      diss += w * ((1.0 - spec.alpha) * (sv * inv_n) + spec.alpha * (sm * inv_n));
    }
    const double r = (e_end - e_begin) + tables.delta_s() * diss;
    out.per_ensemble[static_cast<std::size_t>(q)] = r;
    out.total += r * r;

    if (nn) {
      for (std::size_t p = 0; p < p_count; ++p)
        grad_r[p] = (last.dpsi[p] - first.dpsi[p]) * inv_n;
      if (spec.alpha > 0.0) {
        for (int li = 0; li < k_count; ++li) {
          const double c = 2.0 * spec.alpha * tables.delta_s() *
                           tables.quad_weight(li, spec.quadrature) * inv_n;
          const SnapshotAccum& blk =
              blocks[static_cast<std::size_t>(q) * k_count + li];
          for (std::size_t p = 0; p < p_count; ++p) grad_r[p] += c * blk.dsq[p];
        }
      }
      for (std::size_t p = 0; p < p_count; ++p)
        out.grad[p] += 2.0 * r * grad_r[p];
    }
  }
  return out;
}

LossValue energy_dissipation_loss(const ParticleDataset& ds,
                                  const Potential& pot, const KernelConfig& kc,
                                  const LossSpec& spec) {
  const LossTables tables = LossTables::build(ds, kc, spec);
  return energy_dissipation_loss(tables, ds, pot, spec);
}

// ---------------------------------------------------------------------------
// Velocity-residual (low-order PDE) loss

LossValue pde_velocity_loss(const LossTables& tables, const ParticleDataset& ds,
                            const Potential& pot, const LossSpec& spec) {
  spec.validate();
  check_pot(ds, pot);
  if (!ds.has_velocities())
    throw Error("pde_velocity_loss: velocities required");
  if (tables.kbt() != spec.kbt)
    throw Error("pde_velocity_loss: tables were built for another kbt");

  const NeuralPotential* nn = as_neural(pot);
  const int q_count = ds.ensembles();
  const int k_count = tables.window_count();
  const std::size_t n = static_cast<std::size_t>(ds.particles());
  const int d = ds.dim();

  std::vector<SnapshotAccum> blocks(static_cast<std::size_t>(q_count) * k_count);
  parallel_for(blocks.size(), [&](std::size_t b) {
    const int q = static_cast<int>(b) / k_count;
    const int li = static_cast<int>(b) % k_count;
    accumulate_snapshot(ds.positions(q, tables.window_first() + li),
                        tables.score(q, li),
                        ds.velocities(q, tables.window_first() + li), n, d, pot,
                        nn, /*need_psi=*/false, /*need_sq=*/true,
                        /*need_grad=*/nn != nullptr, blocks[b]);
  });

  LossValue out;
  out.per_ensemble.resize(static_cast<std::size_t>(q_count));
  const double denom =
      static_cast<double>(q_count) * k_count * static_cast<double>(n);
  for (int q = 0; q < q_count; ++q) {
    double s = 0.0;
    for (int li = 0; li < k_count; ++li)
      s += blocks[static_cast<std::size_t>(q) * k_count + li].sq_sum;
    out.per_ensemble[static_cast<std::size_t>(q)] =
        0.5 * s / (static_cast<double>(k_count) * static_cast<double>(n));
    out.total += 0.5 * s / denom;
  }
  if (nn) {
    out.grad.assign(static_cast<std::size_t>(nn->param_count()), 0.0);
    for (const SnapshotAccum& blk : blocks) {
      for (std::size_t p = 0; p < out.grad.size(); ++p)
        out.grad[p] += blk.dsq[p] / denom;
    }
  }
  return out;
}

LossValue pde_velocity_loss(const ParticleDataset& ds, const Potential& pot,
                            const KernelConfig& kc, const LossSpec& spec) {
  const LossTables tables = LossTables::build(ds, kc, spec);
  return pde_velocity_loss(tables, ds, pot, spec);
}

// ---------------------------------------------------------------------------
// Differential-form loss

namespace {

LossValue differential_form_from_blocks(
    const std::vector<SnapshotAccum>& blocks, const std::vector<double>& lnsum,
    const std::vector<double>& velsq_unused, int q_count, int k_count,
    std::size_t n, double delta_s, const NeuralPotential* nn) {
  (void)velsq_unused;
  const double inv_n = 1.0 / static_cast<double>(n);
  LossValue out;
  out.per_ensemble.assign(static_cast<std::size_t>(q_count), 0.0);
  const std::size_t p_count = nn ? static_cast<std::size_t>(nn->param_count()) : 0;
  if (nn) out.grad.assign(p_count, 0.0);
  std::vector<double> grad_r(p_count);

  for (int q = 0; q < q_count; ++q) {
    for (int li = 0; li + 1 < k_count; ++li) {
      const SnapshotAccum& a = blocks[static_cast<std::size_t>(q) * k_count + li];
      const SnapshotAccum& b =
          blocks[static_cast<std::size_t>(q) * k_count + li + 1];
      const double e_i =
          (lnsum[static_cast<std::size_t>(q) * k_count + li] + a.psi_sum) * inv_n;
      const double e_next =
          (lnsum[static_cast<std::size_t>(q) * k_count + li + 1] + b.psi_sum) *
          inv_n;
      const double r = (e_next - e_i) / delta_s + a.sq_sum * inv_n;
      out.per_ensemble[static_cast<std::size_t>(q)] += r * r;
      out.total += r * r;
      if (nn) {
        for (std::size_t p = 0; p < p_count; ++p) {
          grad_r[p] = (b.dpsi[p] - a.dpsi[p]) * inv_n / delta_s +
                      2.0 * a.dsq[p] * inv_n;
          out.grad[p] += 2.0 * r * grad_r[p];
        }
      }
    }
  }
  // With a single interval per_ensemble holds the signed residual itself.
  if (k_count == 2) {
    for (int q = 0; q < q_count; ++q) {
      const SnapshotAccum& a = blocks[static_cast<std::size_t>(q) * 2];
      const SnapshotAccum& b = blocks[static_cast<std::size_t>(q) * 2 + 1];
      const double e_i = (lnsum[static_cast<std::size_t>(q) * 2] + a.psi_sum) * inv_n;
      const double e_next =
          (lnsum[static_cast<std::size_t>(q) * 2 + 1] + b.psi_sum) * inv_n;
      out.per_ensemble[static_cast<std::size_t>(q)] =
          (e_next - e_i) / delta_s + a.sq_sum * inv_n;
    }
  }
  return out;
}

}  // namespace

LossValue differential_form_loss(const ParticleDataset& ds, const Potential& pot,
                                 const KernelConfig& kc, double kbt,
                                 int snapshot_index) {
  kc.validate();
  check_pot(ds, pot);
  if (kc.dim != ds.dim())
    throw Error("differential_form_loss: kernel dimension mismatch");
  if (snapshot_index < 0 || snapshot_index + 1 >= ds.snapshots())
    throw Error("differential_form_loss: snapshot index out of range");
  const double delta_s =
      ds.times()[snapshot_index + 1] - ds.times()[snapshot_index];
  const NeuralPotential* nn = as_neural(pot);
  const int q_count = ds.ensembles();
  const std::size_t n = static_cast<std::size_t>(ds.particles());
  const int d = ds.dim();

  std::vector<SnapshotAccum> blocks(static_cast<std::size_t>(q_count) * 2);
  std::vector<double> lnsum(static_cast<std::size_t>(q_count) * 2, 0.0);
  std::vector<std::vector<double>> scores(static_cast<std::size_t>(q_count));
  parallel_for(static_cast<std::size_t>(q_count) * 2, [&](std::size_t b) {
    const int q = static_cast<int>(b) / 2;
    const int li = static_cast<int>(b) % 2;
    const auto pos = ds.positions(q, snapshot_index + li);
    const KdeMemberTables kt = kde_member_tables(pos, n, kc);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += kbt * kt.log_density[j];
    lnsum[b] = s;
    std::vector<double> score(n * static_cast<std::size_t>(d));
    for (std::size_t e = 0; e < score.size(); ++e)
      score[e] = kbt * kt.grad_log_density[e];
    accumulate_snapshot(pos, score, {}, n, d, pot, nn, /*need_psi=*/true,
                        /*need_sq=*/li == 0, /*need_grad=*/nn != nullptr,
                        blocks[b]);
  });
  return differential_form_from_blocks(blocks, lnsum, {}, q_count, 2, n,
                                       delta_s, nn);
}

LossValue differential_form_window_loss(const LossTables& tables,
                                        const ParticleDataset& ds,
                                        const Potential& pot,
                                        const LossSpec& spec) {
  spec.validate();
  check_pot(ds, pot);
  if (tables.kbt() != spec.kbt)
    throw Error("differential_form_window_loss: tables were built for another kbt");

  const NeuralPotential* nn = as_neural(pot);
  const int q_count = ds.ensembles();
  const int k_count = tables.window_count();
  const std::size_t n = static_cast<std::size_t>(ds.particles());
  const int d = ds.dim();

  std::vector<SnapshotAccum> blocks(static_cast<std::size_t>(q_count) * k_count);
  std::vector<double> lnsum(blocks.size());
  parallel_for(blocks.size(), [&](std::size_t b) {
    const int q = static_cast<int>(b) / k_count;
    const int li = static_cast<int>(b) % k_count;
    lnsum[b] = tables.kbt_log_density_sum(q, li);
    accumulate_snapshot(ds.positions(q, tables.window_first() + li),
                        tables.score(q, li), {}, n, d, pot, nn,
                        /*need_psi=*/true, /*need_sq=*/li + 1 < k_count,
                        /*need_grad=*/nn != nullptr, blocks[b]);
  });
  return differential_form_from_blocks(blocks, lnsum, {}, q_count, k_count, n,
                                       tables.delta_s(), nn);
}

}  // namespace edl
