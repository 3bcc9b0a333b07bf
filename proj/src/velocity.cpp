#include "edl/velocity.hpp"

#include <cmath>

#include "edl/errors.hpp"
#include "edl/parallel.hpp"
#include "edl/transport.hpp"

namespace edl {

void VelocitySource::validate() const {
  if (ot_iters < 1) throw ConfigError("velocity.ot_iters must be >= 1");
  if (exact_threshold < 0) throw ConfigError("velocity.exact_threshold must be >= 0");
  if (ot_tol <= 0) throw ConfigError("velocity.ot_tol must be > 0");
}

void force_balance_velocities(ParticleDataset& ds, const Potential& pot_true,
                              const KernelConfig& kc, double kbt) {
  const int d = ds.dim();
  if (pot_true.dim() != d || kc.dim != d)
    throw Error("force_balance_velocities: dimension mismatch");
  if (!ds.has_velocities()) ds.allocate_velocities();
  const std::size_t n = static_cast<std::size_t>(ds.particles());
  for (int q = 0; q < ds.ensembles(); ++q) {
    for (int i = 0; i < ds.snapshots(); ++i) {
      const auto pos = ds.positions(q, i);
      auto vel = ds.velocities(q, i);
      const KdeMemberTables tables = kde_member_tables(pos, n, kc);
      parallel_for(n, [&](std::size_t j) {
        double g[8];
        pot_true.gradient(pos.subspan(j * d, d), std::span<double>(g, d));
        for (int k = 0; k < d; ++k) {
          vel[j * d + k] = -kbt * tables.grad_log_density[j * d + k] - g[k];
        }
      });
    }
  }
}

namespace {

TransportPlan plan_between(std::span<const double> snap_a,
                           std::span<const double> snap_b, std::size_t n,
                           int d, const VelocitySource& vs) {
  vs.validate();
  std::vector<double> cost = pairwise_sq_cost(snap_a, n, snap_b, n, d);
  if (n <= static_cast<std::size_t>(vs.exact_threshold)) {
    return assignment_plan(cost, static_cast<int>(n));
  }
  double eps = vs.ot_epsilon;
  if (eps <= 0) eps = 1e-2 * median_cost(cost);
  if (eps <= 0) eps = 1e-12;  // degenerate clouds (all points coincide)
  return sinkhorn_plan(cost, static_cast<int>(n), static_cast<int>(n), eps,
                       vs.ot_iters, vs.ot_tol);
}

}  // namespace

std::vector<double> ot_velocity(std::span<const double> snap_a,
                                std::span<const double> snap_b, std::size_t n,
                                int d, double dt, const VelocitySource& vs) {
  if (dt <= 0) throw Error("ot_velocity: dt must be > 0");
  const TransportPlan plan = plan_between(snap_a, snap_b, n, d, vs);
  std::vector<double> mapped = plan.barycentric_map(snap_b, d);
  std::vector<double> v(n * static_cast<std::size_t>(d));
  for (std::size_t j = 0; j < n * static_cast<std::size_t>(d); ++j)
    v[j] = (mapped[j] - snap_a[j]) / dt;
  return v;
}

std::vector<double> ot_velocity_backward(std::span<const double> snap_a,
                                         std::span<const double> snap_b,
                                         std::size_t n, int d, double dt,
                                         const VelocitySource& vs) {
  if (dt <= 0) throw Error("ot_velocity_backward: dt must be > 0");
  const TransportPlan plan = plan_between(snap_a, snap_b, n, d, vs);
  std::vector<double> mapped = plan.barycentric_map_reverse(snap_a, d);
  std::vector<double> v(n * static_cast<std::size_t>(d));
  for (std::size_t j = 0; j < n * static_cast<std::size_t>(d); ++j)
    v[j] = (snap_b[j] - mapped[j]) / dt;
  return v;
}

void estimate_ot_velocities(ParticleDataset& ds, const VelocitySource& vs) {
  const int m = ds.snapshots();
  if (m < 2) throw Error("estimate_ot_velocities: at least two snapshots required");
  const int d = ds.dim();
  const std::size_t n = static_cast<std::size_t>(ds.particles());
  if (!ds.has_velocities()) ds.allocate_velocities();
  for (int q = 0; q < ds.ensembles(); ++q) {
    for (int i = 0; i + 1 < m; ++i) {
      const double dt = ds.times()[i + 1] - ds.times()[i];
      const auto a = ds.positions(q, i);
      const auto b = ds.positions(q, i + 1);
      const TransportPlan plan = plan_between(a, b, n, d, vs);
      {
        std::vector<double> mapped = plan.barycentric_map(b, d);
        auto vel = ds.velocities(q, i);
        for (std::size_t t = 0; t < n * static_cast<std::size_t>(d); ++t)
          vel[t] = (mapped[t] - a[t]) / dt;
      }
      if (i + 2 == m) {
        // Terminal snapshot: reuse the same pair through the reverse map.
        std::vector<double> mapped = plan.barycentric_map_reverse(a, d);
        auto vel = ds.velocities(q, i + 1);
        for (std::size_t t = 0; t < n * static_cast<std::size_t>(d); ++t)
          vel[t] = (b[t] - mapped[t]) / dt;
      }
    }
  }
}

double apply_environment_sine(ParticleDataset& ds, double lambda) {
  if (ds.dim() != 1)
    throw Error("apply_environment_sine: only 1d datasets are supported");
  if (!ds.has_velocities())
    throw Error("apply_environment_sine: dataset has no velocities");
  double v_max = 0.0;
  for (int q = 0; q < ds.ensembles(); ++q) {
    for (int i = 0; i < ds.snapshots(); ++i) {
      for (double v : ds.velocities(q, i)) v_max = std::max(v_max, std::abs(v));
    }
  }
  if (lambda == 0.0) return v_max;
  for (int q = 0; q < ds.ensembles(); ++q) {
    for (int i = 0; i < ds.snapshots(); ++i) {
      const auto pos = ds.positions(q, i);
      auto vel = ds.velocities(q, i);
      for (std::size_t j = 0; j < vel.size(); ++j)
        vel[j] += lambda * v_max * std::sin(pos[j]);
    }
  }
  return v_max;
}

}  // namespace edl
