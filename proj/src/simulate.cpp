#include "edl/simulate.hpp"

#include <cmath>
#include <string>

#include "edl/errors.hpp"
#include "edl/parallel.hpp"
#include "edl/rng.hpp"

namespace edl {

ParticleDataset simulate(const Potential& pot, const SimConfig& cfg) {
  cfg.validate();
  const int d = cfg.dim();
  if (pot.dim() != d) {
    throw Error("simulate: potential is " + std::to_string(pot.dim()) +
                "-dimensional but sim config is " + std::to_string(d) +
                "-dimensional");
  }
  if (d > 8) throw Error("simulate: dimensions above 8 are not supported");
  const int q_count = cfg.n_ensembles;
  const int n = cfg.n_particles;
  const int m = static_cast<int>(cfg.snapshot_times.size());

  std::vector<long long> snap_steps(m);
  for (int i = 0; i < m; ++i) snap_steps[i] = std::llround(cfg.snapshot_times[i] / cfg.dt);

  ParticleDataset ds(q_count, m, n, d, cfg.snapshot_times);
  ds.meta = {{"sim", cfg.to_json()}};

  const double drift_scale = cfg.dt / cfg.gamma;
  const double noise_scale = std::sqrt(2.0 * cfg.kbt * cfg.dt / cfg.gamma);
  const long long last_step = snap_steps.back();

  std::string failure;  // first divergence message, if any

  parallel_for(static_cast<std::size_t>(q_count) * n, [&](std::size_t idx) {
    const int q = static_cast<int>(idx / n);
    const int j = static_cast<int>(idx % n);
    Rng rng(stream_key(cfg.seed, stream_tag::kSimulate, static_cast<std::uint64_t>(q),
                       static_cast<std::uint64_t>(j)));
    double x[8];
    double g[8];
    for (int k = 0; k < d; ++k) x[k] = cfg.init_means[q][k] + cfg.init_std * rng.normal();

    int next_snap = 0;
    auto record = [&](int i) {
      auto out = ds.positions(q, i);
      for (int k = 0; k < d; ++k) out[static_cast<std::size_t>(j) * d + k] = x[k];
    };
    while (next_snap < m && snap_steps[next_snap] == 0) record(next_snap++);

    for (long long step = 1; step <= last_step; ++step) {
      pot.gradient(std::span<const double>(x, d), std::span<double>(g, d));
      bool ok = true;
      for (int k = 0; k < d; ++k) {
        x[k] += -g[k] * drift_scale + noise_scale * rng.normal();
        ok = ok && std::isfinite(x[k]);
      }
      if (!ok) {
        if (failure.empty()) {
          failure = "simulate: trajectory diverged in ensemble " + std::to_string(q) +
                    ", particle " + std::to_string(j) + ", step " + std::to_string(step);
        }
        return;
      }
      while (next_snap < m && snap_steps[next_snap] == step) record(next_snap++);
    }
  });

  if (!failure.empty()) throw DivergenceError(failure);
  return ds;
}

ParticleDataset add_observation_noise(const ParticleDataset& ds, double sigma,
                                      std::uint64_t seed) {
  if (sigma < 0) throw Error("add_observation_noise: sigma must be >= 0");
  ParticleDataset out = ds;
  if (sigma == 0) return out;
  const int d = ds.dim();
  const int n = ds.particles();
  for (int q = 0; q < ds.ensembles(); ++q) {
    for (int i = 0; i < ds.snapshots(); ++i) {
      auto pos = out.positions(q, i);
      std::span<double> vel;
      if (out.has_velocities()) vel = out.velocities(q, i);
      parallel_for(static_cast<std::size_t>(n), [&](std::size_t j) {
        Rng rng(stream_key(seed ^ (stream_tag::kObservationNoise << 32),
                           static_cast<std::uint64_t>(q),
                           static_cast<std::uint64_t>(i), j));
        for (int k = 0; k < d; ++k) pos[j * d + k] += sigma * rng.normal();
        if (!vel.empty()) {
          for (int k = 0; k < d; ++k) vel[j * d + k] += sigma * rng.normal();
        }
      });
    }
  }
  return out;
}

std::vector<std::vector<double>> sample_initial_means(
    int q, const std::vector<double>& lo, const std::vector<double>& hi,
    std::uint64_t seed) {
  if (q < 1) throw Error("sample_initial_means: q must be >= 1");
  if (lo.empty() || lo.size() != hi.size())
    throw Error("sample_initial_means: box bounds must be non-empty and congruent");
  for (std::size_t k = 0; k < lo.size(); ++k) {
    if (hi[k] < lo[k]) throw Error("sample_initial_means: empty box (hi < lo)");
  }
  Rng rng(stream_key(seed, stream_tag::kInitMeans));
  std::vector<std::vector<double>> means(static_cast<std::size_t>(q));
  for (auto& m : means) {
    m.resize(lo.size());
    for (std::size_t k = 0; k < lo.size(); ++k) m[k] = rng.uniform(lo[k], hi[k]);
  }
  return means;
}

}  // namespace edl
