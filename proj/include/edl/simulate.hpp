#pragma once

#include <cstdint>
#include <vector>

#include "edl/dataset.hpp"
#include "edl/potentials.hpp"

namespace edl {

/// Euler-Maruyama integration of the overdamped dynamics for Q ensembles of N
/// particles. Initial positions are Gaussian around each ensemble mean with
/// std cfg.init_std; snapshots are recorded exactly at cfg.snapshot_times.
/// Each particle draws from its own RNG stream keyed by (seed, q, j), so the
/// result is bit-identical under any thread count.
ParticleDataset simulate(const Potential& pot, const SimConfig& cfg);

/// Returns a copy of ds with i.i.d. Gaussian(0, sigma^2 I) added to every
/// position (and every velocity, when present). The input is not modified.
ParticleDataset add_observation_noise(const ParticleDataset& ds, double sigma,
                                      std::uint64_t seed);

/// Q i.i.d. uniform points in the axis-aligned box [lo, hi] (componentwise).
std::vector<std::vector<double>> sample_initial_means(
    int q, const std::vector<double>& lo, const std::vector<double>& hi,
    std::uint64_t seed);

}  // namespace edl
