#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace edl {

/// Settings for simulating ensembles of the overdamped dynamics
///   dX = -(1/gamma) grad psi(X) dt + sqrt(2 kbt/gamma) dW.
struct SimConfig {
  double kbt = 0.125;
  double gamma = 1.0;
  double dt = 1e-3;                      // integrator step
  std::vector<double> snapshot_times;    // strictly increasing multiples of dt
  int n_particles = 0;                   // N per ensemble, >= 2
  int n_ensembles = 1;                   // Q >= 1
  std::vector<std::vector<double>> init_means;  // Q points of dimension d
  double init_std = 0.5;
  std::uint64_t seed = 0;

  int dim() const;
  void validate() const;  // throws ConfigError naming the offending field

  nlohmann::json to_json() const;
  static SimConfig from_json(const nlohmann::json& j);
};

/// Snapshots of Q independent ensembles at M common times: positions (and
/// optionally velocities) of N particles in d dimensions, stored flat as
/// [q][snapshot][particle][axis].
class ParticleDataset {
 public:
  ParticleDataset() = default;
  ParticleDataset(int q, int m, int n, int d, std::vector<double> times);

  int ensembles() const { return q_; }
  int snapshots() const { return m_; }
  int particles() const { return n_; }
  int dim() const { return d_; }
  const std::vector<double>& times() const { return times_; }
  bool has_velocities() const { return !velocities_.empty(); }

  std::span<double> positions(int q, int i);
  std::span<const double> positions(int q, int i) const;
  std::span<double> velocities(int q, int i);
  std::span<const double> velocities(int q, int i) const;

  /// Allocates (zero-filled) velocity storage matching the positions.
  void allocate_velocities();

  /// Index of the snapshot whose time matches t within tol; throws if none.
  int snapshot_index(double t, double tol = 1e-9) const;

  void check_finite() const;  // throws DivergenceError naming (q, snapshot)

  const std::vector<double>& raw_positions() const { return positions_; }
  const std::vector<double>& raw_velocities() const { return velocities_; }

  /// Provenance (config echo, seeds); persisted verbatim in meta.json.
  nlohmann::json meta;

 private:
  std::size_t offset(int q, int i) const;
  int q_ = 0, m_ = 0, n_ = 0, d_ = 0;
  std::vector<double> times_;
  std::vector<double> positions_;
  std::vector<double> velocities_;
};

/// Writes dir/meta.json plus one CSV per (ensemble, snapshot) with columns
/// x_1..x_d[,v_1..v_d]; values are full-precision and round-trip bit-exactly.
void save_dataset(const ParticleDataset& ds, const std::string& dir);

/// Loads a dataset directory, validating shapes against meta.json.
ParticleDataset load_dataset(const std::string& dir);

}  // namespace edl
