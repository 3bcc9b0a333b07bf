#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace edl {

/// Fully resolved experiment description. Benchmarks provide defaults; any
/// field can be overridden from the flat key=value config text.
struct ExperimentConfig {
  std::string benchmark = "dw1d";  // dw1d | qw2d | gm2d_ot | mm3d | perturbed1d
  std::string potential;           // true potential kind (benchmark default)
  std::string out_dir = "runs/out";
  std::uint64_t seed = 1;
  int threads = 0;             // 0 = hardware
  bool deterministic = true;
  bool save_data = true;

  // simulation
  double kbt = 0.125;
  double gamma = 1.0;
  double dt = 1e-3;
  int n_particles = 2000;
  int n_ensembles = 5;
  double t_begin = 0.3;
  double t_end = 0.8;
  int n_snapshots = 6;
  double init_std = 0.5;
  double init_box_lo = -2.0;
  double init_box_hi = 2.0;

  // kernel
  double bandwidth = 0.05;

  // velocity estimation
  std::string velocity_mode = "force_balance";  // or optimal_transport
  double ot_epsilon = 0.0;                      // <= 0: auto
  int ot_iters = 20000;
  int exact_threshold = 64;

  // data corruption
  double noise_sigma = 0.0;
  double env_lambda = 0.0;

  // loss
  std::string loss_kind = "energy_alpha";  // pde_velocity | differential_form
  double alpha = 0.5;
  double window_tb = 0.3;
  double window_te = 0.8;
  std::string quadrature = "paper";  // paper | trapezoid

  // training
  int epochs = 5000;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  int hidden = 64;
  int log_every = 500;

  // evaluation
  double eval_lo = -2.0;
  double eval_hi = 2.0;
  int grid_resolution = 2001;
  long mc_samples = 200000;
  int export_resolution = 401;
  bool eval_energy_rate = false;
  bool eval_wasserstein = false;
  bool rho_eq_uses_kbt = false;
  int ws_subsample = 2000;

  int dim() const;
  std::vector<double> snapshot_times() const;
  void validate() const;

  nlohmann::json to_json() const;
  bool operator==(const ExperimentConfig& other) const;
};

/// Benchmark presets mirroring the reference experiment settings.
ExperimentConfig default_config(const std::string& benchmark);

/// Parses flat "key = value" text ('#' comments). The benchmark key is applied
/// first to pick defaults; remaining keys override individual fields. Unknown
/// keys are errors naming the key.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

/// Canonical text form; parse(serialize(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

/// Applies "key=value" overrides (e.g. from the command line).
void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value);

}  // namespace edl
