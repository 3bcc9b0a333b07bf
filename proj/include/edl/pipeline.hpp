#pragma once

#include <string>
#include <vector>

#include "edl/config.hpp"
#include "edl/dataset.hpp"
#include "edl/train.hpp"

namespace edl {

inline constexpr const char* kVersion = "0.1.0";

/// Simulates the configured benchmark, estimates velocities when the selected
/// loss needs them, and applies the configured corruption:
///  - force-balance velocities are computed from the clean trajectories, then
///    observation noise perturbs positions and velocities together;
///  - transport-estimated velocities are computed after the positions have
///    been perturbed (they are derived from observations, not observed).
/// The environmental field, when enabled, perturbs velocities last.
ParticleDataset build_dataset(const ExperimentConfig& cfg);

/// Trains the neural potential on ds, writing checkpoints/ and train_log.csv
/// under artifacts_dir when it is non-empty.
TrainResult train_on_dataset(const ExperimentConfig& cfg,
                             const ParticleDataset& ds,
                             const std::string& artifacts_dir = "");

/// Evaluation stage: weighted gradient error, lattice export, and (when
/// enabled) matched re-simulations under the true and learned potentials for
/// energy-rate and Wasserstein series. Returns the metrics fragment and
/// writes CSV exports under artifacts_dir when non-empty.
nlohmann::json evaluate_model(const ExperimentConfig& cfg,
                              const Potential& learned,
                              const std::string& artifacts_dir = "");

struct PipelineResult {
  std::string out_dir;
  nlohmann::json metrics;
  bool diverged = false;
};

/// Full simulate -> estimate -> train -> evaluate pipeline. All artifacts
/// (meta.json, dataset/, checkpoints/, train_log.csv, metrics.json, CSV
/// exports) land in cfg.out_dir; a failing stage still leaves the artifacts
/// produced so far plus the stage name in meta.json.
PipelineResult run_pipeline(const ExperimentConfig& cfg);

/// Comparison table over completed run directories, sorted by grad_error.
/// Columns: run, alpha, loss_kind, q, sigma, window_tb, window_te,
/// grad_error, final_loss.
std::string compare_runs(const std::vector<std::string>& run_dirs);

}  // namespace edl
