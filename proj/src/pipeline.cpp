#include "edl/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "edl/errors.hpp"
#include "edl/evaluate.hpp"
#include "edl/parallel.hpp"
#include "edl/rng.hpp"
#include "edl/simulate.hpp"
#include "edl/velocity.hpp"

namespace fs = std::filesystem;

namespace edl {

namespace {

bool needs_velocities(const ExperimentConfig& cfg) {
  if (cfg.loss_kind == "pde_velocity") return true;
  if (cfg.loss_kind == "energy_alpha" && cfg.alpha < 1.0) return true;
  return cfg.env_lambda != 0.0;
}

SimConfig sim_config_for(const ExperimentConfig& cfg) {
  SimConfig sc;
  sc.kbt = cfg.kbt;
  sc.gamma = cfg.gamma;
  sc.dt = cfg.dt;
  sc.snapshot_times = cfg.snapshot_times();
  sc.n_particles = cfg.n_particles;
  sc.n_ensembles = cfg.n_ensembles;
  const int d = cfg.dim();
  sc.init_means = sample_initial_means(
      cfg.n_ensembles, std::vector<double>(d, cfg.init_box_lo),
      std::vector<double>(d, cfg.init_box_hi), cfg.seed);
  sc.init_std = cfg.init_std;
  sc.seed = cfg.seed;
  return sc;
}

VelocitySource velocity_source_for(const ExperimentConfig& cfg) {
  VelocitySource vs;
  vs.mode = cfg.velocity_mode == "optimal_transport"
                ? VelocitySource::Mode::OptimalTransport
                : VelocitySource::Mode::ForceBalance;
  vs.ot_epsilon = cfg.ot_epsilon;
  vs.ot_iters = cfg.ot_iters;
  vs.exact_threshold = cfg.exact_threshold;
  return vs;
}

TrainConfig train_config_for(const ExperimentConfig& cfg) {
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.lr = cfg.lr;
  tc.beta1 = cfg.beta1;
  tc.beta2 = cfg.beta2;
  tc.eps_adam = cfg.eps_adam;
  tc.seed = cfg.seed;
  tc.hidden = cfg.hidden;
  if (cfg.loss_kind == "energy_alpha") tc.loss_kind = LossKind::EnergyAlpha;
  else if (cfg.loss_kind == "pde_velocity") tc.loss_kind = LossKind::PdeVelocity;
  else tc.loss_kind = LossKind::DifferentialForm;
  tc.loss.alpha = cfg.alpha;
  tc.loss.kbt = cfg.kbt;
  tc.loss.window_begin = cfg.window_tb;
  tc.loss.window_end = cfg.window_te;
  tc.loss.quadrature = cfg.quadrature == "trapezoid" ? Quadrature::Trapezoid
                                                     : Quadrature::PaperLiteral;
  tc.log_every = cfg.log_every;
  return tc;
}

}  // namespace

ParticleDataset build_dataset(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto truth = make_benchmark_potential(cfg.potential);
  const SimConfig sc = sim_config_for(cfg);
  ParticleDataset ds = simulate(*truth, sc);
  const KernelConfig kc{cfg.bandwidth, cfg.dim()};

  if (needs_velocities(cfg)) {
    const VelocitySource vs = velocity_source_for(cfg);
    if (vs.mode == VelocitySource::Mode::ForceBalance) {
      force_balance_velocities(ds, *truth, kc, cfg.kbt);
      if (cfg.noise_sigma > 0)
        ds = add_observation_noise(ds, cfg.noise_sigma, cfg.seed);
    } else {
      if (cfg.noise_sigma > 0)
        ds = add_observation_noise(ds, cfg.noise_sigma, cfg.seed);
      estimate_ot_velocities(ds, vs);
    }
    if (cfg.env_lambda != 0.0) apply_environment_sine(ds, cfg.env_lambda);
  } else if (cfg.noise_sigma > 0) {
    ds = add_observation_noise(ds, cfg.noise_sigma, cfg.seed);
  }
  return ds;
}

TrainResult train_on_dataset(const ExperimentConfig& cfg,
                             const ParticleDataset& ds,
                             const std::string& artifacts_dir) {
  const KernelConfig kc{cfg.bandwidth, cfg.dim()};
  const TrainConfig tc = train_config_for(cfg);
  NeuralPotential init =
      NeuralPotential::random_init(cfg.dim(), cfg.hidden, cfg.seed);

  std::ofstream log;
  std::string ckpt_dir;
  const auto t0 = std::chrono::steady_clock::now();
  std::function<void(int, const NeuralPotential&, double)> callback;
  if (!artifacts_dir.empty()) {
    fs::create_directories(artifacts_dir);
    ckpt_dir = artifacts_dir + "/checkpoints";
    fs::create_directories(ckpt_dir);
    log.open(artifacts_dir + "/train_log.csv");
    log << "epoch,loss,wall_time_s\n";
    callback = [&, ckpt_dir](int epoch, const NeuralPotential& model, double loss) {
      if (epoch % tc.log_every == 0 || epoch == tc.epochs - 1) {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.3f\n", epoch, loss, wall);
        log << buf;
        log.flush();
        char name[64];
        std::snprintf(name, sizeof(name), "/epoch_%06d.json", epoch);
        save_potential(model, ckpt_dir + name);
      }
    };
  }

  TrainResult res = train(ds, kc, std::move(init), tc, callback);
  if (!artifacts_dir.empty()) {
    save_potential(res.model, ckpt_dir + "/final.json");
  }
  return res;
}

nlohmann::json evaluate_model(const ExperimentConfig& cfg,
                              const Potential& learned,
                              const std::string& artifacts_dir) {
  const auto truth = make_benchmark_potential(cfg.potential);
  const int d = cfg.dim();
  const KernelConfig kc{cfg.bandwidth, d};

  GradErrorOptions gopt;
  gopt.lo.assign(static_cast<std::size_t>(d), cfg.eval_lo);
  gopt.hi.assign(static_cast<std::size_t>(d), cfg.eval_hi);
  gopt.grid_resolution = cfg.grid_resolution;
  gopt.mc_samples = cfg.mc_samples;
  gopt.seed = cfg.seed;
  gopt.rho_eq_uses_kbt = cfg.rho_eq_uses_kbt;
  gopt.kbt = cfg.kbt;

  nlohmann::json metrics;
  metrics["grad_error"] = weighted_grad_error(learned, *truth, gopt);

  if (!artifacts_dir.empty()) {
    fs::create_directories(artifacts_dir);
    const GridExport grid = export_grid(
        learned, *truth, std::vector<double>(static_cast<std::size_t>(d), cfg.eval_lo),
        std::vector<double>(static_cast<std::size_t>(d), cfg.eval_hi),
        cfg.export_resolution);
    write_grid_csv(grid, artifacts_dir + "/grid_export.csv");
  }

  if (cfg.eval_energy_rate || cfg.eval_wasserstein) {
    // Matched re-simulations: identical seeds give both potentials the same
    // initial particles and noise increments.
    SimConfig rc;
    rc.kbt = cfg.kbt;
    rc.gamma = cfg.gamma;
    rc.dt = cfg.dt;
    const double step = (cfg.t_end - cfg.t_begin) / (cfg.n_snapshots - 1);
    for (double t = 0.0; t <= cfg.t_end + 1e-9; t += step)
      rc.snapshot_times.push_back(t);
    rc.n_particles = cfg.n_particles;
    rc.n_ensembles = 1;
    rc.init_means = {std::vector<double>(static_cast<std::size_t>(d), 0.0)};
    rc.init_std = cfg.init_std;
    rc.seed = stream_key(cfg.seed, stream_tag::kEval, 7);
    const ParticleDataset ds_true = simulate(*truth, rc);
    const ParticleDataset ds_learned = simulate(learned, rc);
    const int m = ds_true.snapshots();
    const std::size_t n = static_cast<std::size_t>(rc.n_particles);

    std::vector<double> e_true(static_cast<std::size_t>(m));
    std::vector<double> e_learned(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
      e_true[static_cast<std::size_t>(i)] =
          discrete_energy(ds_true.positions(0, i), n, *truth, kc, cfg.kbt);
      e_learned[static_cast<std::size_t>(i)] =
          discrete_energy(ds_learned.positions(0, i), n, learned, kc, cfg.kbt);
    }

    if (cfg.eval_energy_rate) {
      double max_rel = 0.0;
      nlohmann::json series = nlohmann::json::array();
      std::ofstream os;
      if (!artifacts_dir.empty()) {
        os.open(artifacts_dir + "/energy_rate.csv");
        os << "time,rate_true,rate_learned\n";
      }
      for (int i = 1; i + 1 < m; ++i) {
        const double dt2 = rc.snapshot_times[static_cast<std::size_t>(i) + 1] -
                           rc.snapshot_times[static_cast<std::size_t>(i) - 1];
        const double rt = (e_true[static_cast<std::size_t>(i) + 1] -
                           e_true[static_cast<std::size_t>(i) - 1]) / dt2;
        const double rl = (e_learned[static_cast<std::size_t>(i) + 1] -
                           e_learned[static_cast<std::size_t>(i) - 1]) / dt2;
        const double rel = std::abs(rl - rt) / std::abs(rt);
        max_rel = std::max(max_rel, rel);
        series.push_back({{"time", rc.snapshot_times[static_cast<std::size_t>(i)]},
                          {"rate_true", rt},
                          {"rate_learned", rl}});
        if (os.is_open()) {
          char buf[128];
          std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n",
                        rc.snapshot_times[static_cast<std::size_t>(i)], rt, rl);
          os << buf;
        }
      }
      metrics["energy_rate_max_rel_diff"] = max_rel;
      metrics["energy_rate"] = series;
    }

    if (cfg.eval_wasserstein) {
      W2Options wopt;
      wopt.max_subsample = cfg.ws_subsample;
      wopt.seed = cfg.seed;
      nlohmann::json series = nlohmann::json::array();
      std::ofstream os;
      if (!artifacts_dir.empty()) {
        os.open(artifacts_dir + "/wasserstein.csv");
        os << "time,w2\n";
      }
      for (int i = 0; i < m; ++i) {
        const double w = wasserstein2(ds_learned.positions(0, i), n,
                                      ds_true.positions(0, i), n, d, wopt);
        series.push_back(
            {{"time", rc.snapshot_times[static_cast<std::size_t>(i)]}, {"w2", w}});
        if (os.is_open()) {
          char buf[64];
          std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n",
                        rc.snapshot_times[static_cast<std::size_t>(i)], w);
          os << buf;
        }
      }
      metrics["wasserstein"] = series;
    }
  }
  return metrics;
}

PipelineResult run_pipeline(const ExperimentConfig& cfg) {
  cfg.validate();
  runtime::set_threads(cfg.threads);
  runtime::set_deterministic(cfg.deterministic);
  fs::create_directories(cfg.out_dir);

  nlohmann::json meta = {{"version", kVersion},
                         {"config", cfg.to_json()},
                         {"seed", cfg.seed},
                         {"stage", "start"}};
  auto write_meta = [&] {
    std::ofstream os(cfg.out_dir + "/meta.json");
    os << meta.dump(2) << "\n";
  };
  write_meta();

  std::string stage = "simulate";
  try {
    ParticleDataset ds = build_dataset(cfg);
    meta["stage"] = "simulate+velocity done";
    write_meta();
    if (cfg.save_data) save_dataset(ds, cfg.out_dir + "/dataset");

    stage = "train";
    TrainResult tr = train_on_dataset(cfg, ds, cfg.out_dir);
    meta["stage"] = "train done";
    meta["diverged"] = tr.diverged;
    write_meta();

    stage = "evaluate";
    nlohmann::json metrics = evaluate_model(cfg, tr.model, cfg.out_dir);
    metrics["benchmark"] = cfg.benchmark;
    metrics["loss_kind"] = cfg.loss_kind;
    metrics["alpha"] = cfg.alpha;
    metrics["n_ensembles"] = cfg.n_ensembles;
    metrics["n_particles"] = cfg.n_particles;
    metrics["noise_sigma"] = cfg.noise_sigma;
    metrics["env_lambda"] = cfg.env_lambda;
    metrics["window"] = {cfg.window_tb, cfg.window_te};
    metrics["final_loss"] =
        tr.loss_history.empty() ? std::numeric_limits<double>::quiet_NaN()
                                : tr.loss_history.back();
    metrics["epochs_run"] = static_cast<int>(tr.loss_history.size());
    metrics["diverged"] = tr.diverged;
    {
      std::ofstream os(cfg.out_dir + "/metrics.json");
      os << metrics.dump(2) << "\n";
    }
    meta["stage"] = "done";
    write_meta();
    return {cfg.out_dir, metrics, tr.diverged};
  } catch (const std::exception& e) {
    meta["stage"] = "failed: " + stage;
    meta["error"] = e.what();
    write_meta();
    throw Error("pipeline stage '" + stage + "' failed: " + e.what());
  }
}

std::string compare_runs(const std::vector<std::string>& run_dirs) {
  if (run_dirs.size() < 2)
    throw ConfigError("compare: need at least two run directories");
  struct Row {
    std::string run;
    double alpha, sigma, tb, te, grad_error, final_loss;
    std::string kind;
    int q;
  };
  std::vector<Row> rows;
  for (const std::string& dir : run_dirs) {
    std::ifstream is(dir + "/metrics.json");
    if (!is) throw Error("compare: missing " + dir + "/metrics.json");
    nlohmann::json m;
    is >> m;
    rows.push_back({fs::path(dir).filename().string(),
                    m.at("alpha").get<double>(),
                    m.at("noise_sigma").get<double>(),
                    m.at("window")[0].get<double>(),
                    m.at("window")[1].get<double>(),
                    m.at("grad_error").get<double>(),
                    m.at("final_loss").get<double>(),
                    m.at("loss_kind").get<std::string>(),
                    m.at("n_ensembles").get<int>()});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.grad_error < b.grad_error; });
  std::string out =
      "run,alpha,loss_kind,q,sigma,window_tb,window_te,grad_error,final_loss\n";
  char buf[256];
  for (const Row& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  r.run.c_str(), r.alpha, r.kind.c_str(), r.q, r.sigma, r.tb,
                  r.te, r.grad_error, r.final_loss);
    out += buf;
  }
  return out;
}

}  // namespace edl
