// Command-line driver: declarative configs in, reproducible artifacts out.
//
//   edl run      --config configs/dw1d.cfg --out runs/dw1d
//   edl simulate --config configs/qw2d.cfg --out runs/qw2d_data
//   edl train    --config configs/qw2d.cfg --data runs/qw2d_data/dataset --out runs/qw2d
//   edl evaluate --config configs/qw2d.cfg --model runs/qw2d/checkpoints/final.json --out runs/qw2d
//   edl compare  runs/a runs/b --out comparison.csv

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "edl/errors.hpp"
#include "edl/parallel.hpp"
#include "edl/pipeline.hpp"
#include "edl/simulate.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  long long seed = -1;
  int threads = 0;
  bool fast = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
  cmd->add_option("--config", args.config_path, "experiment config file")
      ->required(config_required);
  cmd->add_option("--out", args.out_dir, "output directory (overrides out_dir)");
  cmd->add_option("--seed", args.seed, "seed override");
  cmd->add_option("--threads", args.threads, "worker threads (0 = hardware)");
  cmd->add_flag("--fast", args.fast,
                "allow non-deterministic parallel reductions");
  cmd->add_option("--set", args.overrides,
                  "extra key=value config overrides (repeatable)");
}

edl::ExperimentConfig resolve(const CommonArgs& args) {
  edl::ExperimentConfig cfg = edl::load_config_file(args.config_path);
  if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  if (args.threads > 0) cfg.threads = args.threads;
  if (args.fast) cfg.deterministic = false;
  for (const std::string& kv : args.overrides) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw edl::ConfigError("--set expects key=value, got '" + kv + "'");
    edl::apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  edl::runtime::set_threads(cfg.threads);
  edl::runtime::set_deterministic(cfg.deterministic);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Potential learning from particle snapshots via "
               "energy-dissipation residual minimization"};
  app.require_subcommand(1);

  CommonArgs run_args, sim_args, train_args, eval_args;
  std::string train_data, eval_model;
  std::vector<std::string> compare_dirs;
  std::string compare_out;

  CLI::App* cmd_run = app.add_subcommand("run", "full pipeline");
  add_common(cmd_run, run_args);

  CLI::App* cmd_sim = app.add_subcommand("simulate", "simulate + estimate velocities, save dataset");
  add_common(cmd_sim, sim_args);

  CLI::App* cmd_train = app.add_subcommand("train", "train on a saved dataset");
  add_common(cmd_train, train_args);
  cmd_train->add_option("--data", train_data, "dataset directory")->required();

  CLI::App* cmd_eval = app.add_subcommand("evaluate", "evaluate a saved model");
  add_common(cmd_eval, eval_args);
  cmd_eval->add_option("--model", eval_model, "model JSON checkpoint")->required();

  CLI::App* cmd_cmp = app.add_subcommand("compare", "tabulate completed runs");
  cmd_cmp->add_option("dirs", compare_dirs, "run directories");
  cmd_cmp->add_option("--out", compare_out, "output CSV path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed()) {
      const edl::ExperimentConfig cfg = resolve(run_args);
      const edl::PipelineResult res = edl::run_pipeline(cfg);
      std::cout << "run complete: " << res.out_dir << "\n"
                << "grad_error = " << res.metrics.at("grad_error").get<double>()
                << "\n";
      return res.diverged ? 2 : 0;
    }
    if (cmd_sim->parsed()) {
      const edl::ExperimentConfig cfg = resolve(sim_args);
      fs::create_directories(cfg.out_dir);
      edl::ParticleDataset ds = edl::build_dataset(cfg);
      edl::save_dataset(ds, cfg.out_dir + "/dataset");
      std::ofstream os(cfg.out_dir + "/meta.json");
      os << nlohmann::json{{"version", edl::kVersion},
                           {"config", cfg.to_json()},
                           {"stage", "simulate done"}}
                .dump(2)
         << "\n";
      std::cout << "dataset written to " << cfg.out_dir << "/dataset\n";
      return 0;
    }
    if (cmd_train->parsed()) {
      const edl::ExperimentConfig cfg = resolve(train_args);
      const edl::ParticleDataset ds = edl::load_dataset(train_data);
      const edl::TrainResult tr = edl::train_on_dataset(cfg, ds, cfg.out_dir);
      std::cout << "final loss = "
                << (tr.loss_history.empty() ? 0.0 : tr.loss_history.back())
                << (tr.diverged ? " (diverged)" : "") << "\n";
      return tr.diverged ? 2 : 0;
    }
    if (cmd_eval->parsed()) {
      const edl::ExperimentConfig cfg = resolve(eval_args);
      const auto model = edl::load_potential(eval_model);
      nlohmann::json metrics = edl::evaluate_model(cfg, *model, cfg.out_dir);
      metrics["benchmark"] = cfg.benchmark;
      std::ofstream os(cfg.out_dir + "/metrics.json");
      os << metrics.dump(2) << "\n";
      std::cout << "grad_error = " << metrics.at("grad_error").get<double>() << "\n";
      return 0;
    }
    if (cmd_cmp->parsed()) {
      const std::string table = edl::compare_runs(compare_dirs);
      if (compare_out.empty()) {
        std::cout << table;
      } else {
        std::ofstream os(compare_out);
        os << table;
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
