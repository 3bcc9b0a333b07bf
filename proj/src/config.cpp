#include "edl/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "edl/errors.hpp"

namespace edl {

namespace {

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " = '" + v + "' is not a number");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config: " + key + " = '" + v + "' is not an integer");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: " + key + " = '" + v + "' is not a boolean");
}

struct Field {
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define FIELD_STR(KEY, MEMBER)                                             \
  Field{KEY, [](ExperimentConfig& c, const std::string& v) { c.MEMBER = v; }, \
        [](const ExperimentConfig& c) { return c.MEMBER; }}
#define FIELD_DBL(KEY, MEMBER)                                     \
  Field{KEY,                                                       \
        [](ExperimentConfig& c, const std::string& v) {            \
          c.MEMBER = parse_double(KEY, v);                         \
        },                                                         \
        [](const ExperimentConfig& c) { return fmt_double(c.MEMBER); }}
#define FIELD_INT(KEY, MEMBER)                                        \
  Field{KEY,                                                          \
        [](ExperimentConfig& c, const std::string& v) {               \
          c.MEMBER = static_cast<decltype(c.MEMBER)>(parse_int(KEY, v)); \
        },                                                            \
        [](const ExperimentConfig& c) { return std::to_string(c.MEMBER); }}
#define FIELD_BOOL(KEY, MEMBER)                                    \
  Field{KEY,                                                       \
        [](ExperimentConfig& c, const std::string& v) {            \
          c.MEMBER = parse_bool(KEY, v);                           \
        },                                                         \
        [](const ExperimentConfig& c) {                            \
          return std::string(c.MEMBER ? "true" : "false");         \
        }}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      FIELD_STR("benchmark", benchmark),
      FIELD_STR("potential", potential),
      FIELD_STR("out_dir", out_dir),
      FIELD_INT("seed", seed),
      FIELD_INT("threads", threads),
      FIELD_BOOL("deterministic", deterministic),
      FIELD_BOOL("save_data", save_data),
      FIELD_DBL("sim.kbt", kbt),
      FIELD_DBL("sim.gamma", gamma),
      FIELD_DBL("sim.dt", dt),
      FIELD_INT("sim.n_particles", n_particles),
      FIELD_INT("sim.n_ensembles", n_ensembles),
      FIELD_DBL("sim.t_begin", t_begin),
      FIELD_DBL("sim.t_end", t_end),
      FIELD_INT("sim.n_snapshots", n_snapshots),
      FIELD_DBL("sim.init_std", init_std),
      FIELD_DBL("sim.init_box_lo", init_box_lo),
      FIELD_DBL("sim.init_box_hi", init_box_hi),
      FIELD_DBL("kernel.bandwidth", bandwidth),
      FIELD_STR("velocity.mode", velocity_mode),
      FIELD_DBL("velocity.ot_epsilon", ot_epsilon),
      FIELD_INT("velocity.ot_iters", ot_iters),
      FIELD_INT("velocity.exact_threshold", exact_threshold),
      FIELD_DBL("noise_sigma", noise_sigma),
      FIELD_DBL("env_lambda", env_lambda),
      FIELD_STR("loss.kind", loss_kind),
      FIELD_DBL("loss.alpha", alpha),
      FIELD_DBL("loss.window_tb", window_tb),
      FIELD_DBL("loss.window_te", window_te),
      FIELD_STR("loss.quadrature", quadrature),
      FIELD_INT("train.epochs", epochs),
      FIELD_DBL("train.lr", lr),
      FIELD_DBL("train.beta1", beta1),
      FIELD_DBL("train.beta2", beta2),
      FIELD_DBL("train.eps_adam", eps_adam),
      FIELD_INT("train.hidden", hidden),
      FIELD_INT("train.log_every", log_every),
      FIELD_DBL("eval.lo", eval_lo),
      FIELD_DBL("eval.hi", eval_hi),
      FIELD_INT("eval.grid_resolution", grid_resolution),
      FIELD_INT("eval.mc_samples", mc_samples),
      FIELD_INT("eval.export_resolution", export_resolution),
      FIELD_BOOL("eval.energy_rate", eval_energy_rate),
      FIELD_BOOL("eval.wasserstein", eval_wasserstein),
      FIELD_BOOL("eval.rho_eq_uses_kbt", rho_eq_uses_kbt),
      FIELD_INT("eval.ws_subsample", ws_subsample),
  };
  return f;
}

#undef FIELD_STR
#undef FIELD_DBL
#undef FIELD_INT
#undef FIELD_BOOL

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

int ExperimentConfig::dim() const {
  if (potential == "double_well_1d") return 1;
  if (potential == "quadruple_well_2d" || potential == "gaussian_mixture_2d") return 2;
  if (potential == "multimodal_3d") return 3;
  throw ConfigError("config: potential = '" + potential + "' is not a known kind");
}

std::vector<double> ExperimentConfig::snapshot_times() const {
  std::vector<double> t(static_cast<std::size_t>(n_snapshots));
  const double step = (t_end - t_begin) / (n_snapshots - 1);
  for (int i = 0; i < n_snapshots; ++i) t[static_cast<std::size_t>(i)] = t_begin + step * i;
  return t;
}

void ExperimentConfig::validate() const {
  if (benchmark != "dw1d" && benchmark != "qw2d" && benchmark != "gm2d_ot" &&
      benchmark != "mm3d" && benchmark != "perturbed1d") {
    throw ConfigError("config: benchmark = '" + benchmark + "' is not known");
  }
  const int d = dim();  // also validates the potential kind
  if (kbt < 0) throw ConfigError("config: sim.kbt must be >= 0");
  if (gamma <= 0) throw ConfigError("config: sim.gamma must be > 0");
  if (dt <= 0) throw ConfigError("config: sim.dt must be > 0");
  if (n_particles < 2) throw ConfigError("config: sim.n_particles must be >= 2");
  if (n_ensembles < 1) throw ConfigError("config: sim.n_ensembles must be >= 1");
  if (n_snapshots < 2) throw ConfigError("config: sim.n_snapshots must be >= 2");
  if (!(t_begin >= 0)) throw ConfigError("config: sim.t_begin must be >= 0");
  if (!(t_begin < t_end)) throw ConfigError("config: sim.t_begin must be < sim.t_end");
  if (init_std < 0) throw ConfigError("config: sim.init_std must be >= 0");
  if (init_box_hi < init_box_lo)
    throw ConfigError("config: sim.init_box_hi must be >= sim.init_box_lo");
  if (bandwidth <= 0) throw ConfigError("config: kernel.bandwidth must be > 0");
  if (velocity_mode != "force_balance" && velocity_mode != "optimal_transport")
    throw ConfigError("config: velocity.mode = '" + velocity_mode + "' is not known");
  if (ot_iters < 1) throw ConfigError("config: velocity.ot_iters must be >= 1");
  if (exact_threshold < 0)
    throw ConfigError("config: velocity.exact_threshold must be >= 0");
  if (noise_sigma < 0) throw ConfigError("config: noise_sigma must be >= 0");
  if (env_lambda != 0.0 && d != 1)
    throw ConfigError("config: env_lambda is only supported for 1d benchmarks");
  if (loss_kind != "energy_alpha" && loss_kind != "pde_velocity" &&
      loss_kind != "differential_form")
    throw ConfigError("config: loss.kind = '" + loss_kind + "' is not known");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw ConfigError("config: loss.alpha = " + fmt_double(alpha) +
                      " is outside [0, 1]");
  if (quadrature != "paper" && quadrature != "trapezoid")
    throw ConfigError("config: loss.quadrature = '" + quadrature + "' is not known");
  const auto times = snapshot_times();
  auto is_snapshot_time = [&](double t) {
    for (double s : times)
      if (std::abs(s - t) <= 1e-9) return true;
    return false;
  };
  if (!is_snapshot_time(window_tb))
    throw ConfigError("config: loss.window_tb must be one of the snapshot times");
  if (!is_snapshot_time(window_te))
    throw ConfigError("config: loss.window_te must be one of the snapshot times");
  if (!(window_tb < window_te))
    throw ConfigError("config: loss.window_tb must be < loss.window_te");
  if (epochs < 1) throw ConfigError("config: train.epochs must be >= 1");
  if (lr <= 0) throw ConfigError("config: train.lr must be > 0");
  if (hidden < 1) throw ConfigError("config: train.hidden must be >= 1");
  if (log_every < 1) throw ConfigError("config: train.log_every must be >= 1");
  if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("config: train.beta1 must lie in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("config: train.beta2 must lie in [0, 1)");
  if (eps_adam <= 0) throw ConfigError("config: train.eps_adam must be > 0");
  if (eval_hi <= eval_lo) throw ConfigError("config: eval.hi must be > eval.lo");
  if (grid_resolution < 2) throw ConfigError("config: eval.grid_resolution must be >= 2");
  if (mc_samples < 1) throw ConfigError("config: eval.mc_samples must be >= 1");
  if (export_resolution < 2)
    throw ConfigError("config: eval.export_resolution must be >= 2");
  if (ws_subsample < 1) throw ConfigError("config: eval.ws_subsample must be >= 1");
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  for (const Field& f : fields()) j[f.key] = f.get(*this);
  return j;
}

bool ExperimentConfig::operator==(const ExperimentConfig& other) const {
  return to_json() == other.to_json();
}

ExperimentConfig default_config(const std::string& benchmark) {
  ExperimentConfig c;
  c.benchmark = benchmark;
  if (benchmark == "dw1d") {
    c.potential = "double_well_1d";
    c.n_particles = 2000;
    c.n_ensembles = 5;
    c.init_std = 0.5;
    c.grid_resolution = 2001;
    c.export_resolution = 401;
  } else if (benchmark == "qw2d") {
    c.potential = "quadruple_well_2d";
    c.n_particles = 10000;
    c.n_ensembles = 5;
    c.init_std = 0.5;
    c.grid_resolution = 201;
    c.export_resolution = 201;
  } else if (benchmark == "gm2d_ot") {
    c.potential = "gaussian_mixture_2d";
    c.n_particles = 2000;
    c.n_ensembles = 5;
    c.init_std = 0.5;
    c.velocity_mode = "optimal_transport";
    c.noise_sigma = 0.2;
    c.grid_resolution = 201;
    c.export_resolution = 201;
  } else if (benchmark == "mm3d") {
    c.potential = "multimodal_3d";
    c.n_particles = 10000;
    c.n_ensembles = 10;
    c.init_std = 0.1;
    c.noise_sigma = 0.2;
    c.grid_resolution = 201;  // unused for d=3; importance sampling instead
    c.export_resolution = 41;
    c.eval_energy_rate = true;
    c.eval_wasserstein = true;
  } else if (benchmark == "perturbed1d") {
    c.potential = "double_well_1d";
    c.n_particles = 10000;
    c.n_ensembles = 5;
    c.init_std = 0.1;
    c.env_lambda = 0.8;
    c.grid_resolution = 2001;
    c.export_resolution = 401;
  } else {
    throw ConfigError("config: benchmark = '" + benchmark + "' is not known");
  }
  return c;
}

void apply_override(ExperimentConfig& cfg, const std::string& key,
                    const std::string& value) {
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(cfg, value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<std::pair<std::string, std::string>> entries;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(line_no) +
                        " is not of the form key = value");
    entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  std::string benchmark = "dw1d";
  for (const auto& [k, v] : entries)
    if (k == "benchmark") benchmark = v;
  ExperimentConfig cfg = default_config(benchmark);
  for (const auto& [k, v] : entries) {
    if (k == "benchmark") continue;
    apply_override(cfg, k, v);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_config_text(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  for (const Field& f : fields()) os << f.key << " = " << f.get(cfg) << "\n";
  return os.str();
}

}  // namespace edl
