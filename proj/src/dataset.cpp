#include "edl/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "edl/errors.hpp"

namespace fs = std::filesystem;

namespace edl {

int SimConfig::dim() const {
  return init_means.empty() ? 0 : static_cast<int>(init_means.front().size());
}

void SimConfig::validate() const {
  if (kbt < 0) throw ConfigError("sim.kbt must be >= 0");
  if (gamma <= 0) throw ConfigError("sim.gamma must be > 0");
  if (dt <= 0) throw ConfigError("sim.dt must be > 0");
  if (n_particles < 2) throw ConfigError("sim.n_particles must be >= 2");
  if (n_ensembles < 1) throw ConfigError("sim.n_ensembles must be >= 1");
  if (init_std < 0) throw ConfigError("sim.init_std must be >= 0");
  if (snapshot_times.empty()) throw ConfigError("sim.snapshot_times must be non-empty");
  if (static_cast<int>(init_means.size()) != n_ensembles)
    throw ConfigError("sim.init_means must list one mean per ensemble");
  const int d = dim();
  if (d < 1) throw ConfigError("sim.init_means entries must be non-empty points");
  for (const auto& m : init_means) {
    if (static_cast<int>(m.size()) != d)
      throw ConfigError("sim.init_means entries must share one dimension");
  }
  double prev = -1.0;
  for (double t : snapshot_times) {
    if (t < 0) throw ConfigError("sim.snapshot_times must be >= 0");
    if (t <= prev) throw ConfigError("sim.snapshot_times must be strictly increasing");
    const double steps = t / dt;
    if (std::abs(steps - std::llround(steps)) > 1e-12 * std::max(1.0, steps)) {
      throw ConfigError("sim.snapshot_times entries must be integer multiples of sim.dt");
    }
    prev = t;
  }
}

nlohmann::json SimConfig::to_json() const {
  return {{"kbt", kbt},
          {"gamma", gamma},
          {"dt", dt},
          {"snapshot_times", snapshot_times},
          {"n_particles", n_particles},
          {"n_ensembles", n_ensembles},
          {"init_means", init_means},
          {"init_std", init_std},
          {"seed", seed}};
}

SimConfig SimConfig::from_json(const nlohmann::json& j) {
  SimConfig c;
  c.kbt = j.at("kbt").get<double>();
  c.gamma = j.at("gamma").get<double>();
  c.dt = j.at("dt").get<double>();
  c.snapshot_times = j.at("snapshot_times").get<std::vector<double>>();
  c.n_particles = j.at("n_particles").get<int>();
  c.n_ensembles = j.at("n_ensembles").get<int>();
  c.init_means = j.at("init_means").get<std::vector<std::vector<double>>>();
  c.init_std = j.at("init_std").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

// ---------------------------------------------------------------------------

ParticleDataset::ParticleDataset(int q, int m, int n, int d,
                                 std::vector<double> times)
    : q_(q), m_(m), n_(n), d_(d), times_(std::move(times)) {
  if (q < 1 || m < 1 || n < 1 || d < 1)
    throw Error("ParticleDataset: all shape parameters must be >= 1");
  if (static_cast<int>(times_.size()) != m_)
    throw Error("ParticleDataset: times must have one entry per snapshot");
  positions_.assign(static_cast<std::size_t>(q) * m * n * d, 0.0);
}

std::size_t ParticleDataset::offset(int q, int i) const {
  if (q < 0 || q >= q_ || i < 0 || i >= m_)
    throw Error("ParticleDataset: snapshot index out of range");
  return (static_cast<std::size_t>(q) * m_ + i) * n_ * d_;
}

std::span<double> ParticleDataset::positions(int q, int i) {
  return {positions_.data() + offset(q, i), static_cast<std::size_t>(n_) * d_};
}

std::span<const double> ParticleDataset::positions(int q, int i) const {
  return {positions_.data() + offset(q, i), static_cast<std::size_t>(n_) * d_};
}

std::span<double> ParticleDataset::velocities(int q, int i) {
  if (!has_velocities()) throw Error("ParticleDataset: velocities not present");
  return {velocities_.data() + offset(q, i), static_cast<std::size_t>(n_) * d_};
}

std::span<const double> ParticleDataset::velocities(int q, int i) const {
  if (!has_velocities()) throw Error("ParticleDataset: velocities not present");
  return {velocities_.data() + offset(q, i), static_cast<std::size_t>(n_) * d_};
}

void ParticleDataset::allocate_velocities() {
  velocities_.assign(positions_.size(), 0.0);
}

int ParticleDataset::snapshot_index(double t, double tol) const {
  for (int i = 0; i < m_; ++i) {
    if (std::abs(times_[i] - t) <= tol) return i;
  }
  throw Error("ParticleDataset: no snapshot at t=" + std::to_string(t));
}

void ParticleDataset::check_finite() const {
  for (int q = 0; q < q_; ++q) {
    for (int i = 0; i < m_; ++i) {
      const auto p = positions(q, i);
      for (double v : p) {
        if (!std::isfinite(v)) {
          throw DivergenceError("non-finite position in ensemble " +
                                std::to_string(q) + ", snapshot " +
                                std::to_string(i));
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// On-disk layout: meta.json + q####_s##.csv

namespace {

std::string shard_name(int q, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "q%04d_s%02d.csv", q, i);
  return buf;
}

void write_shard(const std::string& path, std::span<const double> pos,
                 std::span<const double> vel, int n, int d) {
  std::ofstream os(path);
  if (!os) throw Error("save_dataset: cannot open " + path);
  for (int k = 0; k < d; ++k) os << (k ? "," : "") << "x" << (k + 1);
  if (!vel.empty())
    for (int k = 0; k < d; ++k) os << ",v" << (k + 1);
  os << "\n";
  char buf[32];
  for (int j = 0; j < n; ++j) {
    for (int k = 0; k < d; ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", pos[static_cast<std::size_t>(j) * d + k]);
      os << (k ? "," : "") << buf;
    }
    if (!vel.empty()) {
      for (int k = 0; k < d; ++k) {
        std::snprintf(buf, sizeof(buf), "%.17g", vel[static_cast<std::size_t>(j) * d + k]);
        os << "," << buf;
      }
    }
    os << "\n";
  }
}

}  // namespace

void save_dataset(const ParticleDataset& ds, const std::string& dir) {
  fs::create_directories(dir);
  nlohmann::json meta = {{"schema", "edl-dataset-v1"},
                         {"dim", ds.dim()},
                         {"ensembles", ds.ensembles()},
                         {"snapshots", ds.snapshots()},
                         {"particles", ds.particles()},
                         {"times", ds.times()},
                         {"has_velocities", ds.has_velocities()},
                         {"provenance", ds.meta}};
  {
    std::ofstream os(dir + "/meta.json");
    if (!os) throw Error("save_dataset: cannot open " + dir + "/meta.json");
    os << meta.dump(2) << "\n";
  }
  for (int q = 0; q < ds.ensembles(); ++q) {
    for (int i = 0; i < ds.snapshots(); ++i) {
      write_shard(dir + "/" + shard_name(q, i), ds.positions(q, i),
                  ds.has_velocities() ? ds.velocities(q, i)
                                      : std::span<const double>{},
                  ds.particles(), ds.dim());
    }
  }
}

ParticleDataset load_dataset(const std::string& dir) {
  nlohmann::json meta;
  {
    std::ifstream is(dir + "/meta.json");
    if (!is) throw Error("load_dataset: cannot open " + dir + "/meta.json");
    is >> meta;
  }
  const int d = meta.at("dim").get<int>();
  const int q = meta.at("ensembles").get<int>();
  const int m = meta.at("snapshots").get<int>();
  const int n = meta.at("particles").get<int>();
  const bool has_vel = meta.at("has_velocities").get<bool>();
  ParticleDataset ds(q, m, n, d, meta.at("times").get<std::vector<double>>());
  if (meta.contains("provenance")) ds.meta = meta.at("provenance");
  if (has_vel) ds.allocate_velocities();

  for (int qi = 0; qi < q; ++qi) {
    for (int si = 0; si < m; ++si) {
      const std::string path = dir + "/" + shard_name(qi, si);
      std::ifstream is(path);
      if (!is) throw Error("load_dataset: missing shard " + path);
      std::string line;
      if (!std::getline(is, line)) throw Error("load_dataset: empty shard " + path);
      auto pos = ds.positions(qi, si);
      std::span<double> vel;
      if (has_vel) vel = ds.velocities(qi, si);
      int row = 0;
      while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (row >= n) throw Error("load_dataset: too many rows in " + path);
        const char* p = line.c_str();
        char* end = nullptr;
        const int cols = has_vel ? 2 * d : d;
        for (int c = 0; c < cols; ++c) {
          const double val = std::strtod(p, &end);
          if (end == p) throw Error("load_dataset: bad value in " + path);
          if (c < d) {
            pos[static_cast<std::size_t>(row) * d + c] = val;
          } else {
            vel[static_cast<std::size_t>(row) * d + (c - d)] = val;
          }
          p = end;
          if (*p == ',') ++p;
        }
        ++row;
      }
      if (row != n) {
        throw Error("load_dataset: shard " + path + " has " + std::to_string(row) +
                    " rows, expected " + std::to_string(n));
      }
    }
  }
  return ds;
}

}  // namespace edl
