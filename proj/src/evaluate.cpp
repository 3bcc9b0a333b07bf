#include "edl/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "edl/errors.hpp"
#include "edl/loss.hpp"
#include "edl/parallel.hpp"
#include "edl/rng.hpp"
#include "edl/simulate.hpp"
#include "edl/transport.hpp"

namespace edl {

GradErrorOptions GradErrorOptions::defaults(int d) {
  GradErrorOptions o;
  o.lo.assign(static_cast<std::size_t>(d), -2.0);
  o.hi.assign(static_cast<std::size_t>(d), 2.0);
  return o;
}

namespace {

struct GradErrAccum {
  double num = 0.0;    // sum w |grad_L - grad_T|^2
  double den = 0.0;    // sum w |grad_T|^2
  double wsum = 0.0;
};

void accumulate_point(const Potential& learned, const Potential& truth,
                      const double* x, int d, bool use_kbt, double kbt,
                      GradErrAccum& acc) {
  const std::span<const double> xs(x, static_cast<std::size_t>(d));
  double gl[8], gt[8];
  learned.gradient(xs, std::span<double>(gl, d));
  truth.gradient(xs, std::span<double>(gt, d));
  double w = -truth.value(xs);
  if (use_kbt) w /= kbt;
  w = std::exp(w);
  double diff2 = 0.0, t2 = 0.0;
  for (int k = 0; k < d; ++k) {
    const double u = gl[k] - gt[k];
    diff2 += u * u;
    t2 += gt[k] * gt[k];
  }
  acc.num += w * diff2;
  acc.den += w * t2;
  acc.wsum += w;
}

}  // namespace

double weighted_grad_error(const Potential& learned, const Potential& truth,
                           const GradErrorOptions& opt) {
  const int d = truth.dim();
  if (learned.dim() != d)
    throw Error("weighted_grad_error: potential dimensions differ");
  if (opt.lo.size() != static_cast<std::size_t>(d) ||
      opt.hi.size() != static_cast<std::size_t>(d))
    throw Error("weighted_grad_error: box bounds do not match dimension");
  if (d > 8) throw Error("weighted_grad_error: dimensions above 8 unsupported");

  GradErrAccum acc;
  if (d <= 2) {
    // Deterministic tensor-grid quadrature; the common lattice weight cancels
    // in the ratio.
    const int r = std::max(2, opt.grid_resolution);
    const std::size_t total = d == 1 ? static_cast<std::size_t>(r)
                                     : static_cast<std::size_t>(r) * r;
    acc = parallel_reduce_blocks<GradErrAccum>(
        total, 1024, GradErrAccum{},
        [&](std::size_t, std::size_t lo_i, std::size_t hi_i) {
          GradErrAccum a;
          for (std::size_t idx = lo_i; idx < hi_i; ++idx) {
            double x[2];
            if (d == 1) {
              x[0] = opt.lo[0] + (opt.hi[0] - opt.lo[0]) *
                                     static_cast<double>(idx) / (r - 1);
            } else {
              const int ix = static_cast<int>(idx) / r;
              const int iy = static_cast<int>(idx) % r;
              x[0] = opt.lo[0] + (opt.hi[0] - opt.lo[0]) * ix / (r - 1);
              x[1] = opt.lo[1] + (opt.hi[1] - opt.lo[1]) * iy / (r - 1);
            }
            accumulate_point(learned, truth, x, d, opt.rho_eq_uses_kbt, opt.kbt, a);
          }
          return a;
        },
        [](GradErrAccum& s, GradErrAccum v) {
          s.num += v.num;
          s.den += v.den;
          s.wsum += v.wsum;
        });
  } else {
    // Self-normalized importance sampling from the uniform proposal on the
    // box; the normalizer cancels in the ratio.
    const long n = std::max(1L, opt.mc_samples);
    acc = parallel_reduce_blocks<GradErrAccum>(
        static_cast<std::size_t>(n), 4096, GradErrAccum{},
        [&](std::size_t, std::size_t lo_i, std::size_t hi_i) {
          GradErrAccum a;
          double x[8];
          for (std::size_t s = lo_i; s < hi_i; ++s) {
            Rng rng(stream_key(opt.seed, stream_tag::kEval, s));
            for (int k = 0; k < d; ++k) x[k] = rng.uniform(opt.lo[k], opt.hi[k]);
            accumulate_point(learned, truth, x, d, opt.rho_eq_uses_kbt, opt.kbt, a);
          }
          return a;
        },
        [](GradErrAccum& s, GradErrAccum v) {
          s.num += v.num;
          s.den += v.den;
          s.wsum += v.wsum;
        });
  }
  if (!(acc.wsum > 0.0) || !(acc.den > 0.0))
    throw Error("weighted_grad_error: degenerate equilibrium normalizer");
  return std::sqrt(acc.num) / std::sqrt(acc.den);
}

EnergyRateCurve energy_rate_curve(const Potential& pot, const SimConfig& cfg,
                                  const KernelConfig& kc) {
  const ParticleDataset ds = simulate(pot, cfg);
  EnergyRateCurve c;
  c.energy_times = ds.times();
  const int m = ds.snapshots();
  c.energy.resize(static_cast<std::size_t>(m), 0.0);
  // Ensemble-averaged energy when several ensembles are simulated.
  for (int i = 0; i < m; ++i) {
    double e = 0.0;
    for (int q = 0; q < ds.ensembles(); ++q) {
      e += discrete_energy(ds.positions(q, i),
                           static_cast<std::size_t>(ds.particles()), pot, kc,
                           cfg.kbt);
    }
    c.energy[static_cast<std::size_t>(i)] = e / ds.ensembles();
  }
  for (int i = 1; i + 1 < m; ++i) {
    c.rate_times.push_back(ds.times()[i]);
    c.rate.push_back((c.energy[static_cast<std::size_t>(i) + 1] -
                      c.energy[static_cast<std::size_t>(i) - 1]) /
                     (ds.times()[i + 1] - ds.times()[i - 1]));
  }
  return c;
}

namespace {

std::vector<double> subsample_cloud(std::span<const double> cloud, std::size_t n,
                                    int d, std::size_t target,
                                    std::uint64_t seed, std::uint64_t salt) {
  // Seeded Fisher-Yates prefix selection.
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(stream_key(seed, stream_tag::kSubsample, salt));
  for (std::size_t i = 0; i < target; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.uniform01() * (n - i));
    std::swap(idx[i], idx[std::min(j, n - 1)]);
  }
  std::vector<double> out(target * static_cast<std::size_t>(d));
  for (std::size_t i = 0; i < target; ++i)
    for (int k = 0; k < d; ++k)
      out[i * d + k] = cloud[idx[i] * d + k];
  return out;
}

}  // namespace

double wasserstein2(std::span<const double> cloud_a, std::size_t na,
                    std::span<const double> cloud_b, std::size_t nb, int d,
                    const W2Options& opt) {
  if (na == 0 || nb == 0) throw Error("wasserstein2: empty cloud");
  std::vector<double> a_store, b_store;
  std::span<const double> a = cloud_a;
  std::span<const double> b = cloud_b;
  std::size_t n = std::min(na, nb);
  n = std::min(n, static_cast<std::size_t>(opt.max_subsample));
  if (n < na) {
    a_store = subsample_cloud(cloud_a, na, d, n, opt.seed, 1);
    a = a_store;
  }
  if (n < nb) {
    b_store = subsample_cloud(cloud_b, nb, d, n, opt.seed, 2);
    b = b_store;
  }

  if (n <= static_cast<std::size_t>(opt.exact_threshold)) {
    const std::vector<double> cost = pairwise_sq_cost(a, n, b, n, d);
    const TransportPlan plan = assignment_plan(cost, static_cast<int>(n));
    return std::sqrt(std::max(0.0, plan.cost));
  }
  // Debiased entropic estimate: S(a,b) - (S(a,a) + S(b,b)) / 2 on transport
  // costs, clamped at zero before the square root.
  const auto entropic_cost = [&](std::span<const double> x,
                                 std::span<const double> y) {
    std::vector<double> cost = pairwise_sq_cost(x, n, y, n, d);
    double eps = opt.epsilon_factor * median_cost(cost);
    if (eps <= 0) eps = 1e-12;
    const TransportPlan plan = sinkhorn_plan(cost, static_cast<int>(n),
                                             static_cast<int>(n), eps,
                                             opt.sinkhorn_iters, 1e-8);
    return plan.cost;
  };
  const double sab = entropic_cost(a, b);
  const double saa = entropic_cost(a, a);
  const double sbb = entropic_cost(b, b);
  return std::sqrt(std::max(0.0, sab - 0.5 * (saa + sbb)));
}

GridExport export_grid(const Potential& learned, const Potential& truth,
                       const std::vector<double>& lo,
                       const std::vector<double>& hi, int resolution) {
  const int d = truth.dim();
  if (learned.dim() != d) throw Error("export_grid: potential dimensions differ");
  if (d > 3) throw Error("export_grid: only d <= 3 supported");
  if (resolution < 2) throw Error("export_grid: resolution must be >= 2");
  if (lo.size() != static_cast<std::size_t>(d) ||
      hi.size() != static_cast<std::size_t>(d))
    throw Error("export_grid: box bounds do not match dimension");

  GridExport g;
  g.dim = d;
  g.resolution = resolution;
  std::size_t total = 1;
  for (int k = 0; k < d; ++k) total *= static_cast<std::size_t>(resolution);
  g.coords.resize(total * static_cast<std::size_t>(d));
  g.value_true.resize(total);
  g.value_learned.resize(total);

  parallel_for(total, [&](std::size_t idx) {
    double x[3];
    std::size_t rem = idx;
    for (int k = d - 1; k >= 0; --k) {
      const int i = static_cast<int>(rem % resolution);
      rem /= resolution;
      x[k] = lo[k] + (hi[k] - lo[k]) * i / (resolution - 1);
    }
    for (int k = 0; k < d; ++k) g.coords[idx * d + k] = x[k];
    const std::span<const double> xs(x, static_cast<std::size_t>(d));
    g.value_true[idx] = truth.value(xs);
    g.value_learned[idx] = learned.value(xs);
  });

  double mean_diff = 0.0;
  for (std::size_t i = 0; i < total; ++i)
    mean_diff += g.value_true[i] - g.value_learned[i];
  mean_diff /= static_cast<double>(total);
  g.shift = mean_diff;
  for (double& v : g.value_learned) v += mean_diff;
  return g;
}

void write_grid_csv(const GridExport& g, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("write_grid_csv: cannot open " + path);
  for (int k = 0; k < g.dim; ++k) os << "x" << (k + 1) << ",";
  os << "psi_true,psi_learned\n";
  char buf[32];
  const std::size_t total = g.value_true.size();
  for (std::size_t i = 0; i < total; ++i) {
    for (int k = 0; k < g.dim; ++k) {
      std::snprintf(buf, sizeof(buf), "%.17g", g.coords[i * g.dim + k]);
      os << buf << ",";
    }
    std::snprintf(buf, sizeof(buf), "%.17g", g.value_true[i]);
    os << buf << ",";
    std::snprintf(buf, sizeof(buf), "%.17g", g.value_learned[i]);
    os << buf << "\n";
  }
}

}  // namespace edl
