#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "edl/errors.hpp"
#include "edl/kde.hpp"
#include "edl/potentials.hpp"
#include "edl/rng.hpp"
#include "edl/simulate.hpp"
#include "edl/transport.hpp"
#include "edl/velocity.hpp"

using namespace edl;

namespace {

std::vector<double> random_cloud(std::size_t n, int d, std::uint64_t seed,
                                 double scale = 1.0) {
  Rng rng(seed);
  std::vector<double> pts(n * static_cast<std::size_t>(d));
  for (double& v : pts) v = scale * rng.normal();
  return pts;
}

// Exhaustive minimum matching cost over all permutations; the brute-force
// oracle for the assignment and Sinkhorn paths (n <= 8).
double brute_force_cost(const std::vector<double>& cost, int n) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (int j = 0; j < n; ++j) c += cost[static_cast<std::size_t>(j) * n + perm[static_cast<std::size_t>(j)]];
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / n;
}

ParticleDataset tiny_dataset(int q, int m, int n, int d, std::uint64_t seed) {
  ParticleDataset ds(q, m, n, d, [&] {
    std::vector<double> t(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) t[static_cast<std::size_t>(i)] = 0.1 * (i + 1);
    return t;
  }());
  Rng rng(seed);
  for (int qq = 0; qq < q; ++qq)
    for (int i = 0; i < m; ++i)
      for (double& v : ds.positions(qq, i)) v = rng.normal();
  return ds;
}

}  // namespace

TEST_CASE("force balance velocities match their definition componentwise") {
  const KernelConfig kc{0.05, 2};
  const double kbt = 0.125;
  QuadraticPotential pot(2, 1.3);
  ParticleDataset ds = tiny_dataset(2, 3, 40, 2, 8);
  force_balance_velocities(ds, pot, kc, kbt);
  for (int q = 0; q < 2; ++q) {
    for (int i = 0; i < 3; ++i) {
      const auto pos = ds.positions(q, i);
      const auto vel = ds.velocities(q, i);
      for (std::size_t j = 0; j < 40; ++j) {
        const auto x = pos.subspan(j * 2, 2);
        const auto gl = kde_grad_log_density(pos, 40, kc, x);
        const auto gp = pot.gradient(x);
        for (int k = 0; k < 2; ++k) {
          CHECK(vel[j * 2 + k] ==
                -kbt * gl[static_cast<std::size_t>(k)] - gp[static_cast<std::size_t>(k)]);
        }
      }
    }
  }
}

TEST_CASE("single particle with flat potential has zero velocity") {
  const KernelConfig kc{0.05, 1};
  ParticleDataset ds(1, 1, 1, 1, {0.1});
  ds.positions(0, 0)[0] = 0.42;
  ZeroPotential flat(1);
  force_balance_velocities(ds, flat, kc, 0.125);
  CHECK(ds.velocities(0, 0)[0] == 0.0);
}

TEST_CASE("equilibrium ensemble is near force balance") {
  // Gaussian samples at the stationary distribution of the quadratic well:
  // the force-balance velocities shrink toward zero (KDE bandwidth bias only).
  const double kbt = 0.125;
  const KernelConfig kc{0.05, 1};
  QuadraticPotential pot(1, 1.0);
  const std::size_t n = 100000;
  ParticleDataset ds(1, 1, static_cast<int>(n), 1, {0.1});
  Rng rng(123);
  for (double& v : ds.positions(0, 0)) v = std::sqrt(kbt) * rng.normal();
  force_balance_velocities(ds, pot, kc, kbt);
  double mean_abs = 0.0;
  for (double v : ds.velocities(0, 0)) mean_abs += std::abs(v);
  mean_abs /= static_cast<double>(n);
  CHECK(mean_abs <= 0.05);
}

TEST_CASE("assignment solver equals exhaustive search") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform01() * 6);
    std::vector<double> cost(static_cast<std::size_t>(n) * n);
    for (double& c : cost) c = rng.uniform(0.0, 4.0);
    const TransportPlan plan = assignment_plan(cost, n);
    CHECK(plan.cost == doctest::Approx(brute_force_cost(cost, n)).epsilon(1e-12));
  }
}

TEST_CASE("rigid translation gives uniform velocities (exact path)") {
  const int n = 32, d = 2;
  const std::vector<double> a = random_cloud(n, d, 14);
  std::vector<double> b = a;
  const double tx = 0.35, ty = -0.2, dt = 0.1;
  for (int j = 0; j < n; ++j) {
    b[static_cast<std::size_t>(j) * d] += tx;
    b[static_cast<std::size_t>(j) * d + 1] += ty;
  }
  VelocitySource vs;
  vs.exact_threshold = 64;
  const auto v = ot_velocity(a, b, n, d, dt, vs);
  for (int j = 0; j < n; ++j) {
    CHECK(v[static_cast<std::size_t>(j) * d] == doctest::Approx(tx / dt).epsilon(1e-12));
    CHECK(v[static_cast<std::size_t>(j) * d + 1] == doctest::Approx(ty / dt).epsilon(1e-12));
  }
}

TEST_CASE("identical snapshots give zero velocities") {
  const int n = 16, d = 2;
  const std::vector<double> a = random_cloud(n, d, 15);
  VelocitySource vs;
  const auto v = ot_velocity(a, a, n, d, 0.1, vs);
  for (double x : v) CHECK(x == 0.0);
}

TEST_CASE("Sinkhorn cost is within 2% of the exhaustive optimum (n = 4..6)") {
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 4 + trial % 3;
    const std::vector<double> a = random_cloud(n, 2, 100 + static_cast<std::uint64_t>(trial));
    const std::vector<double> b = random_cloud(n, 2, 200 + static_cast<std::uint64_t>(trial));
    const std::vector<double> cost = pairwise_sq_cost(a, n, b, n, 2);
    const double eps = 1e-3 * median_cost(cost);
    const TransportPlan plan = sinkhorn_plan(cost, n, n, eps, 200000, 1e-9);
    const double exact = brute_force_cost(cost, n);
    CHECK(plan.cost <= exact * 1.02 + 1e-12);
    CHECK(plan.cost >= exact - 1e-9);
    CHECK(plan.marginal_violation <= 1e-6);
  }
}

TEST_CASE("exact and Sinkhorn transport costs agree within 2% up to n = 16") {
  for (int n : {8, 16}) {
    const std::vector<double> a = random_cloud(n, 2, 300 + static_cast<std::uint64_t>(n));
    const std::vector<double> b = random_cloud(n, 2, 400 + static_cast<std::uint64_t>(n));
    const std::vector<double> cost = pairwise_sq_cost(a, n, b, n, 2);
    const TransportPlan exact = assignment_plan(cost, n);
    const double eps = 1e-3 * median_cost(cost);
    const TransportPlan entropic = sinkhorn_plan(cost, n, n, eps, 500000, 1e-9);
    CHECK(std::abs(entropic.cost - exact.cost) <= 0.02 * exact.cost);
  }
}

TEST_CASE("ot velocities are equivariant under common translation") {
  const int n = 80, d = 2;  // above the exact threshold: Sinkhorn path
  const std::vector<double> a = random_cloud(n, d, 21);
  std::vector<double> b = random_cloud(n, d, 22);
  VelocitySource vs;
  vs.exact_threshold = 8;
  const auto v = ot_velocity(a, b, n, d, 0.1, vs);
  std::vector<double> a2 = a, b2 = b;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < d; ++k) {
      a2[static_cast<std::size_t>(j) * d + k] += 1.5;
      b2[static_cast<std::size_t>(j) * d + k] += 1.5;
    }
  const auto v2 = ot_velocity(a2, b2, n, d, 0.1, vs);
  for (std::size_t i = 0; i < v.size(); ++i)
    CHECK(v[i] == doctest::Approx(v2[i]).epsilon(1e-9));
}

TEST_CASE("dataset-wide ot estimation fills every snapshot") {
  ParticleDataset ds = tiny_dataset(2, 4, 24, 2, 31);
  VelocitySource vs;
  estimate_ot_velocities(ds, vs);
  REQUIRE(ds.has_velocities());
  // Terminal snapshot velocities come from the reverse map of the last pair.
  const auto va = ds.velocities(0, 3);
  double nonzero = 0.0;
  for (double v : va) nonzero += std::abs(v);
  CHECK(nonzero > 0.0);
}

TEST_CASE("environmental perturbation") {
  ParticleDataset ds(1, 1, 3, 1, {0.1});
  ds.positions(0, 0)[0] = 0.0;
  ds.positions(0, 0)[1] = std::numbers::pi / 2;
  ds.positions(0, 0)[2] = 1.0;
  ds.allocate_velocities();
  ds.velocities(0, 0)[0] = 2.0;  // v_max
  ds.velocities(0, 0)[1] = 0.5;
  ds.velocities(0, 0)[2] = -1.0;

  SUBCASE("lambda = 0 leaves velocities unchanged") {
    ParticleDataset copy = ds;
    apply_environment_sine(copy, 0.0);
    CHECK(copy.raw_velocities() == ds.raw_velocities());
  }
  SUBCASE("x = 0 entries are unchanged, sin(pi/2) shifts by lambda*v_max") {
    ParticleDataset copy = ds;
    const double vmax = apply_environment_sine(copy, 0.8);
    CHECK(vmax == 2.0);
    CHECK(copy.velocities(0, 0)[0] == 2.0);
    CHECK(copy.velocities(0, 0)[1] == doctest::Approx(0.5 + 1.6).epsilon(1e-12));
  }
  SUBCASE("2d datasets are rejected") {
    ParticleDataset ds2(1, 1, 2, 2, {0.1});
    ds2.allocate_velocities();
    CHECK_THROWS_AS(apply_environment_sine(ds2, 0.5), Error);
  }
}

TEST_CASE("sinkhorn reports non-convergence with the final violation") {
  const int n = 8;
  const std::vector<double> a = random_cloud(n, 2, 61);
  const std::vector<double> b = random_cloud(n, 2, 62);
  const std::vector<double> cost = pairwise_sq_cost(a, n, b, n, 2);
  CHECK_THROWS_WITH_AS(
      (void)sinkhorn_plan(cost, n, n, 1e-6 * median_cost(cost), 2, 1e-12),
      doctest::Contains("marginal violation"), Error);
}
