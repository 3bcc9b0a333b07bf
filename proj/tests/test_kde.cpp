#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "edl/errors.hpp"
#include "edl/kde.hpp"
#include "edl/rng.hpp"

using namespace edl;

namespace {

std::vector<double> normal_cloud(std::size_t n, int d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> pts(n * static_cast<std::size_t>(d));
  for (double& v : pts) v = rng.normal();
  return pts;
}

}  // namespace

TEST_CASE("single-particle density equals the kernel normalization") {
  const KernelConfig kc{0.05, 1};
  const std::vector<double> pts = {0.0};
  // 1 / (sqrt(2 pi) * 0.05), evaluated independently.
  CHECK(kde_density(pts, 1, kc, std::vector<double>{0.0}) ==
        doctest::Approx(7.978845608028654).epsilon(1e-14));
}

TEST_CASE("kernel symmetry in its two arguments") {
  const KernelConfig kc{0.05, 2};
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const std::vector<double> a = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const std::vector<double> b = {a[0] + rng.uniform(-0.2, 0.2),
                                   a[1] + rng.uniform(-0.2, 0.2)};
    CHECK(kde_density(a, 1, kc, b) == kde_density(b, 1, kc, a));
  }
}

TEST_CASE("KDE is consistent on a large normal sample") {
  const KernelConfig kc{0.05, 1};
  const std::vector<double> pts = normal_cloud(100000, 1, 17);
  const double got = kde_density(pts, pts.size(), kc, std::vector<double>{0.0});
  const double want = 0.3989422804014327;  // standard normal at 0
  CHECK(std::abs(got - want) / want < 0.02);
}

TEST_CASE("grad log density: one- and two-particle exact cases") {
  const KernelConfig kc{0.05, 1};
  const std::vector<double> single = {0.7};
  const auto g = kde_grad_log_density(single, 1, kc, std::vector<double>{0.4});
  CHECK(g[0] == (0.7 - 0.4) / (0.05 * 0.05));

  const std::vector<double> pair = {0.3, -0.3};
  const auto g0 = kde_grad_log_density(pair, 2, kc, std::vector<double>{0.0});
  CHECK(g0[0] == 0.0);
}

TEST_CASE("grad log density matches finite differences of log density") {
  const KernelConfig kc{0.05, 2};
  const std::vector<double> pts = normal_cloud(60, 2, 5);
  Rng rng(9);
  const double h = 1e-7;
  for (int i = 0; i < 40; ++i) {
    // Query near a random member so the density is well supported.
    const std::size_t j = static_cast<std::size_t>(rng.uniform01() * 60) % 60;
    std::vector<double> x = {pts[j * 2] + rng.uniform(-0.05, 0.05),
                             pts[j * 2 + 1] + rng.uniform(-0.05, 0.05)};
    const auto g = kde_grad_log_density(pts, 60, kc, x);
    for (int k = 0; k < 2; ++k) {
      std::vector<double> xp = x, xm = x;
      xp[static_cast<std::size_t>(k)] += h;
      xm[static_cast<std::size_t>(k)] -= h;
      const double fd = (kde_log_density(pts, 60, kc, xp) -
                         kde_log_density(pts, 60, kc, xm)) / (2 * h);
      CHECK(std::abs(g[static_cast<std::size_t>(k)] - fd) <=
            1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST_CASE("1d density integrates to one") {
  const KernelConfig kc{0.05, 1};
  const std::vector<double> pts = normal_cloud(200, 1, 21);
  double lo = pts[0], hi = pts[0];
  for (double p : pts) {
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  lo -= 10 * kc.bandwidth;
  hi += 10 * kc.bandwidth;
  const int nodes = 10000;
  const double dx = (hi - lo) / nodes;
  double integral = 0.0;
  for (int i = 0; i <= nodes; ++i) {
    const double x = lo + dx * i;
    const double w = (i == 0 || i == nodes) ? 0.5 : 1.0;
    integral += w * kde_density(pts, pts.size(), kc, std::vector<double>{x});
  }
  integral *= dx;
  CHECK(std::abs(integral - 1.0) < 1e-6);
}

TEST_CASE("translation equivariance") {
  const KernelConfig kc{0.05, 2};

  SUBCASE("dyadic data and shift: bitwise") {
    std::vector<double> pts;
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 2; ++j) pts.push_back(0.25 * i - 0.5 * j);
    const std::vector<double> x = {0.25, -0.75};
    const double shift = 0.5;
    std::vector<double> pts2 = pts;
    for (double& v : pts2) v += shift;
    const std::vector<double> x2 = {x[0] + shift, x[1] + shift};
    CHECK(kde_density(pts, 8, kc, x) == kde_density(pts2, 8, kc, x2));
    CHECK(kde_grad_log_density(pts, 8, kc, x) ==
          kde_grad_log_density(pts2, 8, kc, x2));
  }

  SUBCASE("generic data and shift: near machine precision") {
    const std::vector<double> pts = normal_cloud(50, 2, 33);
    std::vector<double> pts2 = pts;
    const double shift = 3.14159;
    for (double& v : pts2) v += shift;
    const std::vector<double> x = {pts[0] + 0.03, pts[1] - 0.02};
    const std::vector<double> x2 = {x[0] + shift, x[1] + shift};
    CHECK(kde_density(pts, 50, kc, x) ==
          doctest::Approx(kde_density(pts2, 50, kc, x2)).epsilon(1e-12));
    const auto g = kde_grad_log_density(pts, 50, kc, x);
    const auto g2 = kde_grad_log_density(pts2, 50, kc, x2);
    for (int k = 0; k < 2; ++k)
      CHECK(g[static_cast<std::size_t>(k)] ==
            doctest::Approx(g2[static_cast<std::size_t>(k)]).epsilon(1e-9));
  }
}

TEST_CASE("duplicating the point set changes nothing") {
  const KernelConfig kc{0.05, 1};
  const std::vector<double> pts = normal_cloud(40, 1, 41);
  std::vector<double> doubled = pts;
  doubled.insert(doubled.end(), pts.begin(), pts.end());
  const std::vector<double> x = {pts[7] + 0.02};
  CHECK(kde_density(pts, 40, kc, x) ==
        doctest::Approx(kde_density(doubled, 80, kc, x)).epsilon(1e-13));
  CHECK(kde_grad_log_density(pts, 40, kc, x)[0] ==
        doctest::Approx(kde_grad_log_density(doubled, 80, kc, x)[0]).epsilon(1e-13));
}

TEST_CASE("underflow floor raises 'outside data support'") {
  const KernelConfig kc{0.05, 1};
  const std::vector<double> pts = {0.0};
  CHECK_THROWS_AS((void)kde_log_density(pts, 1, kc, std::vector<double>{10.0}),
                  KdeUnderflowError);
  CHECK_THROWS_AS(
      (void)kde_grad_log_density(pts, 1, kc, std::vector<double>{10.0}),
      KdeUnderflowError);
  CHECK_THROWS_AS((void)kde_density({}, 0, kc, std::vector<double>{0.0}), Error);
}

TEST_CASE("member tables equal the pointwise functions at every member") {
  for (int d : {1, 2, 3}) {
    const KernelConfig kc{0.05, d};
    const std::size_t n = 80;
    const std::vector<double> pts = normal_cloud(n, d, 60 + static_cast<std::uint64_t>(d));
    const KdeMemberTables t = kde_member_tables(pts, n, kc);
    for (std::size_t j = 0; j < n; ++j) {
      const std::span<const double> x(pts.data() + j * d, static_cast<std::size_t>(d));
      CHECK(t.log_density[j] == kde_log_density(pts, n, kc, x));
      const auto g = kde_grad_log_density(pts, n, kc, x);
      for (int k = 0; k < d; ++k)
        CHECK(t.grad_log_density[j * d + k] == g[static_cast<std::size_t>(k)]);
    }
  }
}
