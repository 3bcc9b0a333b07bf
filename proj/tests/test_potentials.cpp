#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "edl/errors.hpp"
#include "edl/potentials.hpp"
#include "edl/rng.hpp"

using namespace edl;

namespace {

// Central finite differences of the value; the independent oracle for every
// analytic gradient below.
std::vector<double> fd_gradient(const Potential& p, std::vector<double> x,
                                double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double x0 = x[k];
    x[k] = x0 + h;
    const double up = p.value(x);
    x[k] = x0 - h;
    const double dn = p.value(x);
    x[k] = x0;
    g[k] = (up - dn) / (2 * h);
  }
  return g;
}

double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1e-12, std::abs(want));
}

}  // namespace

TEST_CASE("double well values and stationary points") {
  DoubleWell1d dw;
  CHECK(dw.value(std::vector<double>{1.0}) == doctest::Approx(-0.25).epsilon(1e-15));
  CHECK(dw.value(std::vector<double>{0.0}) == 0.0);
  CHECK(dw.gradient(std::vector<double>{1.0})[0] == 0.0);
  CHECK(dw.gradient(std::vector<double>{2.0})[0] == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("quadruple well is the separable double-well sum") {
  DoubleWell1d dw;
  QuadrupleWell2d qw;
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(-2.5, 2.5);
    const double y = rng.uniform(-2.5, 2.5);
    const double want = dw.value(std::vector<double>{x}) + dw.value(std::vector<double>{y});
    CHECK(qw.value(std::vector<double>{x, y}) == want);
  }
}

TEST_CASE("3d landscape value at a well center") {
  const GaussianWells mm = make_multimodal_3d();
  // c1*1 + A1 + A2 e^{-8} + A3 e^{-5}, evaluated independently.
  CHECK(mm.value(std::vector<double>{-1.0, 0.0, 0.0}) ==
        doctest::Approx(-1.8107778457544332).epsilon(1e-14));
  CHECK(mm.value(std::vector<double>{0.3, -0.2, 0.5}) ==
        doctest::Approx(-0.554291729441713).epsilon(1e-14));
}

TEST_CASE("2d mixture values") {
  const GaussianWells gm = make_gaussian_mixture_2d();
  CHECK(gm.value(std::vector<double>{-1.0, 0.0}) ==
        doctest::Approx(-1.875351527807601).epsilon(1e-14));
  CHECK(gm.value(std::vector<double>{0.4, 0.7}) ==
        doctest::Approx(-1.5093603996635192).epsilon(1e-14));
}

TEST_CASE("analytic gradients match finite differences on a grid") {
  std::vector<std::shared_ptr<Potential>> pots = {
      make_benchmark_potential("double_well_1d"),
      make_benchmark_potential("quadruple_well_2d"),
      make_benchmark_potential("gaussian_mixture_2d"),
      make_benchmark_potential("multimodal_3d"),
      std::make_shared<QuadraticPotential>(3, 1.7),
  };
  for (const auto& p : pots) {
    const int d = p->dim();
    Rng rng(11 + d);
    for (int i = 0; i < 60; ++i) {
      std::vector<double> x(static_cast<std::size_t>(d));
      for (double& v : x) v = rng.uniform(-2.0, 2.0);
      const auto got = p->gradient(x);
      const auto want = fd_gradient(*p, x);
      for (int k = 0; k < d; ++k) {
        CHECK(std::abs(got[static_cast<std::size_t>(k)] - want[static_cast<std::size_t>(k)]) <=
              1e-8 * std::max(1.0, std::abs(want[static_cast<std::size_t>(k)])));
      }
    }
  }
}

TEST_CASE("dimension mismatch raises a structured error") {
  DoubleWell1d dw;
  CHECK_THROWS_AS((void)dw.value(std::vector<double>{1.0, 2.0}), Error);
  const GaussianWells mm = make_multimodal_3d();
  CHECK_THROWS_AS((void)mm.gradient(std::vector<double>{1.0}), Error);
}

TEST_CASE("neural potential: spatial gradient matches finite differences") {
  for (int d : {1, 2, 3}) {
    NeuralPotential nn = NeuralPotential::random_init(d, 64, 42 + static_cast<std::uint64_t>(d));
    Rng rng(101 + static_cast<std::uint64_t>(d));
    for (int i = 0; i < 25; ++i) {
      std::vector<double> x(static_cast<std::size_t>(d));
      for (double& v : x) v = rng.uniform(-2.0, 2.0);
      const auto got = nn.gradient(x);
      const auto want = fd_gradient(nn, x);
      for (int k = 0; k < d; ++k)
        CHECK(rel_err(got[static_cast<std::size_t>(k)], want[static_cast<std::size_t>(k)]) < 1e-6);
    }
  }
}

TEST_CASE("neural potential: parameter sensitivities match finite differences") {
  const int d = 2;
  NeuralPotential nn = NeuralPotential::random_init(d, 8, 5);
  Rng rng(17);
  std::vector<double> x = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
  const int pc = nn.param_count();

  std::vector<double> dpsi(static_cast<std::size_t>(pc));
  std::vector<double> dgrad(static_cast<std::size_t>(pc) * d);
  nn.param_grad_value(x, dpsi);
  nn.param_grad_gradient(x, dgrad);

  const double h = 1e-6;
  for (int p = 0; p < pc; ++p) {
    const double theta0 = nn.params()[static_cast<std::size_t>(p)];
    nn.params()[static_cast<std::size_t>(p)] = theta0 + h;
    const double vp = nn.value(x);
    const auto gp = nn.gradient(x);
    nn.params()[static_cast<std::size_t>(p)] = theta0 - h;
    const double vm = nn.value(x);
    const auto gm = nn.gradient(x);
    nn.params()[static_cast<std::size_t>(p)] = theta0;

    const double fd_v = (vp - vm) / (2 * h);
    CHECK(std::abs(dpsi[static_cast<std::size_t>(p)] - fd_v) <=
          1e-6 * std::max(1.0, std::abs(fd_v)));
    for (int k = 0; k < d; ++k) {
      const double fd_g = (gp[static_cast<std::size_t>(k)] - gm[static_cast<std::size_t>(k)]) / (2 * h);
      CHECK(std::abs(dgrad[static_cast<std::size_t>(p) * d + k] - fd_g) <=
            1e-6 * std::max(1.0, std::abs(fd_g)));
    }
  }
}

TEST_CASE("bias sensitivity is identically one") {
  NeuralPotential nn = NeuralPotential::random_init(1, 16, 3);
  for (int h = 0; h < 16; ++h) nn.params()[nn.w2_index(h)] = 0.0;
  std::vector<double> dpsi(static_cast<std::size_t>(nn.param_count()));
  for (double xv : {-1.3, 0.0, 0.7}) {
    nn.param_grad_value(std::vector<double>{xv}, dpsi);
    CHECK(dpsi[nn.b2_index()] == 1.0);
  }
}

TEST_CASE("zero pre-activations: d(grad)/dW2_h equals W1_h") {
  // With b1 = 0 and x = 0 every tanh argument is 0, so tanh' = 1.
  const int d = 2;
  NeuralPotential nn = NeuralPotential::random_init(d, 8, 9);
  for (int h = 0; h < 8; ++h) nn.params()[nn.b1_index(h)] = 0.0;
  std::vector<double> x = {0.0, 0.0};
  std::vector<double> dgrad(static_cast<std::size_t>(nn.param_count()) * d);
  nn.param_grad_gradient(x, dgrad);
  for (int h = 0; h < 8; ++h)
    for (int k = 0; k < d; ++k)
      CHECK(dgrad[nn.w2_index(h) * static_cast<std::size_t>(d) + k] == nn.w1(h, k));
}

TEST_CASE("hidden unit permutation leaves outputs unchanged") {
  const int d = 2, hidden = 16;
  NeuralPotential a = NeuralPotential::random_init(d, hidden, 23);
  NeuralPotential b(d, hidden);
  // Fixed permutation: reverse the hidden units.
  for (int h = 0; h < hidden; ++h) {
    const int s = hidden - 1 - h;
    for (int k = 0; k < d; ++k) b.params()[b.w1_index(h, k)] = a.w1(s, k);
    b.params()[b.b1_index(h)] = a.b1(s);
    b.params()[b.w2_index(h)] = a.w2(s);
  }
  b.params()[b.b2_index()] = a.b2();
  Rng rng(31);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> x = {rng.uniform(-2, 2), rng.uniform(-2, 2)};
    CHECK(rel_err(b.value(x), a.value(x)) < 1e-12);
    const auto ga = a.gradient(x);
    const auto gb = b.gradient(x);
    for (int k = 0; k < d; ++k)
      CHECK(std::abs(ga[static_cast<std::size_t>(k)] - gb[static_cast<std::size_t>(k)]) < 1e-12);
  }
}

TEST_CASE("serialization round-trips bit-exactly") {
  NeuralPotential nn = NeuralPotential::random_init(3, 64, 77);
  const NeuralPotential back = NeuralPotential::from_json(nn.to_json());
  REQUIRE(back.params().size() == nn.params().size());
  for (std::size_t i = 0; i < nn.params().size(); ++i)
    CHECK(back.params()[i] == nn.params()[i]);

  // Through text, as the checkpoint files do.
  const std::string text = nn.to_json().dump();
  const NeuralPotential back2 = NeuralPotential::from_json(nlohmann::json::parse(text));
  for (std::size_t i = 0; i < nn.params().size(); ++i)
    CHECK(back2.params()[i] == nn.params()[i]);

  const auto mm = make_benchmark_potential("multimodal_3d");
  const auto mm2 = potential_from_json(mm->to_json());
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> x = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    CHECK(mm->value(x) == mm2->value(x));
  }
}

TEST_CASE("body_value differs from value by exactly b2") {
  NeuralPotential nn = NeuralPotential::random_init(2, 32, 13);
  std::vector<double> x = {0.4, -1.1};
  CHECK(nn.value(x) == doctest::Approx(nn.body_value(x) + nn.b2()).epsilon(1e-15));
}
