#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "nslang/errors.hpp"
#include "nslang/spectral_grid.hpp"
#include "test_support.hpp"

using namespace nslang;
using testing::paper_grid;

TEST_CASE("three-point GLL element") {
  auto g = SpectralGrid::build(1, 3, -1.0, 1.0);
  REQUIRE(g->size() == 3);
  CHECK(g->nodes()[0] == doctest::Approx(-1.0).epsilon(1e-15));
  CHECK(std::abs(g->nodes()[1]) < 1e-15);
  CHECK(g->nodes()[2] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g->weights()[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(g->weights()[1] == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
  CHECK(g->weights()[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("two-point elements reduce to the trapezoid rule") {
  auto g = SpectralGrid::build(2, 2, 0.0, 2.0);
  REQUIRE(g->size() == 3);
  const double nodes[] = {0.0, 1.0, 2.0};
  const double weights[] = {0.5, 1.0, 0.5};
  for (int i = 0; i < 3; ++i) {
    CHECK(g->nodes()[i] == doctest::Approx(nodes[i]).epsilon(1e-15));
    CHECK(g->weights()[i] == doctest::Approx(weights[i]).epsilon(1e-15));
  }
}

TEST_CASE("global node count and layout") {
  auto g = paper_grid();
  CHECK(g->size() == 449);
  CHECK(g->nodes()[0] == -1.0);
  CHECK(g->nodes()[448] == 1.0);
  CHECK(g->element_boundaries().size() == 65);
  for (Eigen::Index i = 1; i < g->size(); ++i) CHECK(g->nodes()[i] > g->nodes()[i - 1]);
  CHECK((g->weights().array() > 0.0).all());
  CHECK(g->weights().sum() == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(g->antideriv_matrix().row(0).cwiseAbs().maxCoeff() == 0.0);
  // element boundaries are shared nodes
  for (int e = 0; e <= 64; ++e)
    CHECK(g->nodes()[e * 7] == doctest::Approx(g->element_boundaries()[e]).epsilon(1e-15));
}

TEST_CASE("Legendre-Lobatto reference nodes are roots of (1-x^2) P'_{n-1}") {
  for (int np : {4, 5, 8, 12}) {
    Eigen::VectorXd x, w;
    gll_nodes_weights(np, x, w);
    const int n = np - 1;
    for (int i = 1; i < np - 1; ++i) {
      // P'_n via the derivative recurrence.
      double p0 = 1.0, p1 = x[i], d1 = 1.0;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2 * k - 1) * x[i] * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      d1 = n * (p0 - x[i] * p1) / (1.0 - x[i] * x[i]);
      CHECK(std::abs(d1) < 1e-11);
      // closed-form weight 2 / (n (n + 1) P_n(x)^2)
      CHECK(w[i] == doctest::Approx(2.0 / (n * (n + 1) * p1 * p1)).epsilon(1e-12));
    }
  }
}

TEST_CASE("invalid grids are rejected") {
  CHECK_THROWS_AS(SpectralGrid::build(0, 8, -1, 1), ParameterError);
  CHECK_THROWS_AS(SpectralGrid::build(4, 1, -1, 1), ParameterError);
  CHECK_THROWS_AS(SpectralGrid::build(4, 8, 1, 1), ParameterError);
  CHECK_THROWS_AS(SpectralGrid::build(4, 8, 1, -1), ParameterError);
}

TEST_CASE("quadrature") {
  auto g = paper_grid();
  CHECK(quadrature(constant(g, 1.0)) == doctest::Approx(2.0).epsilon(1e-14));
  for (int np : {3, 5, 8}) {
    auto gg = SpectralGrid::build(3, np, -1, 1);
    CHECK(quadrature(sample(gg, [](double x) { return x * x; })) ==
          doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  }
  // int_{-1}^{1} exp(-100 x^2) dx = sqrt(pi)/10 erf(10)
  const double exact = std::sqrt(std::numbers::pi) / 10.0 * std::erf(10.0);
  const double q = quadrature(sample(g, [](double x) { return std::exp(-100 * x * x); }));
  CHECK(std::abs(q - exact) / exact < 1e-10);

  CHECK_THROWS_AS(GridFunction(g, Eigen::VectorXd::Ones(3)), ParameterError);
  auto other = SpectralGrid::build(8, 8, -1, 1);
  CHECK_THROWS_AS(check_on_grid(constant(other, 1.0), *g), ParameterError);
}

TEST_CASE("property: quadrature is exact up to degree 2 Np - 3 per element") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const int np = 2 + static_cast<int>(rng() % 9);
    const int ne = 1 + static_cast<int>(rng() % 6);
    const double a = u(rng) * 3.0;
    const double b = a + 0.5 + std::abs(u(rng)) * 4.0;
    auto g = SpectralGrid::build(ne, np, a, b);
    const int degree = 2 * np - 3;
    std::vector<double> c(degree + 1);
    for (double& ci : c) ci = u(rng);
    auto poly = [&](double x) {
      double v = 0;
      for (int k = degree; k >= 0; --k) v = v * x + c[k];
      return v;
    };
    double exact = 0.0;
    for (int k = 0; k <= degree; ++k)
      exact += c[k] * (std::pow(b, k + 1) - std::pow(a, k + 1)) / (k + 1);
    const double q = quadrature(sample(g, poly));
    double scale = 0.0;
    for (int k = 0; k <= degree; ++k)
      scale += std::abs(c[k]) * std::pow(std::max(std::abs(a), std::abs(b)), k) * (b - a);
    CHECK(std::abs(q - exact) <= 1e-13 * scale);
  }
}

TEST_CASE("differentiation") {
  auto g = paper_grid();
  auto lin = differentiate(sample(g, [](double x) { return x; }));
  CHECK((lin.values.array() - 1.0).abs().maxCoeff() < 1e-11);
  auto cube = differentiate(sample(g, [](double x) { return x * x * x; }));
  auto expect = sample(g, [](double x) { return 3 * x * x; });
  CHECK(testing::max_abs(cube.values - expect.values) < 1e-10);
  auto s = differentiate(sample(g, [](double x) { return std::sin(std::numbers::pi * x); }));
  auto c = sample(g, [](double x) { return std::numbers::pi * std::cos(std::numbers::pi * x); });
  CHECK(testing::max_abs(s.values - c.values) < 1e-8);
  for (double value : {0.0, 1.0, -7.5, 1e3})
    CHECK(testing::max_abs(differentiate(constant(g, value)).values) <= 1e-12 * (1 + std::abs(value)));
}

TEST_CASE("antiderivative") {
  auto g = paper_grid();
  auto one = antiderivative(constant(g, 1.0));
  CHECK(testing::max_abs(one.values - (g->nodes().array() + 1.0).matrix()) < 1e-13);
  auto sq = antiderivative(sample(g, [](double x) { return 2 * x; }));
  CHECK(testing::max_abs(sq.values - (g->nodes().array().square() - 1.0).matrix()) < 1e-13);

  auto smooth = [](double x) { return std::exp(std::sin(3 * x)) + x * x; };
  auto gfun = sample(g, smooth);
  auto back = antiderivative(differentiate(gfun));
  CHECK(testing::max_abs(back.values - (gfun.values.array() - gfun.values[0]).matrix()) < 1e-8);
}

TEST_CASE("property: antiderivative at x_end equals quadrature exactly") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 20; ++trial) {
    const int ne = 1 + static_cast<int>(rng() % 20);
    const int np = 2 + static_cast<int>(rng() % 10);
    auto g = SpectralGrid::build(ne, np, -1.0 - trial, 2.0);
    Eigen::VectorXd v(g->size());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = n01(rng);
    GridFunction f(g, v);
    CHECK(antiderivative(f).values[g->size() - 1] == quadrature(f));
  }
}

TEST_CASE("interpolation reproduces element polynomials") {
  auto g = SpectralGrid::build(5, 6, -1, 1);
  auto f = sample(g, [](double x) { return 1 - 2 * x + x * x * x * x * x; });
  for (double x : {-1.0, -0.93, -0.2, 0.0, 0.41, 0.6, 1.0})
    CHECK(g->interpolate(f.values, x) == doctest::Approx(1 - 2 * x + std::pow(x, 5)).epsilon(1e-12));
}
