#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "bloch/galerkin.hpp"
#include "bloch/hill.hpp"

using namespace bloch;
using Catch::Matchers::WithinAbs;

namespace {
const double pi = std::numbers::pi;
}

TEST_CASE("free assembly is diagonal with kinetic entries") {
  auto v = PeriodicPotential::preset("free");
  const Vec2 xi{0.7, 0.0};
  auto H = assemble(v, xi, 4);
  REQUIRE(H.rows() == 9);
  for (int i = 0; i < 9; ++i) {
    const int k = i - 4;
    const double q = 0.7 + 2 * pi * k;
    CHECK_THAT(H(i, i).real(), WithinAbs(0.5 * q * q, 1e-12));
    for (int j = 0; j < 9; ++j)
      if (i != j) CHECK(std::abs(H(i, j)) == 0.0);
  }
}

TEST_CASE("assembled matrix is exactly Hermitian") {
  auto v = PeriodicPotential::from_fourier(
      1, {{FreqVec{1, 0}, {1.0, 0.5}}, {FreqVec{-1, 0}, {1.0, -0.5}}, {FreqVec{2, 0}, {0.3, 0.0}},
          {FreqVec{-2, 0}, {0.3, 0.0}}});
  auto H = assemble(v, {0.0, 0.0}, 6);
  CHECK((H - H.adjoint()).norm() == 0.0);
}

TEST_CASE("cutoff below band limit is rejected") {
  auto v = PeriodicPotential::from_cosines(1, {{FreqVec{3, 0}, 1.0}});
  CHECK_THROWS_AS(assemble(v, {0.0, 0.0}, 2), std::invalid_argument);
}

TEST_CASE("free fiber: rho_1 = xi^2/2 with delta wave") {
  auto v = PeriodicPotential::preset("free");
  for (double xi : {0.0, 1.3, -2.5}) {
    auto f = solve_fiber(v, xi, 8, 2);
    CHECK_THAT(f.energies[0], WithinAbs(0.5 * xi * xi, 1e-12));
    CHECK_THAT(std::abs(f.coeff(0, FreqVec{0, 0})), WithinAbs(1.0, 1e-12));
    CHECK_THAT(f.coeff(0, FreqVec{0, 0}).imag(), WithinAbs(0.0, 1e-12));
    CHECK(f.coeff(0, FreqVec{0, 0}).real() > 0);
  }
}

TEST_CASE("constant potential shifts energies, keeps waves") {
  auto v0 = PeriodicPotential::preset("mathieu5");
  auto pairs = std::vector<std::pair<FreqVec, complexd>>(v0.coeffs().begin(), v0.coeffs().end());
  pairs.push_back({FreqVec{0, 0}, complexd{4.0, 0.0}});
  auto vc = PeriodicPotential::from_fourier(1, pairs);
  auto f0 = solve_fiber(v0, 0.9, 24, 3);
  auto fc = solve_fiber(vc, 0.9, 24, 3);
  for (int n = 0; n < 3; ++n) {
    CHECK_THAT(fc.energies[n] - f0.energies[n], WithinAbs(4.0, 1e-9));
    CHECK((fc.waves[n] - f0.waves[n]).norm() < 1e-9);
  }
}

TEST_CASE("fiber waves are orthonormal and gauge-fixed") {
  auto v = PeriodicPotential::preset("mathieu5");
  auto f = solve_fiber(v, 1.1, 32, 6);
  for (int n = 0; n < 6; ++n) {
    CHECK_THAT(f.waves[n].norm(), WithinAbs(1.0, 1e-12));
    for (int m = n + 1; m < 6; ++m) CHECK(std::abs(f.waves[n].dot(f.waves[m])) < 1e-10);
    // gauge: largest-modulus coefficient real positive
    int best = 0;
    for (int i = 0; i < f.waves[n].size(); ++i)
      if (std::abs(f.waves[n](i)) > std::abs(f.waves[n](best))) best = i;
    CHECK(f.waves[n](best).real() > 0);
    CHECK_THAT(f.waves[n](best).imag(), WithinAbs(0.0, 1e-10));
    CHECK(f.residuals[n] < 1e-8);
  }
}

TEST_CASE("cross-solver: Galerkin matches Hill bands") {
  auto v = PeriodicPotential::preset("mathieu5");
  BandTable1D table(v, 2);
  auto f0 = solve_fiber(v, 0.0, 64, 1);
  CHECK_THAT(f0.energies[0], WithinAbs(table.edges()[0].lambda, 1e-6));
  auto f = solve_fiber(v, pi / 2, 64, 2);
  CHECK_THAT(f.energies[0], WithinAbs(table.band_value(1, pi / 2).rho, 1e-6));
  CHECK_THAT(f.energies[1], WithinAbs(table.band_value(2, pi / 2).rho, 1e-6));
}

TEST_CASE("cutoff convergence K=48 to K=64") {
  auto v = PeriodicPotential::preset("mathieu5");
  for (double xi : {0.4, 2.0}) {
    auto a = solve_fiber(v, xi, 48, 6);
    auto b = solve_fiber(v, xi, 64, 6);
    for (int n = 0; n < 6; ++n) CHECK_THAT(a.energies[n], WithinAbs(b.energies[n], 1e-8));
  }
}

TEST_CASE("Parseval completeness over the full solve") {
  auto v = PeriodicPotential::preset("mathieu5");
  const int K = 8;
  auto f = solve_fiber(v, 0.6, K, 2 * K + 1);
  for (int j = -K / 2; j <= K / 2; ++j) {
    double s = 0.0;
    for (int n = 0; n < 2 * K + 1; ++n) s += std::norm(f.coeff(n, FreqVec{j, 0}));
    CHECK_THAT(s, WithinAbs(1.0, 1e-8));
  }
}

TEST_CASE("p4k weight: free closed form and spectral identity") {
  auto free = PeriodicPotential::preset("free");
  const Vec2 xi{0.8, 0.0};
  for (int j : {-1, 0, 2}) {
    const double q = 0.8 + 2 * pi * j;
    CHECK_THAT(p4k_weight(free, xi, FreqVec{j, 0}, 1, 8),
               WithinAbs(std::pow(0.5 * q * q, 2), 1e-9));
  }
  auto v = PeriodicPotential::preset("mathieu5");
  CHECK(p4k_weight(v, xi, FreqVec{1, 0}, 1, 16) >= 0.0);
  // sum_n rho_n^2 |c_j^n|^2 over the complete spectral decomposition
  const int K = 10;
  auto f = solve_fiber(v, xi, K, 2 * K + 1);
  double s = 0.0;
  for (int n = 0; n < 2 * K + 1; ++n)
    s += f.energies[n] * f.energies[n] * std::norm(f.coeff(n, FreqVec{0, 0}));
  CHECK_THAT(p4k_weight(v, xi, FreqVec{0, 0}, 1, K), WithinAbs(s, 1e-6 * (1.0 + s)));
}

TEST_CASE("band grid: free folded parabola and periodic ghost layer") {
  auto v = PeriodicPotential::preset("free");
  auto g = BandGrid::from_potential(v, 1, 32, 8);
  for (int i = 0; i < 32; ++i) {
    const double xi = g.node_coord(i);
    CHECK_THAT(g.rho(1, i), WithinAbs(0.5 * xi * xi, 1e-10));
  }
  CHECK_THAT(g.rho(1, -1), WithinAbs(g.rho(1, 31), 1e-10));
}

TEST_CASE("band grid: mathieu5 gauge sweep finds no suspected crossings") {
  auto v = PeriodicPotential::preset("mathieu5");
  auto g = BandGrid::from_potential(v, 4, 64, 24);
  CHECK(g.low_overlap_nodes().empty());
}

TEST_CASE("2-D separable potential: energies are sums of 1-D energies") {
  auto v1 = PeriodicPotential::from_cosines(1, {{FreqVec{1, 0}, 1.0}});
  auto v2 = PeriodicPotential::from_cosines(1, {{FreqVec{1, 0}, 0.5}});
  auto v2d = PeriodicPotential::from_cosines(2, {{FreqVec{1, 0}, 1.0}, {FreqVec{0, 1}, 0.5}});
  const Vec2 xi{0.4, -0.9};
  auto fa = solve_fiber(v1, xi[0], 8, 3);
  auto fb = solve_fiber(v2, xi[1], 8, 3);
  auto f = solve_fiber(v2d, xi, 8, 2);
  // lowest 2-D energies = smallest sums of 1-D energies
  std::vector<double> sums;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) sums.push_back(fa.energies[a] + fb.energies[b]);
  std::sort(sums.begin(), sums.end());
  CHECK_THAT(f.energies[0], WithinAbs(sums[0], 1e-9));
  CHECK_THAT(f.energies[1], WithinAbs(sums[1], 1e-9));
}

TEST_CASE("synthetic band grid evaluates closures") {
  auto g = BandGrid::synthetic(
      1, 2,
      [](const Vec2& xi) {
        return std::vector<double>{xi[0] * xi[0], 2.0 + xi[0] * xi[0]};
      },
      32);
  CHECK_THAT(g.rho(2, 4), WithinAbs(2.0 + std::pow(g.node_coord(4), 2), 1e-12));
  CHECK_THROWS_AS(g.fiber(0), std::logic_error);
  auto off = g.rho_eval({0.123, 0.0});
  CHECK_THAT(off[0], WithinAbs(0.123 * 0.123, 1e-12));
}
