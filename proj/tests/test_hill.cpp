#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "bloch/hill.hpp"

using namespace bloch;
using Catch::Matchers::WithinAbs;

namespace {
const double pi = std::numbers::pi;

double free_disc(double lambda) {
  // closed form for V = 0: Delta = 2 cos(sqrt(2 lambda)), entire in lambda
  if (lambda >= 0) return 2.0 * std::cos(std::sqrt(2.0 * lambda));
  return 2.0 * std::cosh(std::sqrt(-2.0 * lambda));
}
}  // namespace

TEST_CASE("free monodromy closed forms") {
  auto v = PeriodicPotential::preset("free");
  auto m0 = monodromy(v, 0.0);
  CHECK_THAT(m0.M[0][0], WithinAbs(1.0, 1e-10));
  CHECK_THAT(m0.M[0][1], WithinAbs(1.0, 1e-10));
  CHECK_THAT(m0.M[1][0], WithinAbs(0.0, 1e-10));
  CHECK_THAT(m0.M[1][1], WithinAbs(1.0, 1e-10));
  CHECK_THAT(m0.disc, WithinAbs(2.0, 1e-10));

  auto m = monodromy(v, pi * pi / 2.0);
  CHECK_THAT(m.disc, WithinAbs(-2.0, 1e-9));
}

TEST_CASE("Wronskian: det M = 1") {
  auto free = PeriodicPotential::preset("free");
  auto mat = PeriodicPotential::preset("mathieu5");
  for (double lam : {-3.0, 0.0, 1.7, 25.0, 120.0}) {
    CHECK_THAT(monodromy(free, lam).det(), WithinAbs(1.0, 1e-9));
    CHECK_THAT(monodromy(mat, lam).det(), WithinAbs(1.0, 1e-9));
  }
}

TEST_CASE("free discriminant matches 2cos(sqrt(2 lambda)) on [0,50]") {
  auto v = PeriodicPotential::preset("free");
  auto scan = discriminant_scan(v, 0.0, 50.0, 101);
  for (const auto& s : scan) CHECK_THAT(s.delta, WithinAbs(free_disc(s.lambda), 1e-8));
}

TEST_CASE("constant potential shifts the discriminant") {
  const double c = 2.3;
  auto v = PeriodicPotential::from_fourier(1, {{FreqVec{0, 0}, {c, 0.0}}});
  for (double lam : {0.0, 3.0, 11.0, 30.0}) {
    CHECK_THAT(monodromy(v, lam).disc, WithinAbs(free_disc(lam - c), 1e-8));
  }
}

TEST_CASE("dual-integrator cross-check at mathieu5") {
  auto v = PeriodicPotential::preset("mathieu5");
  for (double lam : {0.0, 10.0, 47.5}) {
    auto a = monodromy(v, lam, 1e-10, OdeScheme::dopri5);
    auto b = monodromy(v, lam, 1e-12, OdeScheme::fehlberg78);
    CHECK_THAT(a.disc, WithinAbs(b.disc, 1e-8));
    CHECK_THAT(a.disc_prime, WithinAbs(b.disc_prime, 1e-8));
  }
}

TEST_CASE("exact disc_prime agrees with finite differences") {
  auto v = PeriodicPotential::preset("mathieu5");
  for (double lam : {5.0, 40.0}) {
    const double h = 1e-5 * (1.0 + std::abs(lam));
    const double fd = (monodromy(v, lam + h).disc - monodromy(v, lam - h).disc) / (2 * h);
    CHECK_THAT(monodromy(v, lam).disc_prime, WithinAbs(fd, 1e-6 * (1.0 + std::abs(fd))));
  }
}

TEST_CASE("free band edges touch at k^2 pi^2 / 2") {
  auto v = PeriodicPotential::preset("free");
  BandTable1D table(v, 3);
  const auto& e = table.edges();
  REQUIRE(e.size() == 6);
  const double expect[6] = {0.0, pi * pi / 2, pi * pi / 2, 2 * pi * pi, 2 * pi * pi,
                            4.5 * pi * pi};
  for (int i = 0; i < 6; ++i) CHECK_THAT(e[i].lambda, WithinAbs(expect[i], 1e-7));
  CHECK_FALSE(e[0].coincident);
  for (int i = 1; i < 6; ++i) CHECK(e[i].coincident);
}

TEST_CASE("mathieu5 has 12 simple interlaced edges") {
  auto v = PeriodicPotential::preset("mathieu5");
  BandTable1D table(v, 6);
  const auto& e = table.edges();
  REQUIRE(e.size() == 12);
  for (const auto& edge : e) CHECK_FALSE(edge.coincident);
  for (int i = 0; i + 1 < 12; ++i) CHECK(e[i].lambda < e[i + 1].lambda);
  // gaps open: top of band n strictly below bottom of band n+1
  for (int n = 1; n < 6; ++n) CHECK(e[2 * n - 1].lambda < e[2 * n].lambda - 1e-6);
}

TEST_CASE("constant shift moves edges rigidly") {
  const double c = 1.5;
  auto v = PeriodicPotential::from_fourier(1, {{FreqVec{0, 0}, {c, 0.0}}});
  BandTable1D table(v, 2);
  const auto& e = table.edges();
  REQUIRE(e.size() == 4);
  CHECK_THAT(e[0].lambda, WithinAbs(c, 1e-8));
  CHECK_THAT(e[1].lambda, WithinAbs(pi * pi / 2 + c, 1e-7));
}

TEST_CASE("free band values are folded parabolas") {
  auto v = PeriodicPotential::preset("free");
  BandTable1D table(v, 2);
  auto p = table.band_value(1, 1.0);
  CHECK_THAT(p.rho, WithinAbs(0.5, 1e-8));
  CHECK_THAT(p.rho_p, WithinAbs(1.0, 1e-6));
  CHECK_THAT(p.rho_pp, WithinAbs(1.0, 1e-4));
  // band 2 on [0,pi] is the decreasing branch (2pi - xi)^2/2
  auto q = table.band_value(2, 1.0);
  CHECK_THAT(q.rho, WithinAbs(0.5 * (2 * pi - 1.0) * (2 * pi - 1.0), 1e-7));
  CHECK_THAT(q.rho_p, WithinAbs(-(2 * pi - 1.0), 1e-5));
}

TEST_CASE("band values: evenness and periodicity in xi") {
  auto v = PeriodicPotential::preset("mathieu5");
  BandTable1D table(v, 3);
  const double xi0 = 0.8;
  for (int n = 1; n <= 3; ++n) {
    auto a = table.band_value(n, xi0);
    auto b = table.band_value(n, 2 * pi - xi0);
    auto c = table.band_value(n, xi0 + 2 * pi);
    CHECK_THAT(b.rho, WithinAbs(a.rho, 1e-9));
    CHECK_THAT(b.rho_p, WithinAbs(-a.rho_p, 1e-8));
    CHECK_THAT(b.rho_pp, WithinAbs(a.rho_pp, 1e-5));
    CHECK_THAT(c.rho, WithinAbs(a.rho, 1e-9));
    CHECK_THAT(c.rho_p, WithinAbs(a.rho_p, 1e-8));
  }
}

TEST_CASE("rho' matches central finite differences away from endpoints") {
  auto v = PeriodicPotential::preset("mathieu5");
  BandTable1D table(v, 3);
  for (int n = 1; n <= 3; ++n) {
    for (double xi : {0.6, 1.5, 2.6}) {
      const double h = 1e-5;
      const double fd = (table.band_value(n, xi + h).rho - table.band_value(n, xi - h).rho) /
                        (2 * h);
      auto p = table.band_value(n, xi);
      CHECK_THAT(p.rho_p, WithinAbs(fd, 1e-5 * (1.0 + std::abs(fd))));
      // second difference needs a larger step: rho is solved to ~1e-12, so
      // h=1e-5 would amplify solver noise to 1e-2
      const double h2 = 1e-3;
      const double fd2 = (table.band_value(n, xi + h2).rho - 2 * p.rho +
                          table.band_value(n, xi - h2).rho) /
                         (h2 * h2);
      CHECK_THAT(p.rho_pp, WithinAbs(fd2, 1e-4 + 1e-4 * std::abs(fd2)));
    }
  }
}

TEST_CASE("band monotone on [0,pi]: increasing odd, decreasing even") {
  auto v = PeriodicPotential::preset("mathieu5");
  BandTable1D table(v, 4);
  for (int n = 1; n <= 4; ++n) {
    double prev = table.band_value(n, 0.0).rho;
    for (int i = 1; i <= 8; ++i) {
      const double cur = table.band_value(n, pi * i / 8).rho;
      if (n % 2 == 1) CHECK(cur > prev);
      else CHECK(cur < prev);
      prev = cur;
    }
  }
}

TEST_CASE("pi-lattice classification: free bands cross, mathieu bands do not") {
  auto free = PeriodicPotential::preset("free");
  BandTable1D tf(free, 2);
  auto pts = tf.classify_pi_lattice(1);
  REQUIRE(pts.size() == 2);
  CHECK_FALSE(pts[0].crossing);  // xi = 0: bottom of spectrum, critical
  CHECK(pts[1].crossing);        // xi = pi: bands 1-2 touch

  auto mat = PeriodicPotential::preset("mathieu5");
  BandTable1D tm(mat, 3);
  for (int n = 1; n <= 3; ++n) {
    for (const auto& pt : tm.classify_pi_lattice(n)) {
      CHECK_FALSE(pt.crossing);
      // discriminant identity at simple edges: Delta'(rho) * rho'' = 2 (-1)^(k+1)
      const double dp = monodromy(mat, pt.rho).disc_prime;
      const double expect = 2.0 * ((pt.k % 2 == 0) ? -1.0 : 1.0);
      CHECK_THAT(dp * pt.rho_pp, WithinAbs(expect, 1e-4));
      // cross-check rho'' against the interior limit of band_value
      const double h = 1e-4;
      const double xi = pt.k * pi;
      const double lo = tm.band_value(n, xi - h).rho;
      const double mid = pt.rho;
      const double hi = tm.band_value(n, xi + h).rho;
      CHECK_THAT((lo - 2 * mid + hi) / (h * h), WithinAbs(pt.rho_pp, 1e-2 * (1 + std::abs(pt.rho_pp))));
    }
  }
}

TEST_CASE("invalid inputs are rejected") {
  auto v2 = PeriodicPotential::from_cosines(2, {{FreqVec{1, 0}, 1.0}});
  CHECK_THROWS_AS(monodromy(v2, 1.0), std::invalid_argument);
  auto v = PeriodicPotential::preset("free");
  CHECK_THROWS_AS(discriminant_scan(v, 5.0, 1.0, 10), std::invalid_argument);
  BandTable1D table(v, 2);
  CHECK_THROWS_AS(table.band_value(5, 1.0), std::invalid_argument);
}
