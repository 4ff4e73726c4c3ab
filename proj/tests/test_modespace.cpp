#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "bloch/modespace.hpp"

using namespace bloch;
using Catch::Matchers::WithinAbs;

namespace {
const double pi = std::numbers::pi;

int grid_for(double eps, double L, int refine = 1) {
  int n = 2;
  while (L / n >= eps / 4) n *= 2;
  return n * refine;
}

// carrier frequencies must sit on the dual lattice (multiples of 2 pi eps / L
// in the scaled variable) or the box boundary introduces a phase jump; pi/4 is
// resonant for every dyadic eps with L = 4
const double xi_res = pi / 4;
const double sig = 0.35;
}  // namespace

TEST_CASE("wavefield invariants are enforced") {
  CHECK_NOTHROW(WaveField(256, 4.0, 0.125));
  CHECK_THROWS_AS(WaveField(200, 4.0, 0.125), std::invalid_argument);  // not power of 2
  CHECK_THROWS_AS(WaveField(64, 4.0, 0.125), std::invalid_argument);   // dx too coarse
  CHECK_THROWS_AS(WaveField(256, 4.1, 0.125), std::invalid_argument);  // L/eps not integer
}

TEST_CASE("field save/load round trip") {
  auto psi = gaussian_packet(256, 4.0, 0.125, 0.5, 0.5);
  psi.time = 0.25;
  const std::string path = "/tmp/test_field.c64";
  save_field(psi, path);
  auto back = load_field(path);
  CHECK(back.N_g == psi.N_g);
  CHECK_THAT(back.eps, WithinAbs(psi.eps, 1e-15));
  CHECK_THAT(back.time, WithinAbs(psi.time, 1e-15));
  CHECK(psi.l2_distance(back) < 1e-6);  // complex64 payload
}

TEST_CASE("hs_eps_norm: quadrature, modulation, homogeneity") {
  auto psi = gaussian_packet(512, 4.0, 0.0625, 0.0, 0.4);
  CHECK_THAT(hs_eps_norm(psi, 0.0), WithinAbs(psi.mass(), 1e-10));
  CHECK_THAT(psi.mass(), WithinAbs(1.0, 1e-8));  // unit-norm Gaussian

  const double xi0 = 1.2, s = 1.5;
  auto mod = gaussian_packet(512, 4.0, 0.0625, xi0, 0.4);
  const double expect = std::pow(1.0 + xi0 * xi0, s);
  CHECK(std::abs(hs_eps_norm(mod, s) - expect) < 0.05 * expect);

  auto scaled = mod;
  for (auto& v : scaled.values) v *= complexd{0.0, 2.0};
  CHECK_THAT(hs_eps_norm(scaled, s), WithinAbs(4.0 * hs_eps_norm(mod, s), 1e-9));
}

TEST_CASE("free decomposition: mode 1 is the first-cell truncation") {
  auto v = PeriodicPotential::preset("free");
  const double eps = 0.125, L = 4.0;
  ModeBasis basis(v, eps, L, 8, 4);
  auto psi = gaussian_packet(grid_for(eps, L, 2), L, eps, xi_res, sig);
  auto mc = decompose(psi, basis, 4);
  auto psi1 = recompose(mc, basis, {1});
  // spectral content sits at eps*xi ~ pi/4, inside (-pi, pi): mode 1 captures it
  CHECK(psi.l2_distance(psi1) < 1e-6);
  // Bessel
  double total = 0.0;
  for (int n = 1; n <= 4; ++n) total += mc.mode_mass(n);
  CHECK(total <= psi.mass() + 1e-8);
}

TEST_CASE("round trip and monotone tail for mathieu5 across eps") {
  auto v = PeriodicPotential::preset("mathieu5");
  const double L = 4.0;
  const int n_modes = 12;
  for (double eps : {0.125, 0.0625, 0.03125}) {
    ModeBasis basis(v, eps, L, 20, n_modes);
    auto psi = gaussian_packet(grid_for(eps, L, 2), L, eps, xi_res, sig);
    auto mc = decompose(psi, basis, n_modes);
    auto rec = recompose_all(mc, basis);
    CHECK(psi.l2_distance(rec) < 1e-6);
    double prev = std::numeric_limits<double>::infinity();
    for (int N : {1, 2, 4, 8, 12}) {
      const double t = tail_norm(psi, basis, N);
      CHECK(t <= prev + 1e-12);
      prev = t;
    }
    CHECK(prev < 1e-6);
  }
}

TEST_CASE("mode fields are mutually orthogonal") {
  auto v = PeriodicPotential::preset("mathieu5");
  const double eps = 0.125, L = 4.0;
  ModeBasis basis(v, eps, L, 20, 6);
  auto psi = gaussian_packet(grid_for(eps, L, 4), L, eps, xi_res, sig);
  auto mc = decompose(psi, basis, 6);
  std::vector<WaveField> parts;
  for (int n = 1; n <= 6; ++n) parts.push_back(recompose(mc, basis, {n}));
  for (int n = 0; n < 6; ++n)
    for (int m = n + 1; m < 6; ++m) CHECK(std::abs(inner(parts[n], parts[m])) < 1e-8);
}

TEST_CASE("single recomposed mode has zero tail") {
  auto v = PeriodicPotential::preset("mathieu5");
  const double eps = 0.125, L = 4.0;
  ModeBasis basis(v, eps, L, 20, 6);
  auto psi = gaussian_packet(grid_for(eps, L, 4), L, eps, xi_res, sig);
  auto mc = decompose(psi, basis, 6);
  auto psi3 = recompose(mc, basis, {3});
  CHECK(tail_norm(psi3, basis, 3) < 1e-10);
  // and re-decomposing it puts all its mass back in mode 3
  auto mc3 = decompose(psi3, basis, 6);
  CHECK_THAT(mc3.mode_mass(3), WithinAbs(psi3.mass(), 1e-10));
  for (int n : {1, 2, 4, 5, 6}) CHECK(mc3.mode_mass(n) < 1e-12);
}

TEST_CASE("gauge invariance of mode masses and densities") {
  auto v = PeriodicPotential::preset("mathieu5");
  const double eps = 0.125, L = 4.0;
  ModeBasis a(v, eps, L, 16, 4);
  ModeBasis b(v, eps, L, 16, 4);
  std::mt19937 rng(12345);
  b.randomize_gauge(rng);
  auto psi = gaussian_packet(grid_for(eps, L, 2), L, eps, xi_res, sig);
  auto ma = decompose(psi, a, 4);
  auto mb = decompose(psi, b, 4);
  for (int n = 1; n <= 4; ++n) CHECK_THAT(ma.mode_mass(n), WithinAbs(mb.mode_mass(n), 1e-10));
  auto pa = recompose(ma, a, {1});
  auto pb = recompose(mb, b, {1});
  for (int i = 0; i < pa.N_g; i += 17)
    CHECK_THAT(std::norm(pa.values[i]), WithinAbs(std::norm(pb.values[i]), 1e-10));
}

TEST_CASE("eps-oscillation profile: localization and monotonicity") {
  const double eps = 0.0625, L = 4.0;
  auto psi = gaussian_packet(grid_for(eps, L), L, eps, xi_res, sig);
  auto prof = eps_oscillation_profile(psi, {0.0, 0.5, 1.0, 1.5, 2.0, 3.0});
  for (std::size_t i = 1; i < prof.size(); ++i) CHECK(prof[i].second <= prof[i - 1].second + 1e-14);
  // R = 0 excludes only the DC slot (strict |zeta| > R)
  CHECK_THAT(prof[0].second, WithinAbs(psi.mass(), 1e-8));
  // carrier sits at eps*xi = pi/4; R = 2 is many spectral widths beyond it
  CHECK(prof[4].second < 1e-10);
  // a slow field has no eps-oscillation beyond its envelope width
  auto slow = gaussian_packet(grid_for(eps, L), L, eps, 0.0, sig);
  auto sp = eps_oscillation_profile(slow, {2.0});
  CHECK(sp[0].second < 1e-10);
}

TEST_CASE("frequency shift is exact and lowpass removes carriers") {
  const double eps = 0.125, L = 4.0;
  auto psi = gaussian_packet(grid_for(eps, L), L, eps, 0.0, sig);
  // modulate up by exactly 16 slots = frequency 16 * 2 pi / L = 8 pi
  auto up = shift_frequency(psi, 16);
  auto down = shift_frequency(up, -16);
  CHECK(psi.l2_distance(down) < 1e-12);
  // carrier at xi = 8 pi is wiped by a lowpass of width 2 pi
  auto lp = smooth_lowpass(up, 2 * pi);
  CHECK(lp.mass() < 1e-10);
  // a wide window passes the slow field untouched
  auto lp2 = smooth_lowpass(psi, 8 * pi);
  CHECK_THAT(lp2.mass(), WithinAbs(psi.mass(), 1e-8));
}
