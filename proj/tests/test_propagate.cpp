#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "bloch/propagate.hpp"

using namespace bloch;
using Catch::Matchers::WithinAbs;

namespace {
const double pi = std::numbers::pi;

int grid_for(double eps, double L, int refine = 1) {
  int n = 2;
  while (L / n >= eps / 4) n *= 2;
  return n * refine;
}

// carriers on the dual lattice (multiples of 2 pi eps / L), envelopes narrow
// enough that the box boundary is spectrally quiet
const double xi_res = pi / 4;
const double sig = 0.35;

WaveField analytic_free(const WaveField& psi0, double t) {
  WaveField out = psi0;
  Fft1D fft(psi0.N_g);
  fft.forward(out.values);
  for (int m = 0; m < psi0.N_g; ++m) {
    const double xi = psi0.xi(m);
    out.values[m] *= std::polar(1.0, -0.5 * t * xi * xi);
  }
  fft.backward(out.values);
  out.time = psi0.time + t;
  return out;
}
}  // namespace

TEST_CASE("free propagation is exact for both schemes") {
  auto v = PeriodicPotential::preset("free");
  const double eps = 0.125, L = 4.0, T = 0.1;
  auto psi0 = gaussian_packet(grid_for(eps, L), L, eps, xi_res, sig);
  auto exact = analytic_free(psi0, T);

  FourierSplitter fs(v, eps);
  auto pf = fs.run(psi0, T, 1e-3);
  CHECK(pf.l2_distance(exact) < 1e-10);
  CHECK_THAT(pf.time, WithinAbs(T, 1e-12));

  ModeBasis basis(v, eps, L, 8, 6);
  BlochPropagator bp(basis);
  auto pb = bp.run(psi0, T, 1e-2);
  CHECK(pb.l2_distance(exact) < 1e-8);
}

TEST_CASE("fourier_split rejects dt beyond the stiffness bound") {
  auto v = PeriodicPotential::preset("mathieu5");
  FourierSplitter fs(v, 0.125);
  auto psi = gaussian_packet(256, 4.0, 0.125, 0.0, sig);
  CHECK_THROWS_AS(fs.step(psi, 0.01), std::invalid_argument);
  CHECK_NOTHROW(fs.step(psi, 1e-3));
}

TEST_CASE("bloch_strang refuses to drop mass into the mode tail") {
  auto v = PeriodicPotential::preset("mathieu5");
  const double eps = 0.125, L = 4.0;
  ModeBasis tiny(v, eps, L, 20, 1);
  BlochPropagator bp(tiny);
  auto psi = gaussian_packet(grid_for(eps, L), L, eps, xi_res, sig);
  CHECK_THROWS_AS(bp.step(psi, 1e-3), std::runtime_error);
}

TEST_CASE("mass conservation") {
  auto v = PeriodicPotential::preset("mathieu5");
  const double eps = 0.125, L = 4.0;
  auto psi0 = gaussian_packet(grid_for(eps, L, 2), L, eps, xi_res, sig);
  std::vector<double> vg(psi0.N_g);
  for (int i = 0; i < psi0.N_g; ++i) vg[i] = smooth_bump(psi0.x(i), 1.0, 2.0);

  FourierSplitter fs(v, eps);
  auto pf = fs.run(psi0, 0.01, 1e-5, vg);
  CHECK(std::abs(pf.mass() - psi0.mass()) < 1e-10);

  ModeBasis basis(v, eps, L, 20, 12);
  BlochPropagator bp(basis);
  auto pb = bp.run(psi0, 0.5, 1e-3, vg);
  CHECK(std::abs(pb.mass() - psi0.mass()) < 1e-8);
}

TEST_CASE("time reversal with frozen external potential") {
  auto v = PeriodicPotential::preset("mathieu5");
  const double eps = 0.125, L = 4.0;
  auto psi0 = gaussian_packet(grid_for(eps, L, 2), L, eps, xi_res, sig);
  auto vext = [](double, double x) { return harmonic_window(x, 1.0); };

  FourierSplitter fs(v, eps);
  auto fwd = fs.step(psi0, 1e-3, vext);
  auto back = fs.step(fwd, -1e-3, vext);
  CHECK(psi0.l2_distance(back) < 1e-12);

  ModeBasis basis(v, eps, L, 20, 12);
  BlochPropagator bp(basis);
  auto bf = bp.step(psi0, 1e-2, vext);
  auto bb = bp.step(bf, -1e-2, vext);
  CHECK(psi0.l2_distance(bb) < 2e-6);  // bounded by the round-trip projection
}

TEST_CASE("mode populations freeze when V_ext vanishes") {
  auto v = PeriodicPotential::preset("mathieu5");
  const double L = 4.0;

  SECTION("bloch_strang, eps = 1/8") {
    const double eps = 0.125;
    ModeBasis basis(v, eps, L, 20, 12);
    BlochPropagator bp(basis);
    auto psi0 = gaussian_packet(grid_for(eps, L, 2), L, eps, xi_res, sig);
    auto m0 = mode_masses(psi0, basis, 12);
    auto psi = bp.run(psi0, 0.2, 5e-3);
    auto m1 = mode_masses(psi, basis, 12);
    for (int n = 0; n < 12; ++n) CHECK(std::abs(m1[n] - m0[n]) < 1e-8);
  }

  SECTION("fourier_split, eps = 1/4") {
    const double eps = 0.25;
    ModeBasis basis(v, eps, L, 20, 12);
    FourierSplitter fs(v, eps);
    auto psi0 = gaussian_packet(grid_for(eps, L, 2), L, eps, xi_res, sig);
    auto m0 = mode_masses(psi0, basis, 12);
    auto psi = fs.run(psi0, 0.01, 1e-6 * eps * eps);
    auto m1 = mode_masses(psi, basis, 12);
    for (int n = 0; n < 12; ++n) CHECK(std::abs(m1[n] - m0[n]) < 1e-8);
  }
}

TEST_CASE("cross-scheme agreement at eps = 1/4") {
  auto v = PeriodicPotential::preset("mathieu5");
  const double eps = 0.25, L = 4.0, T = 0.02;
  auto psi0 = gaussian_packet(grid_for(eps, L, 2), L, eps, xi_res, sig);
  std::vector<double> vg(psi0.N_g);
  for (int i = 0; i < psi0.N_g; ++i) vg[i] = harmonic_window(psi0.x(i), 1.0);

  ModeBasis basis(v, eps, L, 20, 12);
  BlochPropagator bp(basis);
  auto pb = bp.run(psi0, T, 1e-3, vg);

  FourierSplitter fs(v, eps);
  auto pf = fs.run(psi0, T, 1e-6 * eps * eps, vg);

  CHECK(pb.l2_distance(pf) < 1e-5);
}

TEST_CASE("time-averaged density: exactness and dispersal") {
  auto v = PeriodicPotential::preset("free");
  const double eps = 0.125, L = 4.0, T = 0.1;
  auto psi0 = gaussian_packet(grid_for(eps, L), L, eps, 0.0, sig);
  FourierSplitter fs(v, eps);
  DensityRecord rec;
  auto pf = fs.run(psi0, T, 1e-4, {}, &rec, 100);  // snapshot every 0.01

  // phi == 1 integrates the conserved mass
  const double tot = time_averaged_density(rec, 0.0, T, [](double) { return 1.0; });
  CHECK_THAT(tot, WithinAbs(T * psi0.mass(), 1e-8));

  // a window observable of a dispersing packet decreases snapshot to snapshot
  const double dx = L / rec.N_g;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < rec.times.size(); ++s) {
    double w = 0.0;
    for (int i = 0; i < rec.N_g; ++i) w += smooth_bump(rec.x(i), 0.5) * rec.densities[s][i] * dx;
    CHECK(w > 0.0);
    CHECK(w < prev + 1e-12);
    prev = w;
  }

  // closed-form free Gaussian at t = T: width^2 = sigma^2 + t^2 / sigma^2
  const double s2 = sig * sig + T * T / (sig * sig);
  for (int i = 0; i < pf.N_g; ++i) {
    const double x = pf.x(i);
    const double rho = std::exp(-x * x / s2) / std::sqrt(pi * s2);
    CHECK(std::abs(std::norm(pf.values[i]) - rho) < 1e-6);
  }
}

TEST_CASE("wigner: marginal identity and phase-space localization") {
  const double eps = 0.0625, L = 4.0;
  auto psi = gaussian_packet(grid_for(eps, L), L, eps, xi_res, sig);
  auto tab = wigner(psi);
  CHECK(wigner_marginal_error(tab, psi) < 1e-6);

  // mass of W near the carrier zeta = xi_res captures almost everything
  const double dx = psi.dx();
  double near = 0.0, total = 0.0;
  for (std::size_t i = 0; i < tab.x.size(); ++i)
    for (std::size_t m = 0; m < tab.xi.size(); ++m) {
      const double cell = tab.w[i][m].real() * dx * tab.dxi;
      total += cell;
      if (std::abs(tab.xi[m] - xi_res) < 0.5) near += cell;
    }
  CHECK_THAT(total, WithinAbs(psi.mass(), 1e-8));
  CHECK(near > 0.999 * total);
}

TEST_CASE("cross-wigner of disjoint band components vanishes with eps") {
  auto v = PeriodicPotential::preset("free");
  const double L = 4.0;
  auto window = [](double x) { return smooth_bump(x, 1.5); };
  auto fwin = [](double z) { return smooth_bump(z, 4.0); };
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {0.125, 0.03125}) {
    ModeBasis basis(v, eps, L, 8, 4);
    const int N = grid_for(eps, L);
    auto a = gaussian_packet(N, L, eps, pi / 4, sig);        // band-1 content
    auto b = gaussian_packet(N, L, eps, 3 * pi / 2, sig);    // band-2 content
    WaveField psi(N, L, eps);
    for (int i = 0; i < N; ++i)
      psi.values[i] = (a.values[i] + b.values[i]) / std::sqrt(2.0);
    auto mc = decompose(psi, basis, 2);
    auto p1 = recompose(mc, basis, {1});
    auto p2 = recompose(mc, basis, {2});
    auto tab = wigner_cross(p1, p2);
    complexd acc{0, 0};
    for (int i = 0; i < N; ++i)
      for (int m = 0; m < N; ++m) acc += tab.w[i][m] * window(tab.x[i]) * fwin(tab.xi[m]);
    const double val = std::abs(acc) * psi.dx() * tab.dxi;
    CHECK(val < prev);
    prev = val;
  }
  CHECK(prev < 1e-4);
}
