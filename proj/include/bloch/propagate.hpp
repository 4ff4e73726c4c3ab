#ifndef BLOCH_PROPAGATE_HPP
#define BLOCH_PROPAGATE_HPP

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "bloch/fft.hpp"
#include "bloch/modespace.hpp"
#include "bloch/wavefield.hpp"

namespace bloch {

/// External potential as a closure of (t, x); empty function means zero.
using VextFn = std::function<double(double, double)>;

/// Smooth compactly supported bump, value `amp` at 0, support |x| < radius.
inline double smooth_bump(double x, double radius = 1.0, double amp = 1.0) {
  const double s = x / radius;
  if (std::abs(s) >= 1.0) return 0.0;
  return amp * std::exp(1.0 - 1.0 / (1.0 - s * s));
}

/// Harmonic well x^2/2 with a smooth rolloff to zero on radius <= |x| <= 2 radius.
inline double harmonic_window(double x, double radius = 1.0) {
  const double ax = std::abs(x);
  if (ax >= 2.0 * radius) return 0.0;
  double w = 1.0;
  if (ax > radius) {
    const double c = std::cos(0.5 * std::numbers::pi * (ax - radius) / radius);
    w = c * c;
  }
  return 0.5 * x * x * w;
}

/// Sample a (t, x) potential on the field's grid at a fixed time.
inline std::vector<double> sample_vext(const VextFn& vext, const WaveField& psi, double t) {
  std::vector<double> g(psi.N_g, 0.0);
  if (vext)
    for (int i = 0; i < psi.N_g; ++i) g[i] = vext(t, psi.x(i));
  return g;
}

/// |psi|^2 snapshots on the grid.
struct DensityRecord {
  int N_g = 0;
  double L = 0.0;
  std::vector<double> times;
  std::vector<std::vector<double>> densities;

  void append(const WaveField& psi) {
    if (times.empty()) {
      N_g = psi.N_g;
      L = psi.L;
    } else if (psi.N_g != N_g) {
      throw std::invalid_argument("DensityRecord: grid changed mid-run");
    }
    times.push_back(psi.time);
    std::vector<double> d(psi.N_g);
    for (int i = 0; i < psi.N_g; ++i) d[i] = std::norm(psi.values[i]);
    densities.push_back(std::move(d));
  }

  double x(int i) const { return -0.5 * L + (L / N_g) * i; }
};

/// Trapezoid in t over snapshots with t in [a, b], grid quadrature in x.
inline double time_averaged_density(const DensityRecord& rec, double a, double b,
                                    const std::function<double(double)>& phi) {
  if (!(a < b)) throw std::invalid_argument("time_averaged_density: need a < b");
  std::vector<std::pair<double, double>> samples;  // (t, integral of phi * density)
  const double dx = rec.L / rec.N_g;
  for (std::size_t s = 0; s < rec.times.size(); ++s) {
    const double t = rec.times[s];
    if (t < a - 1e-12 || t > b + 1e-12) continue;
    double v = 0.0;
    for (int i = 0; i < rec.N_g; ++i) v += phi(rec.x(i)) * rec.densities[s][i];
    samples.push_back({t, v * dx});
  }
  if (samples.size() < 2)
    throw std::invalid_argument("time_averaged_density: fewer than two snapshots in [a, b]");
  double acc = 0.0;
  for (std::size_t s = 1; s < samples.size(); ++s)
    acc += 0.5 * (samples[s].second + samples[s - 1].second) *
           (samples[s].first - samples[s - 1].first);
  return acc;
}

namespace detail {

inline void apply_phase(std::vector<complexd>& v, const std::vector<complexd>& ph) {
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= ph[i];
}

inline std::vector<complexd> half_vext_phase(const std::vector<double>& grid, double dt) {
  std::vector<complexd> ph(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) ph[i] = std::polar(1.0, -0.5 * dt * grid[i]);
  return ph;
}

inline long step_count(double t_final, double dt) {
  const long n = std::lround(t_final / dt);
  if (n < 1 || std::abs(n * dt - t_final) > 1e-9 * std::max(1.0, std::abs(t_final)))
    throw std::invalid_argument("run: t_final must be a positive integer multiple of dt");
  return n;
}

}  // namespace detail

/// Naive reference scheme: symmetric split-step Fourier for
/// i dpsi/dt = -1/2 psi'' + eps^{-2} V_per(x/eps) psi + V_ext(t,x) psi.
/// Kept as a cross-check oracle at the largest eps; the dt <= 0.1 eps^2 bound
/// controls the phase accuracy of the stiff eps^{-2} factor.
class FourierSplitter {
 public:
  FourierSplitter(const PeriodicPotential& V, double eps) : V_(V), eps_(eps) {
    if (V.dim() != 1) throw std::invalid_argument("FourierSplitter: 1-D potentials only");
  }

  double dt_max() const { return 0.1 * eps_ * eps_; }

  /// e^{-i dt xi^2 / 2} multiplier over FFT slots.
  std::vector<complexd> kinetic_phase(const WaveField& psi, double dt) const {
    std::vector<complexd> ph(psi.N_g);
    for (int m = 0; m < psi.N_g; ++m) {
      const double xi = psi.xi(m);
      ph[m] = std::polar(1.0, -0.5 * dt * xi * xi);
    }
    return ph;
  }

  /// Stiff part eps^{-2} V_per(x/eps) sampled on the grid.
  std::vector<double> stiff_grid(const WaveField& psi) const {
    std::vector<double> g(psi.N_g, 0.0);
    const double inv2 = 1.0 / (eps_ * eps_);
    if (!V_.is_zero())
      for (int i = 0; i < psi.N_g; ++i) g[i] = inv2 * V_.eval(psi.x(i) / eps_);
    return g;
  }

  /// One Strang step: half potential, full kinetic, half potential.
  WaveField step(const WaveField& psi, double dt, const VextFn& vext = {}) const {
    check_dt(dt);
    WaveField out = psi;
    auto pot = stiff_grid(psi);
    if (vext) {
      const double tm = psi.time + 0.5 * dt;
      for (int i = 0; i < psi.N_g; ++i) pot[i] += vext(tm, psi.x(i));
    }
    detail::apply_phase(out.values, detail::half_vext_phase(pot, dt));
    Fft1D fft(psi.N_g);
    fft.forward(out.values);
    detail::apply_phase(out.values, kinetic_phase(psi, dt));
    fft.backward(out.values);
    detail::apply_phase(out.values, detail::half_vext_phase(pot, dt));
    out.time = psi.time + dt;
    return out;
  }

  /// Many steps with a time-independent external potential (sampled once).
  /// Interior half-potential factors are fused; snapshots, when requested,
  /// land on whole-step boundaries.
  WaveField run(WaveField psi, double t_final, double dt,
                const std::vector<double>& vext_grid = {}, DensityRecord* rec = nullptr,
                long snap_every = 0) const {
    check_dt(dt);
    const long n = detail::step_count(t_final, dt);
    auto pot = stiff_grid(psi);
    if (!vext_grid.empty()) {
      if (static_cast<int>(vext_grid.size()) != psi.N_g)
        throw std::invalid_argument("run: external potential grid size mismatch");
      for (int i = 0; i < psi.N_g; ++i) pot[i] += vext_grid[i];
    }
    const auto half = detail::half_vext_phase(pot, dt);
    std::vector<complexd> full(half.size());
    for (std::size_t i = 0; i < half.size(); ++i) full[i] = half[i] * half[i];
    const auto kin = kinetic_phase(psi, dt);
    Fft1D fft(psi.N_g);
    const double t0 = psi.time;
    if (rec) rec->append(psi);
    auto& a = psi.values;
    detail::apply_phase(a, half);
    for (long s = 0; s < n; ++s) {
      fft.forward(a);
      detail::apply_phase(a, kin);
      fft.backward(a);
      const bool last = (s == n - 1);
      const bool snap = rec && snap_every > 0 && ((s + 1) % snap_every == 0 || last);
      if (snap) {
        detail::apply_phase(a, half);
        psi.time = t0 + (s + 1) * dt;
        rec->append(psi);
        if (!last) detail::apply_phase(a, half);
      } else if (!last) {
        detail::apply_phase(a, full);
      } else {
        detail::apply_phase(a, half);
      }
    }
    psi.time = t0 + n * dt;
    return psi;
  }

 private:
  void check_dt(double dt) const {
    if (dt == 0.0) throw std::invalid_argument("fourier_split: dt must be nonzero");
    if (std::abs(dt) > dt_max() * (1.0 + 1e-12))
      throw std::invalid_argument("fourier_split: dt must satisfy |dt| <= 0.1 eps^2");
  }

  PeriodicPotential V_;
  double eps_;
};

/// Bloch-basis Strang scheme: the stiff periodic part is applied exactly as
/// per-mode phases e^{-i dt rho_n(eps xi) / eps^2} on the fiber projections
/// (dt unconstrained by eps); V_ext enters through physical-space half steps.
/// Refuses to step when the retained-mode tail would silently drop mass.
class BlochPropagator {
 public:
  explicit BlochPropagator(const ModeBasis& basis, double tail_tol = 1e-6)
      : basis_(&basis), tail_tol_(tail_tol) {}

  const ModeBasis& basis() const { return *basis_; }

  WaveField step(const WaveField& psi, double dt, const VextFn& vext = {}) const {
    basis_->check_compatible(psi);
    WaveField out = psi;
    std::vector<complexd> vhalf;
    if (vext) vhalf = detail::half_vext_phase(sample_vext(vext, psi, psi.time + 0.5 * dt), dt);
    if (!vhalf.empty()) detail::apply_phase(out.values, vhalf);
    Fft1D fft(psi.N_g);
    apply_band_phases(out.values, fft, mode_phases(dt));
    if (!vhalf.empty()) detail::apply_phase(out.values, vhalf);
    out.time = psi.time + dt;
    return out;
  }

  /// Many steps with a time-independent external potential.
  WaveField run(WaveField psi, double t_final, double dt,
                const std::vector<double>& vext_grid = {}, DensityRecord* rec = nullptr,
                long snap_every = 0) const {
    basis_->check_compatible(psi);
    const long n = detail::step_count(t_final, dt);
    std::vector<complexd> vhalf;
    if (!vext_grid.empty()) {
      if (static_cast<int>(vext_grid.size()) != psi.N_g)
        throw std::invalid_argument("run: external potential grid size mismatch");
      vhalf = detail::half_vext_phase(vext_grid, dt);
    }
    const auto ph = mode_phases(dt);
    Fft1D fft(psi.N_g);
    const double t0 = psi.time;
    if (rec) rec->append(psi);
    for (long s = 0; s < n; ++s) {
      if (!vhalf.empty()) detail::apply_phase(psi.values, vhalf);
      apply_band_phases(psi.values, fft, ph);
      if (!vhalf.empty()) detail::apply_phase(psi.values, vhalf);
      psi.time = t0 + (s + 1) * dt;
      if (rec && snap_every > 0 && ((s + 1) % snap_every == 0 || s == n - 1)) rec->append(psi);
    }
    return psi;
  }

 private:
  /// phases[n-1][r] = e^{-i dt rho_n(zeta_r) / eps^2}
  std::vector<std::vector<complexd>> mode_phases(double dt) const {
    const double inv2 = 1.0 / (basis_->eps() * basis_->eps());
    std::vector<std::vector<complexd>> ph(basis_->n_modes(),
                                          std::vector<complexd>(basis_->P()));
    for (int n = 1; n <= basis_->n_modes(); ++n)
      for (int r = 0; r < basis_->P(); ++r)
        ph[n - 1][r] = std::polar(1.0, -dt * basis_->fiber(r).energies.at(n - 1) * inv2);
    return ph;
  }

  void apply_band_phases(std::vector<complexd>& values, Fft1D& fft,
                         const std::vector<std::vector<complexd>>& ph) const {
    const int N = static_cast<int>(values.size());
    const int half = N / 2;
    const int P = basis_->P();
    const int NM = basis_->n_modes();
    const int kmax = half / P + 1;
    fft.forward(values);
    std::vector<complexd> out(N, complexd{0, 0});
    double total = 0.0, kept = 0.0;
    for (const auto& v : values) total += std::norm(v);
    std::vector<complexd> amp(NM);
    for (int r = 0; r < P; ++r) {
      const int sr = basis_->signed_residue(r);
      for (int n = 1; n <= NM; ++n) {
        complexd a{0, 0};
        for (int k = -kmax; k <= kmax; ++k) {
          const int ts = sr + k * P;
          if (ts < -half || ts >= half) continue;
          const complexd c = basis_->coeff(n, k, r);
          if (std::norm(c) == 0.0) continue;
          a += std::conj(c) * values[(ts + N) % N];
        }
        kept += std::norm(a);
        amp[n - 1] = ph[n - 1][r] * a;
      }
      for (int n = 1; n <= NM; ++n) {
        if (std::norm(amp[n - 1]) == 0.0) continue;
        for (int k = -kmax; k <= kmax; ++k) {
          const int ts = sr + k * P;
          if (ts < -half || ts >= half) continue;
          const complexd c = basis_->coeff(n, k, r);
          if (std::norm(c) == 0.0) continue;
          out[(ts + N) % N] += c * amp[n - 1];
        }
      }
    }
    const double tail = std::sqrt(std::max(0.0, total - kept));
    if (tail > tail_tol_ * std::sqrt(std::max(total, 1e-300)))
      throw std::runtime_error(
          "bloch_strang: retained-mode tail " + std::to_string(tail) +
          " exceeds tolerance (would silently drop mass); retain more modes");
    fft.backward(out);
    values = std::move(out);
  }

  const ModeBasis* basis_;
  double tail_tol_;
};

/// Mode masses along a run (population-freeze diagnostic).
inline std::vector<double> mode_masses(const WaveField& psi, const ModeBasis& basis, int N) {
  auto mc = decompose(psi, basis, N);
  std::vector<double> m(N);
  for (int n = 1; n <= N; ++n) m[n - 1] = mc.mode_mass(n);
  return m;
}

/// Discrete Wigner transform on the (x, zeta) grid, zeta = eps xi the scaled
/// frequency: W(x_i, zeta_m) = (dv / 2 pi) sum_j e^{i zeta_m v_j} C_i[j] with
/// C_i[j] = psi(x_i - eps v_j / 2) conj(psi(x_i + eps v_j / 2)), v_j = 2 dx j / eps.
/// The zeta-marginal recovers |psi|^2 exactly by construction.
struct WignerTable {
  std::vector<double> x;
  std::vector<double> xi;  // scaled frequency grid
  std::vector<std::vector<complexd>> w;  // [ix][ixi]
  double dxi = 0.0;

  /// integral of W over the frequency grid at fixed x index
  complexd marginal(int ix) const {
    complexd s{0, 0};
    for (const auto& v : w[ix]) s += v;
    return s * dxi;
  }
};

inline WignerTable wigner_cross(const WaveField& a, const WaveField& b) {
  if (a.N_g != b.N_g || std::abs(a.eps - b.eps) > 1e-12 || std::abs(a.L - b.L) > 1e-12)
    throw std::invalid_argument("wigner_cross: mismatched fields");
  const int N = a.N_g;
  const int half = N / 2;
  const double dv = 2.0 * a.dx() / a.eps;
  WignerTable tab;
  tab.dxi = 2.0 * std::numbers::pi / (N * dv);
  tab.x.resize(N);
  tab.xi.resize(N);
  for (int i = 0; i < N; ++i) tab.x[i] = a.x(i);
  for (int m = 0; m < N; ++m) tab.xi[m] = tab.dxi * (m - half);
  tab.w.assign(N, std::vector<complexd>(N));
  Fft1D fft(N);
  std::vector<complexd> c(N);
  const double scale = dv / (2.0 * std::numbers::pi) * std::sqrt(static_cast<double>(N));
  for (int i = 0; i < N; ++i) {
    for (int j = -half; j < half; ++j)
      c[(j + N) % N] = a.values[((i - j) % N + N) % N] * std::conj(b.values[((i + j) % N + N) % N]);
    fft.backward(c);  // unscaled DFT with e^{+2 pi i m j / N} up to 1/sqrt(N)
    for (int m = -half; m < half; ++m) tab.w[i][m + half] = scale * c[(m + N) % N];
  }
  return tab;
}

inline WignerTable wigner(const WaveField& psi) { return wigner_cross(psi, psi); }

/// max over x of |marginal(W) - |psi|^2| (lift-property diagnostic)
inline double wigner_marginal_error(const WignerTable& tab, const WaveField& psi) {
  double worst = 0.0;
  for (int i = 0; i < psi.N_g; ++i)
    worst = std::max(worst, std::abs(tab.marginal(i) - complexd{std::norm(psi.values[i]), 0.0}));
  return worst;
}

}  // namespace bloch

#endif  // BLOCH_PROPAGATE_HPP
