#ifndef BLOCH_MODESPACE_HPP
#define BLOCH_MODESPACE_HPP

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "bloch/fft.hpp"
#include "bloch/galerkin.hpp"
#include "bloch/wavefield.hpp"

namespace bloch {

/// Bloch fibers solved exactly at every reduced dual frequency of a given
/// (eps, L) box. The box invariant L/eps = P in Z makes the scaled dual grid
/// zeta_m = 2 pi m / P land on exactly P residues per 2 pi cell, so all mode
/// algebra (projections, propagator multipliers) uses cached exact fibers and
/// needs no interpolation.
class ModeBasis {
 public:
  ModeBasis(const PeriodicPotential& V, double eps, double L, int K, int n_modes)
      : eps_(eps), L_(L), K_(K), n_modes_(n_modes) {
    const double p = L / eps;
    P_ = static_cast<int>(std::llround(p));
    if (std::abs(p - P_) > 1e-9 * p)
      throw std::invalid_argument("ModeBasis: L/eps must be an integer");
    if (K < V.band_limit()) throw std::invalid_argument("ModeBasis: cutoff below band limit");
    fibers_.reserve(P_);
    for (int r = 0; r < P_; ++r) {
      const double zeta = 2.0 * std::numbers::pi * signed_residue(r) / P_;
      fibers_.push_back(solve_fiber(V, zeta, K, n_modes));
    }
  }

  double eps() const { return eps_; }
  double L() const { return L_; }
  int P() const { return P_; }
  int K() const { return K_; }
  int n_modes() const { return n_modes_; }

  /// residue r in [0, P) -> signed residue in [-P/2, P/2)
  int signed_residue(int r) const { return r < (P_ + 1) / 2 ? r : r - P_; }

  /// decomposition of a signed dual index: m = r_signed + k' P
  struct CellIndex {
    int residue;  // in [0, P)
    int k;        // integer cell shift
  };
  CellIndex cell(int m_signed) const {
    int r = ((m_signed % P_) + P_) % P_;
    const int k = (m_signed - signed_residue(r)) / P_;
    return {r, k};
  }

  const BlochFiber& fiber(int residue) const { return fibers_.at(residue); }

  /// c_j^n at the reduced frequency of the given residue (n is 1-based)
  complexd coeff(int n, int j, int residue) const {
    if (std::abs(j) > K_) return complexd{0, 0};
    return fibers_[residue].coeff(n - 1, FreqVec{j, 0});
  }

  /// rho_n at the scaled dual frequency of signed index m (periodicity exact)
  double energy(int n, int m_signed) const {
    return fibers_[cell(m_signed).residue].energies.at(n - 1);
  }

  void check_compatible(const WaveField& psi) const {
    if (std::abs(psi.eps - eps_) > 1e-12 || std::abs(psi.L - L_) > 1e-12)
      throw std::invalid_argument("ModeBasis: field does not match basis box/eps");
  }

  /// Re-randomize fiber gauges (testing utility: physical outputs must not move).
  template <class Rng>
  void randomize_gauge(Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    for (auto& f : fibers_)
      for (auto& w : f.waves) w *= std::polar(1.0, u(rng));
  }

 private:
  double eps_, L_;
  int K_, n_modes_, P_;
  std::vector<BlochFiber> fibers_;
};

/// Scaled-frequency content of each retained mode: u_n over FFT slots. The
/// amplitude of mode n at a reduced frequency zeta_red is the inner product of
/// the dual-grid fiber {psi_hat[r + kP]}_k against the Bloch coefficient
/// vector, stored at the slot of zeta_red itself; u_n is therefore supported
/// on the central P slots (|eps xi| < pi).
struct ModeCoefficients {
  int N_g = 0;
  double L = 0.0, eps = 0.0, time = 0.0;
  std::vector<std::vector<complexd>> u;  // [mode][slot]

  double mode_mass(int n) const {
    double s = 0.0;
    for (const auto& v : u.at(n - 1)) s += std::norm(v);
    return s * (L / N_g);
  }
};

inline ModeCoefficients decompose(const WaveField& psi, const ModeBasis& basis, int N) {
  psi.validate();
  basis.check_compatible(psi);
  if (N > basis.n_modes()) throw std::invalid_argument("decompose: N exceeds retained modes");
  std::vector<complexd> hat = psi.values;
  Fft1D fft(psi.N_g);
  fft.forward(hat);
  ModeCoefficients mc;
  mc.N_g = psi.N_g;
  mc.L = psi.L;
  mc.eps = psi.eps;
  mc.time = psi.time;
  mc.u.assign(N, std::vector<complexd>(psi.N_g, complexd{0, 0}));
  for (int m = 0; m < psi.N_g; ++m) {
    const auto ci = basis.cell(psi.freq_index(m));
    const int slot = (basis.signed_residue(ci.residue) + psi.N_g) % psi.N_g;
    for (int n = 1; n <= N; ++n)
      mc.u[n - 1][slot] += std::conj(basis.coeff(n, ci.k, ci.residue)) * hat[m];
  }
  return mc;
}

/// Inverse of decompose on its range: psi_hat[r + kP] += c_k^n(zeta_red) u_n
/// (exact index shifts). `subset` lists 1-based mode indices.
inline WaveField recompose(const ModeCoefficients& mc, const ModeBasis& basis,
                           const std::vector<int>& subset) {
  WaveField out(mc.N_g, mc.L, mc.eps, mc.time);
  std::vector<complexd> hat(mc.N_g, complexd{0, 0});
  const int N = mc.N_g;
  const int P = basis.P();
  const int half = N / 2;
  const int kmax = half / P + 1;
  for (int n : subset) {
    if (n < 1 || n > static_cast<int>(mc.u.size()))
      throw std::invalid_argument("recompose: mode index outside decomposition");
    for (int r = 0; r < P; ++r) {
      const int sr = basis.signed_residue(r);
      const complexd amp = mc.u[n - 1][(sr + N) % N];
      if (std::norm(amp) == 0.0) continue;
      for (int k = -kmax; k <= kmax; ++k) {
        const int ts = sr + k * P;
        if (ts < -half || ts >= half) continue;
        const complexd c = basis.coeff(n, k, r);
        if (std::norm(c) == 0.0) continue;
        hat[(ts + N) % N] += c * amp;
      }
    }
  }
  Fft1D fft(N);
  fft.backward(hat);
  out.values = std::move(hat);
  return out;
}

inline WaveField recompose_all(const ModeCoefficients& mc, const ModeBasis& basis) {
  std::vector<int> subset(mc.u.size());
  for (std::size_t i = 0; i < subset.size(); ++i) subset[i] = static_cast<int>(i) + 1;
  return recompose(mc, basis, subset);
}

/// Discrete Plancherel sum with the (1+|eps xi|^2)^s weight.
inline double hs_eps_norm(const WaveField& psi, double s) {
  std::vector<complexd> hat = psi.values;
  Fft1D fft(psi.N_g);
  fft.forward(hat);
  double acc = 0.0;
  for (int m = 0; m < psi.N_g; ++m) {
    const double z = psi.zeta(m);
    acc += std::pow(1.0 + z * z, s) * std::norm(hat[m]);
  }
  return acc * psi.dx();
}

/// || psi - sum_{n <= N} psi_n ||_{L2}
inline double tail_norm(const WaveField& psi, const ModeBasis& basis, int N) {
  auto mc = decompose(psi, basis, N);
  auto rec = recompose_all(mc, basis);
  return psi.l2_distance(rec);
}

/// Spectral mass above scaled frequency R: sum_{|eps xi| > R} |psi_hat|^2.
inline std::vector<std::pair<double, double>> eps_oscillation_profile(
    const WaveField& psi, const std::vector<double>& radii) {
  std::vector<complexd> hat = psi.values;
  Fft1D fft(psi.N_g);
  fft.forward(hat);
  std::vector<std::pair<double, double>> out;
  for (double R : radii) {
    double acc = 0.0;
    for (int m = 0; m < psi.N_g; ++m)
      if (std::abs(psi.zeta(m)) > R) acc += std::norm(hat[m]);
    out.push_back({R, acc * psi.dx()});
  }
  return out;
}

/// Smooth low-pass window in the ORIGINAL frequency variable: multiplier 1 on
/// |xi - xi_c| <= w/2, cosine-squared rolloff to zero at |xi - xi_c| = w.
inline WaveField smooth_lowpass(const WaveField& psi, double width, double xi_center = 0.0) {
  std::vector<complexd> hat = psi.values;
  Fft1D fft(psi.N_g);
  fft.forward(hat);
  for (int m = 0; m < psi.N_g; ++m) {
    const double t = std::abs(psi.xi(m) - xi_center) / width;
    double w;
    if (t <= 0.5) w = 1.0;
    else if (t >= 1.0) w = 0.0;
    else {
      const double c = std::cos(std::numbers::pi * (t - 0.5));
      w = c * c;
    }
    hat[m] *= w;
  }
  fft.backward(hat);
  WaveField out = psi;
  out.values = std::move(hat);
  return out;
}

/// Multiply by e^{i shift_slots * 2 pi x / L}: an exact rotation of dual slots.
inline WaveField shift_frequency(const WaveField& psi, int shift_slots) {
  std::vector<complexd> hat = psi.values;
  Fft1D fft(psi.N_g);
  fft.forward(hat);
  std::vector<complexd> rot(psi.N_g);
  for (int m = 0; m < psi.N_g; ++m)
    rot[((m + shift_slots) % psi.N_g + psi.N_g) % psi.N_g] = hat[m];
  fft.backward(rot);
  WaveField out = psi;
  out.values = std::move(rot);
  return out;
}

inline complexd inner(const WaveField& a, const WaveField& b) {
  if (a.N_g != b.N_g) throw std::invalid_argument("inner: grid mismatch");
  complexd s{0, 0};
  for (int i = 0; i < a.N_g; ++i) s += std::conj(a.values[i]) * b.values[i];
  return s * a.dx();
}

}  // namespace bloch

#endif  // BLOCH_MODESPACE_HPP
