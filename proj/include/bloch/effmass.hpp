#ifndef BLOCH_EFFMASS_HPP
#define BLOCH_EFFMASS_HPP

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bloch/hill.hpp"
#include "bloch/modespace.hpp"
#include "bloch/propagate.hpp"

namespace bloch {

enum class EffKind { scalar_point, pair_degenerate_q2, pair_degenerate_qgt2 };

/// A limiting model: scalar effective-mass Schrödinger equation at a critical
/// point (coefficient rho_n''(xi_c)/2), or a two-band system at a degenerate
/// crossing driven by the mean-symbol Hessian and (for q = 2) the gap symbol.
struct EffModel {
  EffKind kind = EffKind::scalar_point;
  int band = 1;          // n (pairs couple n and n+1)
  double center = 0.0;   // xi_c in Lambda_n, or sigma in Sigma_n
  double mass = 0.0;     // rho_n''(xi_c), or lambda''(sigma) for pairs
  std::function<double(double)> gap_symbol;  // eta -> g_n(sigma, eta); q = 2 only

  void validate() const {
    if (!std::isfinite(mass)) throw std::invalid_argument("EffModel: non-finite mass coefficient");
    if (kind == EffKind::pair_degenerate_q2) {
      if (!gap_symbol) throw std::invalid_argument("EffModel: q = 2 pair needs a gap symbol");
      if (std::abs(gap_symbol(0.0)) > 1e-12)
        throw std::invalid_argument("EffModel: gap symbol must vanish at 0");
      for (double eta : {0.25, 0.5, 1.0})
        if (gap_symbol(eta) < -1e-12)
          throw std::invalid_argument("EffModel: gap symbol must be nonnegative");
    } else if (gap_symbol) {
      throw std::invalid_argument("EffModel: gap symbol only enters the q = 2 pair model");
    }
  }
};

/// Scalar model at a 1-D critical point: verifies the gradient vanishes and
/// reads rho'' off the discriminant machinery.
inline EffModel scalar_point_model(const PeriodicPotential& V, int n, double xi_c,
                                   double grad_tol = 1e-6) {
  BandTable1D bands(V, n);
  auto bp = bands.band_value(n, xi_c);
  if (std::abs(bp.rho_p) > grad_tol * (1.0 + std::abs(bp.rho)))
    throw std::invalid_argument("scalar_point_model: xi_c is not a critical point of band " +
                                std::to_string(n));
  EffModel m;
  m.kind = EffKind::scalar_point;
  m.band = n;
  m.center = xi_c;
  m.mass = bp.rho_pp;
  m.validate();
  return m;
}

/// Mode-n projection, demodulation by e^{-i xi_c x / eps} (exact dual-slot
/// shift after snapping xi_c to the lattice), then a smooth low-pass of width
/// `width` in the original frequency variable: the weak-limit surrogate.
struct ProfileResult {
  WaveField profile;
  int shift_slots = 0;      // demodulation shift on the dual grid
  double snap_distance = 0; // |xi_c - snapped xi_c| in the scaled variable
};

inline ProfileResult extract_profile_scalar(const WaveField& psi0, const ModeBasis& basis, int n,
                                            double xi_c,
                                            double width = 8.0 * std::numbers::pi) {
  basis.check_compatible(psi0);
  auto mc = decompose(psi0, basis, n);
  // the weak-limit profile is the mode amplitude u_n itself, not the
  // recomposed physical mode (which would carry a second Bloch factor)
  WaveField mode(psi0.N_g, psi0.L, psi0.eps, psi0.time);
  mode.values = mc.u[n - 1];
  Fft1D fft(psi0.N_g);
  fft.backward(mode.values);
  const double tau = 2.0 * std::numbers::pi;
  const double slots_exact = xi_c * basis.P() / tau;
  ProfileResult res;
  res.shift_slots = static_cast<int>(std::llround(slots_exact));
  res.snap_distance = std::abs(xi_c - tau * res.shift_slots / basis.P());
  auto demod = shift_frequency(mode, -res.shift_slots);
  res.profile = smooth_lowpass(demod, width);
  return res;
}

/// Split-step solver for the scalar limit equation: Fourier multiplier
/// e^{-i dt (mass/2) xi^2} (kinetic (mass/2) D_x^2) and physical factor
/// e^{-i dt V_ext}; no stiff scale, dt unconstrained.
class ScalarEffSolver {
 public:
  explicit ScalarEffSolver(const EffModel& model) : model_(model) {
    if (model.kind != EffKind::scalar_point)
      throw std::invalid_argument("ScalarEffSolver: scalar_point models only");
    model_.validate();
  }
  explicit ScalarEffSolver(double rho_pp) {
    model_.kind = EffKind::scalar_point;
    model_.mass = rho_pp;
  }

  WaveField run(WaveField psi, double t_final, double dt,
                const std::vector<double>& vext_grid = {}, DensityRecord* rec = nullptr,
                long snap_every = 0) const {
    const long n = detail::step_count(t_final, dt);
    std::vector<complexd> kin(psi.N_g), half;
    for (int m = 0; m < psi.N_g; ++m) {
      const double xi = psi.xi(m);
      kin[m] = std::polar(1.0, -0.5 * dt * model_.mass * xi * xi);
    }
    if (!vext_grid.empty()) {
      if (static_cast<int>(vext_grid.size()) != psi.N_g)
        throw std::invalid_argument("run: external potential grid size mismatch");
      half = detail::half_vext_phase(vext_grid, dt);
    }
    Fft1D fft(psi.N_g);
    const double t0 = psi.time;
    if (rec) rec->append(psi);
    for (long s = 0; s < n; ++s) {
      if (!half.empty()) detail::apply_phase(psi.values, half);
      fft.forward(psi.values);
      detail::apply_phase(psi.values, kin);
      fft.backward(psi.values);
      if (!half.empty()) detail::apply_phase(psi.values, half);
      psi.time = t0 + (s + 1) * dt;
      if (rec && snap_every > 0 && ((s + 1) % snap_every == 0 || s == n - 1)) rec->append(psi);
    }
    return psi;
  }

 private:
  EffModel model_;
};

/// Periodic grid for the normal fiber of a crossing (plain coordinates, no
/// semiclassical bookkeeping).
struct FiberGrid {
  int n = 0;
  double L = 0.0;
  double dz() const { return L / n; }
  double z(int i) const { return -0.5 * L + dz() * i; }
  double eta(int m) const {
    const int s = m < n / 2 ? m : m - n;
    return 2.0 * std::numbers::pi * s / L;
  }
};

using CVec = std::vector<complexd>;

/// C^2-valued profile on the fiber grid with a purification weight.
struct PairProfile {
  CVec up;  // band-n component
  CVec dn;  // band-(n+1) component
  double weight = 1.0;

  double mass(double dz) const {
    double s = 0.0;
    for (const auto& v : up) s += std::norm(v);
    for (const auto& v : dn) s += std::norm(v);
    return s * dz;
  }
};

/// Two-band limit Hamiltonian at a degenerate crossing:
///   H = ((mass/2) eta^2 + V_ext(z)) Id - g(eta) J,  J = diag(1, -1),
/// so the band-n component sees (mass/2) eta^2 - g and the band-(n+1)
/// component (mass/2) eta^2 + g (mean symbol ± half gap). For q > 2 the gap
/// term is absent (pass an empty gap symbol). Split-step, unitary.
class PairEffSolver {
 public:
  PairEffSolver(const FiberGrid& grid, double hess_lambda,
                std::function<double(double)> gap_symbol = {},
                std::vector<double> vext_grid = {})
      : grid_(grid), hess_(hess_lambda), gap_(std::move(gap_symbol)),
        vext_(std::move(vext_grid)) {
    if (grid.n < 2 || (grid.n & (grid.n - 1)) != 0)
      throw std::invalid_argument("PairEffSolver: fiber grid size must be a power of two");
    if (!vext_.empty() && static_cast<int>(vext_.size()) != grid.n)
      throw std::invalid_argument("PairEffSolver: external potential grid size mismatch");
  }

  const FiberGrid& grid() const { return grid_; }

  PairProfile run(PairProfile p, double t_final, double dt) const {
    const long nsteps = detail::step_count(t_final, dt);
    std::vector<complexd> kup(grid_.n), kdn(grid_.n), half;
    for (int m = 0; m < grid_.n; ++m) {
      const double eta = grid_.eta(m);
      const double kin = 0.5 * hess_ * eta * eta;
      const double g = gap_ ? gap_(eta) : 0.0;
      kup[m] = std::polar(1.0, -dt * (kin - g));
      kdn[m] = std::polar(1.0, -dt * (kin + g));
    }
    if (!vext_.empty()) half = detail::half_vext_phase(vext_, dt);
    Fft1D fft(grid_.n);
    for (long s = 0; s < nsteps; ++s) {
      if (!half.empty()) {
        detail::apply_phase(p.up, half);
        detail::apply_phase(p.dn, half);
      }
      fft.forward(p.up);
      detail::apply_phase(p.up, kup);
      fft.backward(p.up);
      fft.forward(p.dn);
      detail::apply_phase(p.dn, kdn);
      fft.backward(p.dn);
      if (!half.empty()) {
        detail::apply_phase(p.up, half);
        detail::apply_phase(p.dn, half);
      }
    }
    return p;
  }

  /// Dense 2n x 2n Hamiltonian (ordering: band-n slots, then band-(n+1)
  /// slots) for the direct commutator oracle.
  Eigen::MatrixXcd dense_hamiltonian() const {
    const int n = grid_.n;
    Eigen::MatrixXcd F(n, n);
    const double tau = 2.0 * std::numbers::pi;
    for (int m = 0; m < n; ++m)
      for (int j = 0; j < n; ++j)
        F(m, j) = std::polar(1.0 / std::sqrt(static_cast<double>(n)), -tau * m * j / n);
    Eigen::VectorXd kup(n), kdn(n);
    for (int m = 0; m < n; ++m) {
      const double eta = grid_.eta(m);
      const double kin = 0.5 * hess_ * eta * eta;
      const double g = gap_ ? gap_(eta) : 0.0;
      kup(m) = kin - g;
      kdn(m) = kin + g;
    }
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
    H.topLeftCorner(n, n) = F.adjoint() * kup.asDiagonal() * F;
    H.bottomRightCorner(n, n) = F.adjoint() * kdn.asDiagonal() * F;
    if (!vext_.empty())
      for (int i = 0; i < n; ++i) {
        H(i, i) += vext_[i];
        H(n + i, n + i) += vext_[i];
      }
    return H;
  }

 private:
  FiberGrid grid_;
  double hess_;
  std::function<double(double)> gap_;
  std::vector<double> vext_;
};

/// Purify a positive Hermitian 2n x 2n density matrix into weighted vectors.
inline std::vector<PairProfile> purify(const Eigen::MatrixXcd& M0, const FiberGrid& grid,
                                       double weight_floor = 1e-12) {
  const int n = grid.n;
  if (M0.rows() != 2 * n || M0.cols() != 2 * n)
    throw std::invalid_argument("purify: matrix does not match the fiber grid");
  if ((M0 - M0.adjoint()).norm() > 1e-10 * (1.0 + M0.norm()))
    throw std::invalid_argument("purify: density matrix must be Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M0);
  const double top = std::max(es.eigenvalues().maxCoeff(), 0.0);
  std::vector<PairProfile> out;
  for (int j = 0; j < 2 * n; ++j) {
    const double w = es.eigenvalues()(j);
    if (w < -1e-10 * (1.0 + top))
      throw std::invalid_argument("purify: density matrix must be positive semidefinite");
    if (w <= weight_floor * (1.0 + top)) continue;
    PairProfile p;
    p.weight = w;
    p.up.assign(n, complexd{0, 0});
    p.dn.assign(n, complexd{0, 0});
    for (int i = 0; i < n; ++i) {
      p.up[i] = es.eigenvectors()(i, j);
      p.dn[i] = es.eigenvectors()(n + i, j);
    }
    out.push_back(std::move(p));
  }
  return out;
}

/// M = sum_j w_j |u_j><u_j| from the (possibly evolved) ensemble.
inline Eigen::MatrixXcd assemble_density(const std::vector<PairProfile>& ensemble,
                                         const FiberGrid& grid) {
  const int n = grid.n;
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
  Eigen::VectorXcd u(2 * n);
  for (const auto& p : ensemble) {
    for (int i = 0; i < n; ++i) {
      u(i) = p.up[i];
      u(n + i) = p.dn[i];
    }
    M += p.weight * (u * u.adjoint());
  }
  return M;
}

/// Explicit RK4 for the Heisenberg equation i dM/dt = [H, M] (direct oracle).
inline Eigen::MatrixXcd evolve_heisenberg(const Eigen::MatrixXcd& H, Eigen::MatrixXcd M,
                                          double t_final, double dt) {
  const long n = detail::step_count(t_final, dt);
  const complexd mi{0.0, -1.0};
  auto rhs = [&](const Eigen::MatrixXcd& X) { return (mi * (H * X - X * H)).eval(); };
  for (long s = 0; s < n; ++s) {
    const auto k1 = rhs(M);
    const auto k2 = rhs((M + 0.5 * dt * k1).eval());
    const auto k3 = rhs((M + 0.5 * dt * k2).eval());
    const auto k4 = rhs((M + dt * k3).eval());
    M += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return M;
}

/// Sum of |eigenvalues| of a Hermitian matrix (trace norm of a difference of
/// density matrices).
inline double trace_norm_hermitian(const Eigen::MatrixXcd& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (A + A.adjoint()));
  return es.eigenvalues().cwiseAbs().sum();
}

/// Sum of time-averaged densities of the evolved limit profiles.
inline double predict_density(const std::vector<DensityRecord>& profile_runs, double a, double b,
                              const std::function<double(double)>& phi) {
  double s = 0.0;
  for (const auto& r : profile_runs) s += time_averaged_density(r, a, b, phi);
  return s;
}

/// Place a slow envelope into Bloch mode n: the well-prepared data family
/// psi = phi_n(x/eps, eps D) u with u the envelope times an exact carrier.
inline WaveField prepare_mode_data(const ModeBasis& basis, int n, int N_g,
                                   const std::function<complexd(double)>& envelope,
                                   int carrier_slots = 0) {
  WaveField u(N_g, basis.L(), basis.eps());
  for (int i = 0; i < N_g; ++i) u.values[i] = envelope(u.x(i));
  if (carrier_slots != 0) u = shift_frequency(u, carrier_slots);
  std::vector<complexd> hat = u.values;
  Fft1D fft(N_g);
  fft.forward(hat);
  ModeCoefficients mc;
  mc.N_g = N_g;
  mc.L = basis.L();
  mc.eps = basis.eps();
  mc.u.assign(n, std::vector<complexd>(N_g, complexd{0, 0}));
  const int P = basis.P();
  for (int r = 0; r < P; ++r) {
    const int slot = (basis.signed_residue(r) + N_g) % N_g;
    mc.u[n - 1][slot] = hat[slot];
  }
  return recompose(mc, basis, {n});
}

/// Convergence harness for the scalar effective-mass limit: for each eps,
/// evolve the full problem (Bloch-basis propagator) and the limit model from
/// the extracted profile, and compare the (a, b)-time-averaged phi-densities.
struct ConvergenceRow {
  double eps;
  double full_value;
  double predicted;
  double err;
};

struct CompareOptions {
  int band = 1;
  double xi_c = 0.0;
  double L = 4.0;
  int K = 20;
  int n_modes = 12;
  int refine = 2;          // grid refinement over the minimal dx < eps/4 rule
  double dt = 1e-3;
  long snap_every = 10;
  double a = 0.0, b = 0.5;
  double lowpass_width = 8.0 * std::numbers::pi;
};

inline std::vector<ConvergenceRow> effmass_compare(
    const PeriodicPotential& V, const std::vector<double>& eps_list,
    const std::function<complexd(double)>& envelope, const std::function<double(double)>& vext_x,
    const std::function<double(double)>& phi, const CompareOptions& opt = {}) {
  EffModel model = V.is_zero() ? [] {
    EffModel m;
    m.kind = EffKind::scalar_point;
    m.mass = 1.0;
    return m;
  }()
                               : scalar_point_model(V, opt.band, opt.xi_c);
  std::vector<ConvergenceRow> rows;
  for (double eps : eps_list) {
    int N = 2;
    while (opt.L / N >= eps / 4) N *= 2;
    N *= opt.refine;
    ModeBasis basis(V, eps, opt.L, opt.K, opt.n_modes);
    const double tau = 2.0 * std::numbers::pi;
    // carrier e^{i xi_c x / eps} sits at dual slot xi_c P / (2 pi)
    const int carrier = static_cast<int>(std::llround(opt.xi_c * basis.P() / tau));
    auto psi0 = prepare_mode_data(basis, opt.band, N, envelope, carrier);
    std::vector<double> vg(N, 0.0);
    if (vext_x)
      for (int i = 0; i < N; ++i) vg[i] = vext_x(psi0.x(i));

    BlochPropagator bp(basis);
    DensityRecord full_rec;
    bp.run(psi0, opt.b, opt.dt, vg, &full_rec, opt.snap_every);
    const double full_value = time_averaged_density(full_rec, opt.a, opt.b, phi);

    auto prof = extract_profile_scalar(psi0, basis, opt.band, opt.xi_c, opt.lowpass_width);
    ScalarEffSolver solver(model);
    DensityRecord model_rec;
    solver.run(prof.profile, opt.b, opt.dt, vg, &model_rec, opt.snap_every);
    const double predicted = time_averaged_density(model_rec, opt.a, opt.b, phi);

    rows.push_back({eps, full_value, predicted, std::abs(full_value - predicted)});
  }
  return rows;
}

/// Two-band interaction harness: well-prepared data
/// psi = phi_n(x/eps, eps D)(e^{i xi1 x/eps} Phi1) + phi_{n+1}(...)(e^{i xi2 x/eps} Phi2),
/// demodulated overlap of the two mode projections against a smooth window,
/// versus the product-formula prediction c_0^n(s0) conj -> see below.
struct InteractionRow {
  double eps;
  complexd overlap;
  complexd predicted;
};

struct InteractionOptions {
  int band = 1;            // couples band and band + 1
  double sigma0 = 0.5 * std::numbers::pi;
  double xi1 = 0.5 * std::numbers::pi;
  double xi2 = 0.5 * std::numbers::pi;
  double L = 4.0;
  int K = 20;
  int refine = 2;
  double window_radius = 1.5;
  double lowpass_width = 8.0 * std::numbers::pi;
};

inline std::vector<InteractionRow> interaction_offdiagonal(
    const PeriodicPotential& V, const std::vector<double>& eps_list,
    const std::function<complexd(double)>& phi1, const std::function<complexd(double)>& phi2,
    const InteractionOptions& opt = {}) {
  const double tau = 2.0 * std::numbers::pi;
  const int n = opt.band;
  std::vector<InteractionRow> rows;
  for (double eps : eps_list) {
    int N = 2;
    while (opt.L / N >= eps / 4) N *= 2;
    N *= opt.refine;
    ModeBasis basis(V, eps, opt.L, opt.K, n + 1);
    const int P = basis.P();
    auto snap = [&](double xi, const char* which) {
      const double s = xi * P / tau;
      const int si = static_cast<int>(std::llround(s));
      if (std::abs(s - si) > 1e-9)
        throw std::invalid_argument(std::string("interaction_offdiagonal: ") + which +
                                    " is not on the exact-shift lattice for eps = " +
                                    std::to_string(eps));
      return si;
    };
    const int s0 = snap(opt.sigma0, "sigma0");
    const int s1 = snap(opt.xi1, "xi1");
    const int s2 = snap(opt.xi2, "xi2");

    // carrier e^{i xi x / eps} sits at dual slot xi * P / (2 pi)
    auto pa = prepare_mode_data(basis, n, N, phi1, s1);
    auto pb = prepare_mode_data(basis, n + 1, N, phi2, s2);
    WaveField psi(N, opt.L, eps);
    for (int i = 0; i < N; ++i) psi.values[i] = pa.values[i] + pb.values[i];

    auto mc = decompose(psi, basis, n + 1);
    auto pn = recompose(mc, basis, {n});
    auto pn1 = recompose(mc, basis, {n + 1});
    auto dn = shift_frequency(pn, -s0);
    auto dn1 = smooth_lowpass(shift_frequency(pn1, -s0), opt.lowpass_width);
    complexd overlap{0, 0};
    for (int i = 0; i < N; ++i)
      overlap += std::conj(dn.values[i]) * smooth_bump(psi.x(i), opt.window_radius) *
                 dn1.values[i];
    overlap *= psi.dx();

    // product formula: conj(c_0^n(sigma0)) c_0^{n+1}(sigma0) <Phi1, W Phi2>
    const int r0 = ((s0 % P) + P) % P;
    const complexd c1 = basis.coeff(n, 0, r0);
    const complexd c2 = basis.coeff(n + 1, 0, r0);
    complexd braket{0, 0};
    for (int i = 0; i < N; ++i) {
      const double x = psi.x(i);
      braket += std::conj(phi1(x)) * smooth_bump(x, opt.window_radius) * phi2(x);
    }
    braket *= psi.dx();
    const complexd carrier_gap =
        (s1 == s2) ? complexd{1, 0} : complexd{0, 0};  // mismatched carriers -> 0 in the limit
    rows.push_back({eps, overlap, std::conj(c1) * c2 * braket * carrier_gap});
  }
  return rows;
}

}  // namespace bloch

#endif  // BLOCH_EFFMASS_HPP
