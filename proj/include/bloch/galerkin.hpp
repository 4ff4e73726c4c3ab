#ifndef BLOCH_GALERKIN_HPP
#define BLOCH_GALERKIN_HPP

#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "bloch/potential.hpp"

namespace bloch {

using Vec2 = std::array<double, 2>;

namespace detail {

inline int fiber_dim(int dim, int K) {
  const int m = 2 * K + 1;
  return dim == 1 ? m : m * m;
}

inline int freq_index(const FreqVec& k, int dim, int K) {
  if (dim == 1) return k[0] + K;
  return (k[0] + K) * (2 * K + 1) + (k[1] + K);
}

inline FreqVec index_freq(int idx, int dim, int K) {
  if (dim == 1) return {idx - K, 0};
  const int m = 2 * K + 1;
  return {idx / m - K, idx % m - K};
}

}  // namespace detail

/// Galerkin matrix of P(xi) = 1/2 |xi + D_y|^2 + V in the plane-wave basis
/// e^{2 pi i k.y}, |k|_inf <= K.
inline Eigen::MatrixXcd assemble(const PeriodicPotential& V, const Vec2& xi, int K) {
  if (K < V.band_limit()) throw std::invalid_argument("assemble: cutoff below potential band limit");
  const int dim = V.dim();
  const int N = detail::fiber_dim(dim, K);
  constexpr double tau = 2.0 * std::numbers::pi;
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(N, N);
  for (int i = 0; i < N; ++i) {
    const FreqVec k = detail::index_freq(i, dim, K);
    const double q0 = xi[0] + tau * k[0];
    const double q1 = (dim == 2) ? xi[1] + tau * k[1] : 0.0;
    H(i, i) = 0.5 * (q0 * q0 + q1 * q1);
  }
  for (int i = 0; i < N; ++i) {
    const FreqVec ki = detail::index_freq(i, dim, K);
    for (const auto& [dk, a] : V.coeffs()) {
      const FreqVec kj{ki[0] - dk[0], ki[1] - dk[1]};
      if (std::abs(kj[0]) > K || std::abs(kj[1]) > K) continue;
      H(i, detail::freq_index(kj, dim, K)) += a;
    }
  }
  return H;
}

/// One eigensolve of the fiber operator: sorted energies, gauge-fixed waves.
struct BlochFiber {
  Vec2 xi{0.0, 0.0};
  int dim = 1;
  int K = 0;
  std::vector<double> energies;            // nondecreasing, n_retained of them
  std::vector<Eigen::VectorXcd> waves;     // unit coefficient vectors c^n
  std::vector<double> residuals;           // ||H c - rho c||
  bool low_overlap = false;                // set by the grid continuity sweep

  complexd coeff(int n, const FreqVec& k) const {
    const int idx = detail::freq_index(k, dim, K);
    return waves.at(n)(idx);
  }
};

namespace detail {

/// Canonical per-fiber gauge: largest-modulus coefficient real positive,
/// ties broken by lexicographically smallest frequency.
inline void fix_gauge(Eigen::VectorXcd& c, int dim, int K) {
  int best = 0;
  double best_mod = -1.0;
  for (int i = 0; i < c.size(); ++i) {
    const double m = std::abs(c(i));
    if (m > best_mod * (1.0 + 1e-12)) {
      best = i;
      best_mod = m;
    } else if (m > best_mod * (1.0 - 1e-12)) {
      const FreqVec ki = index_freq(i, dim, K), kb = index_freq(best, dim, K);
      if (std::lexicographical_compare(ki.begin(), ki.end(), kb.begin(), kb.end())) best = i;
    }
  }
  const complexd z = c(best);
  if (std::abs(z) > 0) c *= std::conj(z) / std::abs(z);
}

}  // namespace detail

inline BlochFiber solve_fiber(const PeriodicPotential& V, const Vec2& xi, int K,
                              int n_retained) {
  const Eigen::MatrixXcd H = assemble(V, xi, K);
  if (n_retained > H.rows())
    throw std::invalid_argument("solve_fiber: n_retained exceeds fiber dimension");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("solve_fiber: eigensolver failed at xi = (" +
                             std::to_string(xi[0]) + ", " + std::to_string(xi[1]) + ")");
  BlochFiber f;
  f.xi = xi;
  f.dim = V.dim();
  f.K = K;
  for (int n = 0; n < n_retained; ++n) {
    f.energies.push_back(es.eigenvalues()(n));
    Eigen::VectorXcd c = es.eigenvectors().col(n);
    c.normalize();
    detail::fix_gauge(c, f.dim, K);
    f.waves.push_back(c);
    f.residuals.push_back((H * c - es.eigenvalues()(n) * c).norm());
  }
  return f;
}

inline BlochFiber solve_fiber(const PeriodicPotential& V, double xi, int K, int n_retained) {
  return solve_fiber(V, Vec2{xi, 0.0}, K, n_retained);
}

/// || P(xi)^k_power e^{2 pi i j.y} ||^2 via the Galerkin matrix.
inline double p4k_weight(const PeriodicPotential& V, const Vec2& xi, const FreqVec& j,
                         int k_power, int K) {
  if (k_power != 1 && k_power != 2) throw std::invalid_argument("p4k_weight: k_power in {1,2}");
  const Eigen::MatrixXcd H = assemble(V, xi, K);
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(H.rows());
  v(detail::freq_index(j, V.dim(), K)) = 1.0;
  for (int p = 0; p < k_power; ++p) v = H * v;
  return v.squaredNorm();
}

/// Band energies (and optionally fibers) tabulated on a uniform grid over one
/// 2 pi cell [-pi, pi)^d with a ghost layer, plus an off-grid evaluator.
/// Can also be built from synthetic band closures for landscape studies.
class BandGrid {
 public:
  using Evaluator = std::function<std::vector<double>(const Vec2&)>;

  static BandGrid from_potential(const PeriodicPotential& V, int n_retained, int resolution,
                                 int K) {
    if (resolution < 16) throw std::invalid_argument("BandGrid: resolution must be >= 16");
    BandGrid g(V.dim(), n_retained, resolution);
    g.eval_ = [V, K, n_retained](const Vec2& xi) {
      return solve_fiber(V, xi, K, n_retained).energies;
    };
    g.keep_fibers_ = true;
    g.fiber_eval_ = [V, K, n_retained](const Vec2& xi) {
      return solve_fiber(V, xi, K, n_retained);
    };
    g.tabulate();
    g.gauge_sweep();
    g.check_periodicity();
    return g;
  }

  static BandGrid synthetic(int dim, int n_modes, Evaluator rho, int resolution) {
    if (resolution < 16) throw std::invalid_argument("BandGrid: resolution must be >= 16");
    BandGrid g(dim, n_modes, resolution);
    g.eval_ = std::move(rho);
    g.tabulate();
    return g;
  }

  int dim() const { return dim_; }
  int n_retained() const { return n_retained_; }
  int resolution() const { return res_; }
  int ghost() const { return ghost_; }
  double spacing() const { return 2.0 * std::numbers::pi / res_; }

  /// Grid index range per dimension: [-ghost, res + ghost).
  double node_coord(int i) const { return -std::numbers::pi + spacing() * i; }

  Vec2 node(int i, int j = 0) const {
    return {node_coord(i), dim_ == 2 ? node_coord(j) : 0.0};
  }

  /// Tabulated rho_n (n is 1-based) at grid index (i, j).
  double rho(int n, int i, int j = 0) const { return values_[slot(i, j)].at(n - 1); }

  const BlochFiber& fiber(int i, int j = 0) const {
    if (!keep_fibers_) throw std::logic_error("BandGrid: synthetic grid has no fibers");
    return fibers_[slot(i, j)];
  }

  bool has_fibers() const { return keep_fibers_; }

  /// Off-grid band energies (exact re-solve or synthetic closure).
  std::vector<double> rho_eval(const Vec2& xi) const { return eval_(xi); }

  std::vector<std::pair<int, int>> low_overlap_nodes() const {
    std::vector<std::pair<int, int>> out;
    if (!keep_fibers_) return out;
    for (int i = -ghost_; i < res_ + ghost_; ++i)
      for (int j = jlo(); j < jhi(); ++j)
        if (fibers_[slot(i, j)].low_overlap) out.push_back({i, j});
    return out;
  }

 private:
  BandGrid(int dim, int n_retained, int resolution)
      : dim_(dim), n_retained_(n_retained), res_(resolution) {
    if (dim != 1 && dim != 2) throw std::invalid_argument("BandGrid: dim must be 1 or 2");
  }

  int jlo() const { return dim_ == 2 ? -ghost_ : 0; }
  int jhi() const { return dim_ == 2 ? res_ + ghost_ : 1; }

  int slot(int i, int j) const {
    const int ni = res_ + 2 * ghost_;
    const int ii = i + ghost_;
    const int jj = dim_ == 2 ? j + ghost_ : 0;
    if (ii < 0 || ii >= ni || (dim_ == 2 && (jj < 0 || jj >= ni)) || (dim_ == 1 && j != 0))
      throw std::out_of_range("BandGrid: grid index outside tabulated range");
    return dim_ == 1 ? ii : ii * ni + jj;
  }

  void tabulate() {
    const int ni = res_ + 2 * ghost_;
    const int total = dim_ == 1 ? ni : ni * ni;
    values_.resize(total);
    if (keep_fibers_) fibers_.resize(total);
    for (int i = -ghost_; i < res_ + ghost_; ++i) {
      for (int j = jlo(); j < jhi(); ++j) {
        const Vec2 xi = node(i, j);
        if (keep_fibers_) {
          BlochFiber f = fiber_eval_(xi);
          values_[slot(i, j)] = f.energies;
          fibers_[slot(i, j)] = std::move(f);
        } else {
          values_[slot(i, j)] = eval_(xi);
          if (static_cast<int>(values_[slot(i, j)].size()) < n_retained_)
            throw std::invalid_argument("BandGrid: evaluator returned too few modes");
        }
      }
    }
  }

  // Align phases along grid lines to maximize Re<c(xi_i), c(xi_{i+1})>;
  // nodes where some retained mode has |overlap| < 0.5 are flagged.
  void gauge_sweep() {
    auto align_pair = [&](BlochFiber& prev, BlochFiber& cur) {
      for (int n = 0; n < n_retained_; ++n) {
        const complexd ov = prev.waves[n].dot(cur.waves[n]);  // <prev, cur>
        if (std::abs(ov) < 0.5) cur.low_overlap = true;
        if (std::abs(ov) > 0) cur.waves[n] *= std::conj(ov) / std::abs(ov);
      }
    };
    for (int j = jlo(); j < jhi(); ++j)
      for (int i = -ghost_ + 1; i < res_ + ghost_; ++i)
        align_pair(fibers_[slot(i - 1, j)], fibers_[slot(i, j)]);
    if (dim_ == 2)
      for (int j = jlo() + 1; j < jhi(); ++j)
        align_pair(fibers_[slot(-ghost_, j - 1)], fibers_[slot(-ghost_, j)]);
  }

  void check_periodicity() {
    // rho is 2 pi Z^d periodic: compare ghost nodes against their main-cell images
    const double tol = 1e-6;
    for (int n = 1; n <= n_retained_; ++n) {
      for (int g = 1; g <= ghost_; ++g) {
        if (std::abs(rho(n, -g) - rho(n, res_ - g)) > tol * (1.0 + std::abs(rho(n, -g))))
          throw std::runtime_error("BandGrid: periodicity violated across ghost layer");
      }
    }
  }

  int dim_;
  int n_retained_;
  int res_;
  int ghost_ = 2;
  bool keep_fibers_ = false;
  Evaluator eval_;
  std::function<BlochFiber(const Vec2&)> fiber_eval_;
  std::vector<std::vector<double>> values_;
  std::vector<BlochFiber> fibers_;
};

}  // namespace bloch

#endif  // BLOCH_GALERKIN_HPP
