#ifndef BLOCH_HILL_HPP
#define BLOCH_HILL_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "bloch/potential.hpp"

namespace bloch {

/// Fundamental-solution matrix of -1/2 f'' + V f = lambda f over one period,
/// together with its lambda-derivative from the variational equations.
struct Monodromy {
  double lambda = 0.0;
  std::array<std::array<double, 2>, 2> M{};        // M_lambda(1)
  std::array<std::array<double, 2>, 2> dM_dlambda{};
  double disc = 0.0;        // Delta(lambda) = tr M
  double disc_prime = 0.0;  // d Delta / d lambda

  double det() const { return M[0][0] * M[1][1] - M[0][1] * M[1][0]; }
};

enum class OdeScheme { dopri5, fehlberg78 };

namespace detail {

struct HillRhs {
  const PeriodicPotential* V;
  double lambda;
  void operator()(const std::array<double, 8>& s, std::array<double, 8>& ds, double y) const {
    const double w = 2.0 * (V->eval(y) - lambda);
    // f1, f1', f2, f2' and their lambda-derivatives g1, g1', g2, g2'
    ds[0] = s[1];
    ds[1] = w * s[0];
    ds[2] = s[3];
    ds[3] = w * s[2];
    ds[4] = s[5];
    ds[5] = w * s[4] - 2.0 * s[0];
    ds[6] = s[7];
    ds[7] = w * s[6] - 2.0 * s[2];
  }
};

template <class Stepper>
inline std::array<double, 8> integrate_hill(const PeriodicPotential& V, double lambda,
                                            double rtol, Stepper stepper) {
  namespace ode = boost::numeric::odeint;
  std::array<double, 8> s{1, 0, 0, 1, 0, 0, 0, 0};
  HillRhs rhs{&V, lambda};
  const double atol = rtol * 1e-2;
  try {
    ode::integrate_adaptive(ode::make_controlled(atol, rtol, stepper), rhs, s, 0.0, 1.0,
                            1e-3);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("monodromy: integrator step-size underflow at lambda=") +
                             std::to_string(lambda) + " (" + e.what() + ")");
  }
  return s;
}

}  // namespace detail

/// Integrate the augmented fundamental system from y=0 to y=1.
inline Monodromy monodromy(const PeriodicPotential& V, double lambda, double rtol = 1e-10,
                           OdeScheme scheme = OdeScheme::dopri5) {
  namespace ode = boost::numeric::odeint;
  if (V.dim() != 1) throw std::invalid_argument("monodromy: potential must be one-dimensional");
  std::array<double, 8> s;
  if (scheme == OdeScheme::dopri5) {
    s = detail::integrate_hill(V, lambda, rtol,
                               ode::runge_kutta_dopri5<std::array<double, 8>>());
  } else {
    s = detail::integrate_hill(V, lambda, rtol,
                               ode::runge_kutta_fehlberg78<std::array<double, 8>>());
  }
  Monodromy m;
  m.lambda = lambda;
  m.M = {{{s[0], s[2]}, {s[1], s[3]}}};
  m.dM_dlambda = {{{s[4], s[6]}, {s[5], s[7]}}};
  m.disc = s[0] + s[3];
  m.disc_prime = s[4] + s[7];
  return m;
}

struct DiscriminantSample {
  double lambda, delta, delta_prime;
};

inline std::vector<DiscriminantSample> discriminant_scan(const PeriodicPotential& V, double lo,
                                                         double hi, int n_samples,
                                                         double rtol = 1e-10) {
  if (!(lo < hi) || n_samples < 2) throw std::invalid_argument("discriminant_scan: empty range");
  std::vector<DiscriminantSample> out(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    const double lam = lo + (hi - lo) * i / (n_samples - 1);
    const Monodromy m = monodromy(V, lam, rtol);
    out[i] = {lam, m.disc, m.disc_prime};
  }
  return out;
}

/// One root of Delta = +/-2. `sign` is +1 for Delta=+2 edges, -1 for Delta=-2.
/// `coincident` marks members of a detected double root (touching bands).
struct BandEdge {
  double lambda = 0.0;
  int sign = 0;
  bool coincident = false;
};

struct BandPoint {
  double rho = 0.0;
  double rho_p = 0.0;
  double rho_pp = 0.0;
  bool endpoint_degenerate = false;  // xi at a touching-band endpoint: rho' indeterminate
};

struct PiLatticePoint {
  int k = 0;           // representative k*pi, k in {0,1}
  double xi = 0.0;
  bool crossing = false;  // double edge: member of Sigma; else critical point of rho_n
  double rho = 0.0;
  double rho_pp = 0.0;  // only for critical points, from the discriminant identity
};

/// 1-D band table: edges of the first n_bands bands plus band-function solves.
class BandTable1D {
 public:
  BandTable1D(PeriodicPotential V, int n_bands, double rtol = 1e-11)
      : V_(std::move(V)), rtol_(rtol) {
    if (n_bands < 1) throw std::invalid_argument("BandTable1D: n_bands must be >= 1");
    compute_edges(n_bands);
  }

  const PeriodicPotential& potential() const { return V_; }
  const std::vector<BandEdge>& edges() const { return edges_; }
  int n_bands() const { return static_cast<int>(edges_.size()) / 2; }

  double delta(double lambda) const { return monodromy(V_, lambda, rtol_).disc; }

  /// Band interval I_n (1-based n).
  std::pair<double, double> band_interval(int n) const {
    check_band(n);
    return {edges_[2 * n - 2].lambda, edges_[2 * n - 1].lambda};
  }

  /// Solve Delta(rho) = 2 cos(xi) on I_n; derivatives by implicit
  /// differentiation. xi is reduced to [0, pi] by periodicity and evenness.
  BandPoint band_value(int n, double xi) const {
    check_band(n);
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double x = std::fmod(xi, two_pi);
    if (x < 0) x += two_pi;
    double refl = 1.0;  // rho' picks a sign under xi -> 2pi - xi
    if (x > std::numbers::pi) {
      x = two_pi - x;
      refl = -1.0;
    }
    const double target = 2.0 * std::cos(x);
    auto [lo, hi] = band_interval(n);

    // Delta is monotone on I_n: decreasing (+2 -> -2) for n odd, increasing for n even.
    const double slope = (n % 2 == 1) ? -1.0 : 1.0;
    double a = lo, b = hi;
    Monodromy m;
    if (b - a < 1e-13 * (1.0 + std::abs(a))) {
      m = monodromy(V_, 0.5 * (a + b), rtol_);
    } else {
      double mid = 0.5 * (a + b);
      for (int it = 0; it < 200; ++it) {
        m = monodromy(V_, mid, rtol_);
        const double f = m.disc - target;
        if (std::abs(f) < 1e-12 * (1.0 + std::abs(target))) break;
        if (slope * f > 0) b = mid;  // e.g. increasing with value above target: root is left
        else a = mid;
        // Newton step if it stays inside the bracket, else bisect
        double nxt = mid - f / m.disc_prime;
        if (!(nxt > a && nxt < b) || m.disc_prime == 0.0) nxt = 0.5 * (a + b);
        if (std::abs(nxt - mid) < 1e-15 * (1.0 + std::abs(mid))) {
          mid = nxt;
          m = monodromy(V_, mid, rtol_);
          break;
        }
        mid = nxt;
      }
    }

    BandPoint p;
    p.rho = m.lambda;
    const double dp = m.disc_prime;
    const bool at_endpoint = (x < 1e-12 || std::numbers::pi - x < 1e-12);
    if (std::abs(dp) < 1e-7 * (1.0 + std::abs(disc_second(m.lambda)))) {
      if (at_endpoint) {
        p.endpoint_degenerate = true;
        return p;
      }
    }
    p.rho_p = refl * (-2.0 * std::sin(x)) / dp;
    const double dpp = disc_second(m.lambda);
    p.rho_pp = (-2.0 * std::cos(x) - dpp * p.rho_p * p.rho_p) / dp;
    return p;
  }

  /// Delta''(lambda) by central differences of the exact Delta'.
  double disc_second(double lambda) const {
    const double h = 1e-4 * (1.0 + std::abs(lambda));
    const Monodromy mp = monodromy(V_, lambda + h, rtol_);
    const Monodromy mm = monodromy(V_, lambda - h, rtol_);
    return (mp.disc_prime - mm.disc_prime) / (2.0 * h);
  }

  /// Partition of the pi-lattice representatives {0, pi} for band n into
  /// critical points of rho_n and crossing points.
  std::vector<PiLatticePoint> classify_pi_lattice(int n) const {
    check_band(n);
    std::vector<PiLatticePoint> out;
    for (int k = 0; k <= 1; ++k) {
      PiLatticePoint pt;
      pt.k = k;
      pt.xi = k * std::numbers::pi;
      // edge attained at xi = k*pi: for n odd rho_n increases on [0,pi]
      const bool lower = (n % 2 == 1) ? (k == 0) : (k == 1);
      const BandEdge& e = edges_[lower ? 2 * n - 2 : 2 * n - 1];
      pt.rho = e.lambda;
      pt.crossing = e.coincident;
      if (!pt.crossing) {
        const Monodromy m = monodromy(V_, e.lambda, rtol_);
        pt.rho_pp = 2.0 * ((k % 2 == 0) ? -1.0 : 1.0) / m.disc_prime;
      }
      out.push_back(pt);
    }
    return out;
  }

 private:
  void check_band(int n) const {
    if (n < 1 || 2 * n > static_cast<int>(edges_.size()))
      throw std::invalid_argument("BandTable1D: band index out of computed range");
  }

  void compute_edges(int n_bands) {
    const int needed = 2 * n_bands;
    const double lam0 = V_.min_value() - 0.5;  // Delta > 2 below inf V
    const double step = std::min(1.0, std::numbers::pi * std::numbers::pi / 4.0);
    const double budget = lam0 + 8.0 * (n_bands + 2) * (n_bands + 2);

    std::vector<Monodromy> samples;
    samples.push_back(monodromy(V_, lam0, rtol_));
    if (samples.front().disc <= 2.0)
      throw std::runtime_error("band_edges: discriminant not above 2 below inf V");

    double lam = lam0;
    std::vector<double> breakpoints{lam0};
    while (static_cast<int>(edges_.size()) < needed) {
      if (lam > budget)
        throw std::runtime_error("band_edges: failed to bracket all edges within lambda budget");
      const double next = lam + step;
      const Monodromy mn = monodromy(V_, next, rtol_);
      const Monodromy& mp = samples.back();
      if (mp.disc_prime * mn.disc_prime < 0) {
        const double ext = refine_extremum(lam, next);
        breakpoints.push_back(ext);
      }
      breakpoints.push_back(next);
      process_new_breakpoints(breakpoints);
      samples.push_back(mn);
      lam = next;
    }
    edges_.resize(needed);
    verify_interlacing();
  }

  // Keep a growing list of monotone-segment breakpoints; extract roots of
  // Delta = +/-2 segment by segment as they are completed.
  void process_new_breakpoints(std::vector<double>& bp) {
    std::sort(bp.begin(), bp.end());
    while (bp.size() >= 2) {
      const double a = bp[0], b = bp[1];
      extract_segment_roots(a, b);
      bp.erase(bp.begin());
    }
  }

  void extract_segment_roots(double a, double b) {
    const Monodromy ma = monodromy(V_, a, rtol_);
    const Monodromy mb = monodromy(V_, b, rtol_);
    for (const double t : {2.0, -2.0}) {
      if ((ma.disc - t) * (mb.disc - t) < 0) {
        const double r = solve_disc(a, b, t);
        push_edge(r, t);
      }
    }
    // tangency at the segment end (extremum grazing +/-2 from inside)
    maybe_touching(mb);
    if (edges_.empty()) maybe_touching(ma);
  }

  void maybe_touching(const Monodromy& m) {
    if (std::abs(m.disc_prime) > 1e-6) return;
    const double t = (m.disc > 0) ? 2.0 : -2.0;
    if (std::abs(m.disc - t) < 1e-8) {
      // double root: both edges coincide
      push_edge(m.lambda, t, true);
      push_edge(m.lambda, t, true);
    }
  }

  void push_edge(double lambda, double target, bool coincident = false) {
    for (const BandEdge& e : edges_)
      if (std::abs(e.lambda - lambda) < 1e-9 * (1.0 + std::abs(lambda)) && !coincident) return;
    BandEdge e;
    e.lambda = lambda;
    e.sign = target > 0 ? 1 : -1;
    e.coincident = coincident;
    if (!coincident) {
      const Monodromy m = monodromy(V_, lambda, rtol_);
      if (std::abs(m.disc_prime) < 1e-7 * (1.0 + std::abs(disc_second(lambda))))
        e.coincident = true;  // simple-looking root at a vanishing Delta': treat as touching
    }
    edges_.push_back(e);
    std::sort(edges_.begin(), edges_.end(),
              [](const BandEdge& x, const BandEdge& y) { return x.lambda < y.lambda; });
  }

  double refine_extremum(double a, double b) const {
    double fa = monodromy(V_, a, rtol_).disc_prime;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (a + b);
      const double fm = monodromy(V_, mid, rtol_).disc_prime;
      if (fa * fm <= 0) b = mid;
      else {
        a = mid;
        fa = fm;
      }
      if (b - a < 1e-12 * (1.0 + std::abs(a))) break;
    }
    return 0.5 * (a + b);
  }

  double solve_disc(double a, double b, double target) const {
    Monodromy ma = monodromy(V_, a, rtol_);
    double fa = ma.disc - target;
    double mid = 0.5 * (a + b);
    for (int it = 0; it < 200; ++it) {
      const Monodromy m = monodromy(V_, mid, rtol_);
      const double f = m.disc - target;
      if (f == 0.0) return mid;
      if (fa * f < 0) b = mid;
      else {
        a = mid;
        fa = f;
      }
      double nxt = mid - f / m.disc_prime;
      if (!(nxt > a && nxt < b) || m.disc_prime == 0.0) nxt = 0.5 * (a + b);
      if (std::abs(nxt - mid) < 1e-14 * (1.0 + std::abs(mid))) return nxt;
      mid = nxt;
    }
    return mid;
  }

  void verify_interlacing() const {
    // sign pattern +, -, -, +, +, -, -, + ... and non-decreasing lambdas
    for (std::size_t i = 0; i + 1 < edges_.size(); ++i)
      if (edges_[i + 1].lambda < edges_[i].lambda - 1e-9)
        throw std::runtime_error("band_edges: interlacing violated (unordered edges)");
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      const int expected = (((i + 1) / 2) % 2 == 0) ? 1 : -1;
      if (edges_[i].sign != expected)
        throw std::runtime_error("band_edges: interlacing violated (sign pattern)");
    }
  }

  PeriodicPotential V_;
  double rtol_;
  std::vector<BandEdge> edges_;
};

}  // namespace bloch

#endif  // BLOCH_HILL_HPP
