#ifndef BLOCH_LANDSCAPE_HPP
#define BLOCH_LANDSCAPE_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bloch/galerkin.hpp"

namespace bloch {

namespace geo {

/// Pointwise band quantities through the grid's off-grid evaluator.
inline double rho_at(const BandGrid& g, int n, const Vec2& xi) {
  return g.rho_eval(xi).at(n - 1);
}

inline double gap_at(const BandGrid& g, int n, const Vec2& xi) {
  const auto r = g.rho_eval(xi);
  return r.at(n) - r.at(n - 1);
}

/// half-gap g_n(sigma, eta) evaluated at sigma + eta
inline double half_gap_at(const BandGrid& g, int n, const Vec2& xi) {
  return 0.5 * gap_at(g, n, xi);
}

/// mean symbol lambda = (rho_n + rho_{n+1})/2
inline double lambda_at(const BandGrid& g, int n, const Vec2& xi) {
  const auto r = g.rho_eval(xi);
  return 0.5 * (r.at(n - 1) + r.at(n));
}

template <class F>
inline Eigen::VectorXd fd_gradient(F&& f, const Vec2& xi, int dim, double h) {
  Eigen::VectorXd grad(dim);
  for (int a = 0; a < dim; ++a) {
    Vec2 p = xi, m = xi;
    p[a] += h;
    m[a] -= h;
    grad(a) = (f(p) - f(m)) / (2.0 * h);
  }
  return grad;
}

template <class F>
inline Eigen::MatrixXd fd_hessian(F&& f, const Vec2& xi, int dim, double h) {
  Eigen::MatrixXd H(dim, dim);
  const double f0 = f(xi);
  for (int a = 0; a < dim; ++a) {
    Vec2 p = xi, m = xi;
    p[a] += h;
    m[a] -= h;
    H(a, a) = (f(p) - 2.0 * f0 + f(m)) / (h * h);
    for (int b = a + 1; b < dim; ++b) {
      Vec2 pp = xi, pm = xi, mp = xi, mm = xi;
      pp[a] += h; pp[b] += h;
      pm[a] += h; pm[b] -= h;
      mp[a] -= h; mp[b] += h;
      mm[a] -= h; mm[b] -= h;
      H(a, b) = H(b, a) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h * h);
    }
  }
  return H;
}

}  // namespace geo

struct Cluster {
  Vec2 rep{0.0, 0.0};                      // polished representative
  double objective = 0.0;                  // ||grad rho_n|| or band gap at rep
  std::vector<std::array<int, 2>> cells;   // grid indices of the detected cells
  int component_id = 0;
  bool polished = false;
};

struct HessianInfo {
  Eigen::MatrixXd hess;
  int rank = 0;
  bool constant_rank = true;
};

enum class CrossingKind { conical, degenerate, unresolved };

struct CrossingClass {
  CrossingKind kind = CrossingKind::unresolved;
  int q = 0;               // degeneracy order (1 reported for conical)
  double c = 0.0;          // lower-bound constant inf g / |eta|^q over samples
  double slope_min = 0.0;
  double slope_max = 0.0;
};

struct Verdict {
  enum class Status { holds, fails, untestable };
  Status status = Status::untestable;
  double margin = 0.0;
  Vec2 witness{0.0, 0.0};
  std::string reason;
};

namespace detail {

inline double fd_step(const BandGrid& g) { return g.has_fibers() ? 1e-4 : 1e-5; }

inline std::vector<Vec2> unit_fan(int dim, int count = 16) {
  std::vector<Vec2> fan;
  if (dim == 1) {
    fan.push_back({1.0, 0.0});
    fan.push_back({-1.0, 0.0});
  } else {
    for (int i = 0; i < count; ++i) {
      const double a = 2.0 * std::numbers::pi * i / count;
      fan.push_back({std::cos(a), std::sin(a)});
    }
  }
  return fan;
}

/// Local minima of a node objective over the main cell, clustered by adjacency.
template <class Obj>
inline std::vector<Cluster> grid_minima(const BandGrid& g, Obj&& obj, double keep_frac) {
  const int res = g.resolution();
  const int jmax = g.dim() == 2 ? res : 1;
  std::vector<std::vector<double>> val(res, std::vector<double>(jmax));
  double vmax = 0.0;
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < jmax; ++j) {
      val[i][j] = obj(i, j);
      vmax = std::max(vmax, val[i][j]);
    }
  auto at = [&](int i, int j) {
    // periodic wrap through the main cell
    return val[(i % res + res) % res][g.dim() == 2 ? (j % jmax + jmax) % jmax : 0];
  };
  std::vector<std::vector<bool>> cand(res, std::vector<bool>(jmax, false));
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < jmax; ++j) {
      bool minimal = at(i, j) <= at(i - 1, j) && at(i, j) <= at(i + 1, j);
      if (g.dim() == 2)
        minimal = minimal && at(i, j) <= at(i, j - 1) && at(i, j) <= at(i, j + 1);
      cand[i][j] = minimal && val[i][j] <= keep_frac * (vmax + 1e-300);
    }
  // flood-fill adjacency clustering (periodic)
  std::vector<Cluster> out;
  std::vector<std::vector<int>> label(res, std::vector<int>(jmax, -1));
  for (int i = 0; i < res; ++i)
    for (int j = 0; j < jmax; ++j) {
      if (!cand[i][j] || label[i][j] >= 0) continue;
      Cluster cl;
      cl.component_id = static_cast<int>(out.size());
      std::vector<std::array<int, 2>> stack{{i, j}};
      label[i][j] = cl.component_id;
      while (!stack.empty()) {
        auto [ci, cj] = stack.back();
        stack.pop_back();
        cl.cells.push_back({ci, cj});
        const int di[] = {1, -1, 0, 0}, dj[] = {0, 0, 1, -1};
        for (int t = 0; t < (g.dim() == 2 ? 4 : 2); ++t) {
          int ni = (ci + di[t] + res) % res;
          int nj = g.dim() == 2 ? (cj + dj[t] + jmax) % jmax : 0;
          if (cand[ni][nj] && label[ni][nj] < 0) {
            label[ni][nj] = cl.component_id;
            stack.push_back({ni, nj});
          }
        }
      }
      // representative: best cell
      auto best = *std::min_element(cl.cells.begin(), cl.cells.end(),
                                    [&](auto a, auto b) { return val[a[0]][a[1]] < val[b[0]][b[1]]; });
      cl.rep = g.node(best[0], best[1]);
      cl.objective = val[best[0]][best[1]];
      out.push_back(std::move(cl));
    }
  return out;
}

/// Compass-search minimization of a scalar objective (derivative-free).
template <class F>
inline Vec2 compass_minimize(F&& f, Vec2 x, int dim, double step0, double step_min) {
  double fx = f(x);
  double step = step0;
  while (step > step_min) {
    bool moved = false;
    for (int a = 0; a < dim; ++a) {
      for (double s : {step, -step}) {
        Vec2 y = x;
        y[a] += s;
        const double fy = f(y);
        if (fy < fx) {
          x = y;
          fx = fy;
          moved = true;
        }
      }
    }
    if (!moved) step *= 0.5;
  }
  return x;
}

}  // namespace detail

/// Critical set Lambda_n: cells where the tabulated gradient is locally
/// minimal, clustered by adjacency and polished by damped Newton on grad rho_n.
inline std::vector<Cluster> find_critical(const BandGrid& g, int n, double grad_tol) {
  const double h = g.spacing();
  const int dim = g.dim();
  auto grid_grad = [&](int i, int j) {
    double gx = (g.rho(n, i + 1, j) - g.rho(n, i - 1, j)) / (2 * h);
    double gy = dim == 2 ? (g.rho(n, i, j + 1) - g.rho(n, i, j - 1)) / (2 * h) : 0.0;
    return std::hypot(gx, gy);
  };
  auto clusters = detail::grid_minima(g, grid_grad, 0.25);
  const double hfd = detail::fd_step(g);
  auto rho_f = [&](const Vec2& xi) { return geo::rho_at(g, n, xi); };
  for (auto& cl : clusters) {
    Vec2 x = cl.rep;
    bool ok = false;
    for (int it = 0; it < 40; ++it) {
      Eigen::VectorXd grad = geo::fd_gradient(rho_f, x, dim, hfd);
      if (grad.norm() < grad_tol) {
        ok = true;
        break;
      }
      Eigen::MatrixXd H = geo::fd_hessian(rho_f, x, dim, hfd);
      // pseudo-inverse step handles rank-deficient Hessians (critical manifolds)
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(H, Eigen::ComputeFullU | Eigen::ComputeFullV);
      svd.setThreshold(1e-8);
      Eigen::VectorXd step = svd.solve(grad);
      double alpha = 1.0;
      bool improved = false;
      for (int back = 0; back < 12 && !improved; ++back, alpha *= 0.5) {
        Vec2 y = x;
        for (int a = 0; a < dim; ++a) y[a] -= alpha * step(a);
        if (geo::fd_gradient(rho_f, y, dim, hfd).norm() < grad.norm()) {
          x = y;
          improved = true;
        }
      }
      if (!improved) break;
    }
    cl.rep = x;
    cl.objective = geo::fd_gradient(rho_f, x, dim, hfd).norm();
    cl.polished = ok || cl.objective < grad_tol;
  }
  // drop clusters that failed to reach grad_tol entirely only if hopeless;
  // keep them flagged unpolished otherwise (caller decides)
  std::erase_if(clusters, [&](const Cluster& c) { return c.objective > 1e3 * grad_tol && !c.polished; });
  // a fold point where bands touch has zero symmetric difference but is a
  // crossing, not a critical point: exclude representatives sitting on a
  // closed gap to the neighboring band
  std::erase_if(clusters, [&](const Cluster& c) {
    const auto r = g.rho_eval(c.rep);
    const double scale = 1.0 + std::abs(r.at(n - 1));
    if (n < static_cast<int>(r.size()) && r.at(n) - r.at(n - 1) < 1e-7 * scale) return true;
    if (n >= 2 && r.at(n - 1) - r.at(n - 2) < 1e-7 * scale) return true;
    return false;
  });
  // deduplicate representatives modulo 2 pi
  constexpr double tau = 2.0 * std::numbers::pi;
  std::vector<Cluster> unique;
  for (auto& cl : clusters) {
    bool dup = false;
    for (const auto& u : unique) {
      double dx = std::remainder(cl.rep[0] - u.rep[0], tau);
      double dy = dim == 2 ? std::remainder(cl.rep[1] - u.rep[1], tau) : 0.0;
      if (std::hypot(dx, dy) < h) dup = true;
    }
    if (!dup) unique.push_back(std::move(cl));
  }
  return unique;
}

/// Finite-difference Hessian at the cluster representative, with rank from a
/// relative SVD threshold and rank-constancy across the cluster's cells.
inline HessianInfo hessian_rank(const BandGrid& g, int n, const Cluster& cluster,
                                double rank_tol) {
  const int dim = g.dim();
  auto rho_f = [&](const Vec2& xi) { return geo::rho_at(g, n, xi); };
  const double h = std::min(g.spacing(), 5e-3);
  auto rank_of = [&](const Vec2& xi, Eigen::MatrixXd* out) {
    Eigen::MatrixXd H = geo::fd_hessian(rho_f, xi, dim, h);
    if (out) *out = H;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(H);
    const auto& s = svd.singularValues();
    int r = 0;
    for (int i = 0; i < s.size(); ++i)
      if (s(i) > rank_tol * s(0)) ++r;
    return r;
  };
  HessianInfo info;
  info.rank = rank_of(cluster.rep, &info.hess);
  for (std::size_t c = 0; c < cluster.cells.size(); c += std::max<std::size_t>(1, cluster.cells.size() / 8)) {
    const auto& cell = cluster.cells[c];
    if (rank_of(g.node(cell[0], cell[1]), nullptr) != info.rank) info.constant_rank = false;
  }
  return info;
}

/// Crossing set Sigma_n: local minima of the band gap, polished by
/// derivative-free minimization; accepted only below gap_tol. Also audits H1:
/// no third band within gap_tol at an accepted representative.
inline std::vector<Cluster> find_crossings(const BandGrid& g, int n, double gap_tol,
                                           bool* h1_ok = nullptr) {
  if (n + 1 > g.n_retained()) throw std::invalid_argument("find_crossings: need band n+1");
  const int dim = g.dim();
  auto grid_gap = [&](int i, int j) { return g.rho(n + 1, i, j) - g.rho(n, i, j); };
  auto clusters = detail::grid_minima(g, grid_gap, 0.5);
  auto gap_f = [&](const Vec2& xi) { return geo::gap_at(g, n, xi); };
  if (h1_ok) *h1_ok = true;
  std::vector<Cluster> out;
  for (auto& cl : clusters) {
    Vec2 x = detail::compass_minimize(gap_f, cl.rep, dim, g.spacing(), 1e-12);
    const double gap = gap_f(x);
    if (gap < gap_tol) {
      cl.rep = x;
      cl.objective = gap;
      cl.polished = true;
      if (h1_ok && n + 2 <= g.n_retained()) {
        const auto r = g.rho_eval(x);
        if (r.at(n + 1) - r.at(n - 1) < gap_tol) *h1_ok = false;
      }
      out.push_back(std::move(cl));
    }
  }
  // deduplicate modulo 2 pi
  constexpr double tau = 2.0 * std::numbers::pi;
  std::vector<Cluster> unique;
  for (auto& cl : out) {
    bool dup = false;
    for (const auto& u : unique) {
      double dx = std::remainder(cl.rep[0] - u.rep[0], tau);
      double dy = dim == 2 ? std::remainder(cl.rep[1] - u.rep[1], tau) : 0.0;
      if (std::hypot(dx, dy) < g.spacing()) dup = true;
    }
    if (!dup) unique.push_back(std::move(cl));
  }
  for (std::size_t i = 0; i < unique.size(); ++i) unique[i].component_id = static_cast<int>(i);
  return unique;
}

/// Normal directions at a crossing representative: complement of the cluster's
/// tangent estimate (SVD of the cell point cloud); full fan for isolated points.
inline std::vector<Vec2> normal_directions(const BandGrid& g, const Cluster& cluster) {
  const int dim = g.dim();
  if (dim == 1 || cluster.cells.size() < 3) return detail::unit_fan(dim);
  Eigen::MatrixXd pts(cluster.cells.size(), 2);
  Vec2 mean{0.0, 0.0};
  for (std::size_t i = 0; i < cluster.cells.size(); ++i) {
    const Vec2 p = g.node(cluster.cells[i][0], cluster.cells[i][1]);
    pts(i, 0) = p[0];
    pts(i, 1) = p[1];
    mean[0] += p[0];
    mean[1] += p[1];
  }
  mean[0] /= cluster.cells.size();
  mean[1] /= cluster.cells.size();
  for (std::size_t i = 0; i < cluster.cells.size(); ++i) {
    pts(i, 0) -= mean[0];
    pts(i, 1) -= mean[1];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(pts, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (s(1) > 0.2 * s(0)) return detail::unit_fan(dim);  // blob, not a curve
  if (s(0) < 2.0 * g.spacing()) return detail::unit_fan(dim);  // effectively a point
  const Eigen::Vector2d nrm = svd.matrixV().col(1);
  return {Vec2{nrm(0), nrm(1)}, Vec2{-nrm(0), -nrm(1)}};
}

struct ClassifyOptions {
  double r0 = 0.5;
  int n_radii = 8;
  std::vector<Vec2> directions;  // empty: full fan / cluster normals
};

/// Dyadic log-log ray regression of the half-gap g_n(sigma + r eta).
inline CrossingClass classify_crossing(const BandGrid& g, int n, const Vec2& sigma,
                                       const ClassifyOptions& opts = {}) {
  auto dirs = opts.directions.empty() ? detail::unit_fan(g.dim()) : opts.directions;
  CrossingClass result;
  std::vector<double> slopes;
  double c_lin = std::numeric_limits<double>::infinity();
  std::vector<std::vector<std::pair<double, double>>> ray_samples;
  for (const auto& eta : dirs) {
    std::vector<std::pair<double, double>> pts;  // (log r, log g)
    for (int j = 0; j < opts.n_radii; ++j) {
      const double r = opts.r0 * std::pow(0.5, j);
      Vec2 xi = sigma;
      for (int a = 0; a < g.dim(); ++a) xi[a] += r * eta[a];
      const double gv = geo::gap_at(g, n, xi);  // 2 g_n, per the gap bound |rho_{n+1}-rho_n| >= c|eta|^q
      if (gv > 1e-13) pts.push_back({std::log(r), std::log(gv)});
    }
    if (pts.size() < 4) return result;  // unresolved: gap identically ~0 along ray
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [x, y] : pts) {
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double m = pts.size();
    slopes.push_back((m * sxy - sx * sy) / (m * sxx - sx * sx));
    ray_samples.push_back(std::move(pts));
  }
  result.slope_min = *std::min_element(slopes.begin(), slopes.end());
  result.slope_max = *std::max_element(slopes.begin(), slopes.end());
  if (result.slope_min > 0.9 && result.slope_max < 1.1) {
    result.kind = CrossingKind::conical;
    result.q = 1;
  } else {
    const int q = static_cast<int>(std::lround(0.5 * (result.slope_min + result.slope_max)));
    if (q >= 2 && result.slope_min > q - 0.1 && result.slope_max < q + 0.1) {
      result.kind = CrossingKind::degenerate;
      result.q = q;
    } else {
      return result;  // unresolved
    }
  }
  // lower-bound constant: inf over samples of g / r^q
  for (const auto& ray : ray_samples)
    for (auto [lr, lg] : ray) c_lin = std::min(c_lin, std::exp(lg - result.q * lr));
  result.c = c_lin;
  return result;
}

struct NormalForm {
  Vec2 sigma{0.0, 0.0};
  Eigen::MatrixXd hess_lambda;
  double theta = 0.0;      // q=2 coefficient of |eta|^2 (0 when not applicable)
  int m = 1;               // multiplicity ratio
  double homogeneity = 0.0;
  // samples along rays: (eta, lambda, g)
  std::vector<std::array<double, 4>> samples;  // eta_x, eta_y, lambda, g
};

inline NormalForm extract_normal_form(const BandGrid& g, int n, const Vec2& sigma,
                                      double radius = 0.25) {
  NormalForm nf;
  nf.sigma = sigma;
  const int dim = g.dim();
  auto lam_f = [&](const Vec2& xi) { return geo::lambda_at(g, n, xi); };
  nf.hess_lambda = geo::fd_hessian(lam_f, sigma, dim, std::max(1e-4, radius / 16));
  auto dirs = detail::unit_fan(dim);
  std::vector<double> slopes;
  for (const auto& eta : dirs) {
    std::vector<std::pair<double, double>> pts;
    for (int j = 0; j < 6; ++j) {
      const double r = radius * std::pow(0.5, j);
      Vec2 xi = sigma;
      for (int a = 0; a < dim; ++a) xi[a] += r * eta[a];
      const double gv = geo::half_gap_at(g, n, xi);
      nf.samples.push_back({r * eta[0], dim == 2 ? r * eta[1] : 0.0, lam_f(xi), gv});
      if (gv > 1e-13) pts.push_back({std::log(r), std::log(gv)});
    }
    if (pts.size() >= 4) {
      double sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (auto [x, y] : pts) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
      }
      const double m = pts.size();
      slopes.push_back((m * sxy - sx * sy) / (m * sxx - sx * sx));
    }
  }
  if (!slopes.empty())
    nf.homogeneity = std::accumulate(slopes.begin(), slopes.end(), 0.0) / slopes.size();
  // q = 2 coefficient theta by Richardson extrapolation of g / r^2
  if (std::abs(nf.homogeneity - 2.0) < 0.2) {
    double acc = 0.0;
    int cnt = 0;
    for (const auto& eta : dirs) {
      const double r1 = radius / 8, r2 = radius / 16;
      Vec2 x1 = sigma, x2 = sigma;
      for (int a = 0; a < dim; ++a) {
        x1[a] += r1 * eta[a];
        x2[a] += r2 * eta[a];
      }
      const double t1 = geo::half_gap_at(g, n, x1) / (r1 * r1);
      const double t2 = geo::half_gap_at(g, n, x2) / (r2 * r2);
      acc += (4.0 * t2 - t1) / 3.0;  // kills the O(r^2) correction
      ++cnt;
    }
    nf.theta = acc / cnt;
  }
  // multiplicity ratio from eigenvalue coincidence counts just off sigma
  if (n + 2 <= g.n_retained() && n >= 2) {
    Vec2 probe = sigma;
    probe[0] += radius / 4;
    const auto r = g.rho_eval(probe);
    const double tol = 1e-8 * (1.0 + std::abs(r.at(n - 1)));
    int mult_lo = 1, mult_hi = 1;
    if (std::abs(r.at(n - 1) - r.at(n - 2)) < tol) ++mult_lo;
    if (n + 1 <= static_cast<int>(r.size()) - 1 && std::abs(r.at(n + 1) - r.at(n)) < tol)
      ++mult_hi;
    nf.m = std::max(1, mult_lo / std::max(1, mult_hi));
  }
  return nf;
}

struct HypothesisVerdicts {
  Verdict h1, h2, h3;
  Verdict h1p, h2p, h3p;
  std::vector<Cluster> critical;
  std::vector<Cluster> crossings;
  std::vector<CrossingClass> classes;
};

/// Audit H1-H3 (and H1'-H3' when the crossing set lies inside the critical
/// sets) for band n over the grid. Tolerances are absolute.
inline HypothesisVerdicts audit_hypotheses(const BandGrid& g, int n, double grad_tol,
                                           double gap_tol, double rank_tol = 1e-6) {
  HypothesisVerdicts out;
  const int dim = g.dim();
  out.critical = find_critical(g, n, grad_tol);
  bool h1_ok = true;
  out.crossings = find_crossings(g, n, gap_tol, &h1_ok);
  for (const auto& cl : out.crossings) {
    ClassifyOptions opts;
    opts.directions = normal_directions(g, cl);
    out.classes.push_back(classify_crossing(g, n, cl.rep, opts));
  }

  // H1: crossings involve at most two consecutive modes
  if (out.crossings.empty()) {
    out.h1 = {Verdict::Status::holds, 0.0, {0, 0}, "no crossings detected"};
  } else if (n + 2 > g.n_retained()) {
    out.h1 = {Verdict::Status::untestable, 0.0, {0, 0}, "band n+2 not retained"};
  } else {
    double margin = std::numeric_limits<double>::infinity();
    Vec2 witness{0, 0};
    for (const auto& cl : out.crossings) {
      const auto r = g.rho_eval(cl.rep);
      const double m = r.at(n + 1) - r.at(n);
      if (m < margin) {
        margin = m;
        witness = cl.rep;
      }
    }
    out.h1.status = h1_ok && margin > gap_tol ? Verdict::Status::holds : Verdict::Status::fails;
    out.h1.margin = margin;
    out.h1.witness = witness;
  }

  // H2: Hess rho_n constant rank over each Lambda_n component
  out.h2 = {Verdict::Status::holds, 0.0, {0, 0}, ""};
  for (const auto& cl : out.critical) {
    const auto info = hessian_rank(g, n, cl, rank_tol);
    if (!info.constant_rank) {
      out.h2.status = Verdict::Status::fails;
      out.h2.witness = cl.rep;
      out.h2.reason = "rank varies within a critical component";
    }
  }

  // H3 at conical crossings: grad lambda +- grad_eta g != 0 on unit normals
  auto eval_h3 = [&](const Vec2& sigma, const std::vector<Vec2>& dirs, bool use_hess_lambda) {
    auto lam_f = [&](const Vec2& xi) { return geo::lambda_at(g, n, xi); };
    const double h = detail::fd_step(g);
    Eigen::MatrixXd HL;
    Eigen::VectorXd GL;
    if (use_hess_lambda) HL = geo::fd_hessian(lam_f, sigma, dim, std::max(h, 1e-3));
    else GL = geo::fd_gradient(lam_f, sigma, dim, h);
    double margin = std::numeric_limits<double>::infinity();
    Vec2 witness{0, 0};
    for (const auto& eta : dirs) {
      // grad_eta g_n(sigma, eta) at the unit normal: g_n(sigma, .) is the
      // half-gap at sigma + ., so this is a plain gradient at sigma + eta
      Vec2 base_pt = sigma;
      for (int b = 0; b < dim; ++b) base_pt[b] += eta[b];
      auto hg = [&](const Vec2& xi) { return geo::half_gap_at(g, n, xi); };
      Eigen::VectorXd Gg = geo::fd_gradient(hg, base_pt, dim, 1e-4);
      Eigen::VectorXd base(dim);
      if (use_hess_lambda) {
        Eigen::VectorXd ev(dim);
        for (int a = 0; a < dim; ++a) ev(a) = eta[a];
        base = HL * ev;
      } else {
        base = GL;
      }
      for (double sgn : {1.0, -1.0}) {
        const double norm = (base + sgn * Gg).norm();
        if (norm < margin) {
          margin = norm;
          witness = eta;
        }
      }
    }
    return std::make_pair(margin, witness);
  };

  if (out.crossings.empty()) {
    out.h3 = {Verdict::Status::holds, 0.0, {0, 0}, "no crossings detected"};
    out.h1p = {Verdict::Status::untestable, 0.0, {0, 0}, "no crossings"};
    out.h2p = {Verdict::Status::untestable, 0.0, {0, 0}, "no crossings"};
    out.h3p = {Verdict::Status::untestable, 0.0, {0, 0}, "no crossings"};
    return out;
  }

  double h3_margin = std::numeric_limits<double>::infinity();
  Vec2 h3_witness{0, 0};
  const double h3_tol = 10 * grad_tol;
  bool any_conical = false;
  for (std::size_t i = 0; i < out.crossings.size(); ++i) {
    if (out.classes[i].kind != CrossingKind::conical) continue;
    any_conical = true;
    auto dirs = normal_directions(g, out.crossings[i]);
    auto [m, w] = eval_h3(out.crossings[i].rep, dirs, /*use_hess_lambda=*/false);
    if (m < h3_margin) {
      h3_margin = m;
      h3_witness = out.crossings[i].rep;
    }
  }
  if (!any_conical) {
    out.h3 = {Verdict::Status::untestable, 0.0, {0, 0}, "no conical crossings"};
  } else {
    out.h3.status = h3_margin > h3_tol ? Verdict::Status::holds : Verdict::Status::fails;
    out.h3.margin = h3_margin;
    out.h3.witness = h3_witness;
  }

  // primed hypotheses: only when every crossing is also critical for both bands
  bool sigma_in_lambda = true;
  const double h = detail::fd_step(g);
  for (const auto& cl : out.crossings) {
    auto rn = [&](const Vec2& xi) { return geo::rho_at(g, n, xi); };
    auto rn1 = [&](const Vec2& xi) { return geo::rho_at(g, n + 1, xi); };
    // one-sided probes: at a degenerate crossing both bands are C^1 with zero gradient
    const double gn = geo::fd_gradient(rn, cl.rep, dim, h).norm();
    const double gn1 = geo::fd_gradient(rn1, cl.rep, dim, h).norm();
    if (gn > 100 * grad_tol || gn1 > 100 * grad_tol) sigma_in_lambda = false;
  }
  if (!sigma_in_lambda) {
    out.h1p = {Verdict::Status::untestable, 0.0, {0, 0}, "Sigma_n not inside Lambda_n"};
    out.h2p = out.h1p;
    out.h3p = out.h1p;
    return out;
  }

  out.h1p = {Verdict::Status::holds, 0.0, {0, 0}, "two-mode crossing"};
  if (n + 2 <= g.n_retained()) {
    for (const auto& cl : out.crossings) {
      const auto r = g.rho_eval(cl.rep);
      if (r.at(n + 1) - r.at(n) < gap_tol) {
        out.h1p.status = Verdict::Status::fails;
        out.h1p.witness = cl.rep;
      }
    }
  }

  out.h2p = {Verdict::Status::holds, 0.0, {0, 0}, ""};
  for (const auto& cl : find_critical(g, std::min(n + 1, g.n_retained()), grad_tol)) {
    const auto info = hessian_rank(g, std::min(n + 1, g.n_retained()), cl, rank_tol);
    if (!info.constant_rank) {
      out.h2p.status = Verdict::Status::fails;
      out.h2p.witness = cl.rep;
    }
  }
  if (out.h2.status == Verdict::Status::fails) out.h2p.status = Verdict::Status::fails;

  // H3': q=2 -> Hess lambda(sigma) eta +- grad_eta g != 0; q>2 -> rank condition
  double h3p_margin = std::numeric_limits<double>::infinity();
  Vec2 h3p_witness{0, 0};
  bool h3p_applicable = false, h3p_ok = true;
  for (std::size_t i = 0; i < out.crossings.size(); ++i) {
    if (out.classes[i].kind != CrossingKind::degenerate) continue;
    h3p_applicable = true;
    if (out.classes[i].q == 2) {
      auto dirs = normal_directions(g, out.crossings[i]);
      auto [m, w] = eval_h3(out.crossings[i].rep, dirs, /*use_hess_lambda=*/true);
      if (m < h3p_margin) {
        h3p_margin = m;
        h3p_witness = out.crossings[i].rep;
      }
      if (m <= h3_tol) h3p_ok = false;
    } else {
      auto lam_f = [&](const Vec2& xi) { return geo::lambda_at(g, n, xi); };
      Eigen::MatrixXd HL = geo::fd_hessian(lam_f, out.crossings[i].rep, dim, 1e-3);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(HL);
      int rank = 0;
      for (int s = 0; s < svd.singularValues().size(); ++s)
        if (svd.singularValues()(s) > rank_tol * svd.singularValues()(0)) ++rank;
      const int sigma_dim = out.crossings[i].cells.size() >= 3 && dim == 2 ? 1 : 0;
      if (rank != dim - sigma_dim) {
        h3p_ok = false;
        h3p_witness = out.crossings[i].rep;
      }
    }
  }
  if (!h3p_applicable) {
    out.h3p = {Verdict::Status::untestable, 0.0, {0, 0}, "no degenerate crossings"};
  } else {
    out.h3p.status = h3p_ok ? Verdict::Status::holds : Verdict::Status::fails;
    out.h3p.margin = h3p_margin;
    out.h3p.witness = h3p_witness;
  }
  return out;
}

}  // namespace bloch

#endif  // BLOCH_LANDSCAPE_HPP
