#ifndef BLOCH_POTENTIAL_HPP
#define BLOCH_POTENTIAL_HPP

#include <array>
#include <cmath>
#include <complex>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace bloch {

using complexd = std::complex<double>;

/// Integer frequency vector; second component unused for d=1.
using FreqVec = std::array<int, 2>;

/// Smooth real-valued Z^d-periodic potential (d in {1,2}), period 1 in each
/// coordinate, stored as a finite set of Fourier coefficients against the
/// basis e^{2*pi*i*k.y}. Immutable after construction.
class PeriodicPotential {
 public:
  PeriodicPotential() : dim_(1), band_limit_(0) {}

  /// Build from (k, amplitude) pairs. The set must be closed under
  /// k -> -k with conjugate amplitudes (real-valuedness); violations throw.
  static PeriodicPotential from_fourier(int dim,
                                        const std::vector<std::pair<FreqVec, complexd>>& pairs) {
    if (dim != 1 && dim != 2) throw std::invalid_argument("potential: dim must be 1 or 2");
    PeriodicPotential v;
    v.dim_ = dim;
    for (const auto& [k, a] : pairs) {
      if (dim == 1 && k[1] != 0)
        throw std::invalid_argument("potential: 1-D coefficient with nonzero second frequency");
      v.coeffs_[k] += a;
    }
    // prune exact zeros, then verify Hermitian symmetry
    for (auto it = v.coeffs_.begin(); it != v.coeffs_.end();) {
      if (it->second == complexd{0.0, 0.0}) it = v.coeffs_.erase(it);
      else ++it;
    }
    for (const auto& [k, a] : v.coeffs_) {
      FreqVec mk{-k[0], -k[1]};
      auto it = v.coeffs_.find(mk);
      const complexd mirror = (it == v.coeffs_.end()) ? complexd{0, 0} : it->second;
      if (std::abs(mirror - std::conj(a)) > 1e-12 * (1.0 + std::abs(a)))
        throw std::invalid_argument("potential: coefficients violate Hermitian symmetry V(-k) = conj(V(k))");
      v.band_limit_ = std::max({v.band_limit_, std::abs(k[0]), std::abs(k[1])});
    }
    return v;
  }

  /// Real-cosine shorthand: sum of c_k * cos(2*pi*k.y) terms.
  static PeriodicPotential from_cosines(int dim,
                                        const std::vector<std::pair<FreqVec, double>>& terms) {
    std::vector<std::pair<FreqVec, complexd>> pairs;
    for (const auto& [k, c] : terms) {
      if (k[0] == 0 && k[1] == 0) {
        pairs.push_back({k, complexd{c, 0}});
      } else {
        pairs.push_back({k, complexd{c / 2, 0}});
        pairs.push_back({FreqVec{-k[0], -k[1]}, complexd{c / 2, 0}});
      }
    }
    return from_fourier(dim, pairs);
  }

  int dim() const { return dim_; }
  int band_limit() const { return band_limit_; }
  const std::map<FreqVec, complexd>& coeffs() const { return coeffs_; }

  complexd coeff(const FreqVec& k) const {
    auto it = coeffs_.find(k);
    return it == coeffs_.end() ? complexd{0, 0} : it->second;
  }
  complexd coeff(int k) const { return coeff(FreqVec{k, 0}); }

  /// Evaluate at y in R^d (periodic). Imaginary residue beyond 1e-12 throws.
  double eval(const std::array<double, 2>& y) const {
    constexpr double tau = 2.0 * std::numbers::pi;
    complexd s{0, 0};
    for (const auto& [k, a] : coeffs_)
      s += a * std::polar(1.0, tau * (k[0] * y[0] + k[1] * y[1]));
    if (std::abs(s.imag()) > 1e-12 * (1.0 + std::abs(s.real())))
      throw std::runtime_error("potential: eval produced a non-real value");
    return s.real();
  }
  double eval(double y) const { return eval({y, 0.0}); }

  /// Lower bound of the potential (min over a fine sampling grid).
  double min_value() const {
    double m = coeffs_.empty() ? 0.0 : eval({0.0, 0.0});
    const int n = 512;
    for (int i = 0; i < n; ++i) {
      if (dim_ == 1) {
        m = std::min(m, eval(double(i) / n));
      } else {
        for (int j = 0; j < n / 8; ++j)
          m = std::min(m, eval({double(i) / n, double(j) / (n / 8)}));
      }
    }
    return m;
  }

  bool is_zero() const { return coeffs_.empty(); }

  /// Named presets: "free" and "mathieu5" (the figure potential 5cos(2y)
  /// carried to the unit torus, i.e. 5*pi^2*cos(2*pi*y)).
  static PeriodicPotential preset(const std::string& name) {
    if (name == "free") return from_fourier(1, {});
    if (name == "mathieu5")
      return from_cosines(1, {{FreqVec{1, 0}, 5.0 * std::numbers::pi * std::numbers::pi}});
    throw std::invalid_argument("unknown potential preset: " + name);
  }

  /// JSON descriptor: { "dim": d, "coeffs": [[k..., re, im], ...] }.
  static PeriodicPotential from_json(const nlohmann::json& j) {
    const int dim = j.at("dim").get<int>();
    std::vector<std::pair<FreqVec, complexd>> pairs;
    for (const auto& row : j.at("coeffs")) {
      if (static_cast<int>(row.size()) != dim + 2)
        throw std::invalid_argument("potential: coeff row must be [k..., re, im]");
      FreqVec k{row[0].get<int>(), dim == 2 ? row[1].get<int>() : 0};
      pairs.push_back({k, complexd{row[dim].get<double>(), row[dim + 1].get<double>()}});
    }
    return from_fourier(dim, pairs);
  }

  nlohmann::json to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& [k, a] : coeffs_) {
      nlohmann::json row = nlohmann::json::array();
      row.push_back(k[0]);
      if (dim_ == 2) row.push_back(k[1]);
      row.push_back(a.real());
      row.push_back(a.imag());
      rows.push_back(row);
    }
    return nlohmann::json{{"dim", dim_}, {"coeffs", rows}};
  }

 private:
  int dim_;
  int band_limit_;
  std::map<FreqVec, complexd> coeffs_;
};

}  // namespace bloch

#endif  // BLOCH_POTENTIAL_HPP
