#ifndef BLOCH_WAVEFIELD_HPP
#define BLOCH_WAVEFIELD_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bloch/potential.hpp"

namespace bloch {

/// Complex field on a uniform periodic grid over [-L/2, L/2), carrying the
/// semiclassical parameter. Invariants: N_g a power of two, dx < eps/4 (at
/// least 8 points per fast period), and L/eps an integer so that V(x/eps) is
/// exactly periodic on the box and 2 pi k / eps frequency shifts are exact
/// dual-grid index rotations.
struct WaveField {
  int N_g = 0;
  double L = 0.0;
  double eps = 0.0;
  double time = 0.0;
  std::vector<complexd> values;

  WaveField() = default;
  WaveField(int n, double box, double epsilon, double t = 0.0)
      : N_g(n), L(box), eps(epsilon), time(t), values(n, complexd{0, 0}) {
    validate();
  }

  void validate() const {
    if (N_g < 2 || (N_g & (N_g - 1)) != 0)
      throw std::invalid_argument("WaveField: N_g must be a power of two");
    if (!(L > 0) || !(eps > 0)) throw std::invalid_argument("WaveField: L, eps must be positive");
    if (!(dx() < eps / 4))
      throw std::invalid_argument("WaveField: grid spacing must resolve the fast scale (dx < eps/4)");
    const double p = L / eps;
    if (std::abs(p - std::round(p)) > 1e-9 * p)
      throw std::invalid_argument("WaveField: L/eps must be an integer (box invariant)");
    if (static_cast<int>(values.size()) != N_g)
      throw std::invalid_argument("WaveField: value count mismatch");
  }

  double dx() const { return L / N_g; }
  double x(int i) const { return -0.5 * L + dx() * i; }
  int periods() const { return static_cast<int>(std::llround(L / eps)); }

  /// signed dual index for FFT slot m
  int freq_index(int m) const { return m < N_g / 2 ? m : m - N_g; }
  /// physical frequency xi of FFT slot m
  double xi(int m) const { return 2.0 * std::numbers::pi * freq_index(m) / L; }
  /// scaled frequency zeta = eps * xi of FFT slot m
  double zeta(int m) const { return xi(m) * eps; }

  double mass() const {
    double s = 0.0;
    for (const auto& v : values) s += std::norm(v);
    return s * dx();
  }

  double l2_distance(const WaveField& other) const {
    if (other.N_g != N_g) throw std::invalid_argument("l2_distance: grid mismatch");
    double s = 0.0;
    for (int i = 0; i < N_g; ++i) s += std::norm(values[i] - other.values[i]);
    return std::sqrt(s * dx());
  }
};

/// Default initial data family: psi(x) = e^{i xi0 x / eps} Phi(x - x0) with Phi
/// a centered Gaussian of width sigma, unit L2 norm.
inline WaveField gaussian_packet(int N_g, double L, double eps, double xi0, double sigma,
                                 double x0 = 0.0) {
  WaveField psi(N_g, L, eps);
  const double norm = std::pow(std::numbers::pi * sigma * sigma, -0.25);
  for (int i = 0; i < N_g; ++i) {
    const double x = psi.x(i);
    const double env = norm * std::exp(-(x - x0) * (x - x0) / (2.0 * sigma * sigma));
    psi.values[i] = env * std::polar(1.0, xi0 * x / eps);
  }
  return psi;
}

/// Raw little-endian complex64 payload plus a JSON sidecar (<path>.json).
inline void save_field(const WaveField& psi, const std::string& path) {
  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw std::runtime_error("save_field: cannot open " + path);
  for (const auto& v : psi.values) {
    const float re = static_cast<float>(v.real());
    const float im = static_cast<float>(v.imag());
    bin.write(reinterpret_cast<const char*>(&re), sizeof(float));
    bin.write(reinterpret_cast<const char*>(&im), sizeof(float));
  }
  nlohmann::json side{{"dim", 1}, {"N_g", psi.N_g}, {"L", psi.L}, {"eps", psi.eps},
                      {"time", psi.time}};
  std::ofstream js(path + ".json");
  js << side.dump(2) << "\n";
}

inline WaveField load_field(const std::string& path) {
  std::ifstream js(path + ".json");
  if (!js) throw std::runtime_error("load_field: missing sidecar " + path + ".json");
  nlohmann::json side = nlohmann::json::parse(js);
  if (side.at("dim").get<int>() != 1)
    throw std::runtime_error("load_field: only 1-D fields supported");
  WaveField psi(side.at("N_g").get<int>(), side.at("L").get<double>(),
                side.at("eps").get<double>(), side.at("time").get<double>());
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw std::runtime_error("load_field: cannot open " + path);
  for (auto& v : psi.values) {
    float re = 0, im = 0;
    bin.read(reinterpret_cast<char*>(&re), sizeof(float));
    bin.read(reinterpret_cast<char*>(&im), sizeof(float));
    if (!bin) throw std::runtime_error("load_field: truncated payload in " + path);
    v = complexd{re, im};
  }
  return psi;
}

}  // namespace bloch

#endif  // BLOCH_WAVEFIELD_HPP
