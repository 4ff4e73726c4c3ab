#ifndef BLOCH_FFT_HPP
#define BLOCH_FFT_HPP

#include <cmath>
#include <complex>
#include <cstring>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace bloch {

/// RAII wrapper around FFTW 1-D complex transforms with unitary scaling
/// (forward and backward both carry 1/sqrt(N), so they are mutual inverses
/// and preserve the l2 norm).
class Fft1D {
 public:
  explicit Fft1D(int n) : n_(n) {
    if (n < 1) throw std::invalid_argument("Fft1D: size must be positive");
    buf_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    if (!buf_) throw std::bad_alloc();
    fwd_ = fftw_plan_dft_1d(n_, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_1d(n_, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!fwd_ || !bwd_) throw std::runtime_error("Fft1D: plan creation failed");
  }
  ~Fft1D() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(buf_);
  }
  Fft1D(const Fft1D&) = delete;
  Fft1D& operator=(const Fft1D&) = delete;

  int size() const { return n_; }

  void forward(std::vector<std::complex<double>>& io) const { run(io, fwd_); }
  void backward(std::vector<std::complex<double>>& io) const { run(io, bwd_); }

 private:
  void run(std::vector<std::complex<double>>& io, fftw_plan plan) const {
    if (static_cast<int>(io.size()) != n_) throw std::invalid_argument("Fft1D: size mismatch");
    std::memcpy(buf_, io.data(), sizeof(fftw_complex) * n_);
    fftw_execute(plan);
    const double s = 1.0 / std::sqrt(static_cast<double>(n_));
    auto* out = reinterpret_cast<std::complex<double>*>(buf_);
    for (int i = 0; i < n_; ++i) io[i] = out[i] * s;
  }

  int n_;
  fftw_complex* buf_;
  fftw_plan fwd_, bwd_;
};

}  // namespace bloch

#endif  // BLOCH_FFT_HPP
