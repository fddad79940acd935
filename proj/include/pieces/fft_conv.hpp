#pragma once

#include <complex>
#include <mutex>
#include <stdexcept>
#include <vector>

#include <fftw3.h>

namespace pieces {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Smallest size >= n with prime factors 2, 3, 5, 7.
inline int fft_friendly(int n) {
  for (int m = n;; ++m) {
    int r = m;
    for (int p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

// Circular 2-D convolution with a fixed real kernel on an N x N grid.
class Convolver2D {
 public:
  Convolver2D(int n, const std::vector<double>& kernel) : n_(n), nc_(n / 2 + 1) {
    if (static_cast<int>(kernel.size()) != n * n) throw std::invalid_argument("Convolver2D: size");
    real_ = fftw_alloc_real(static_cast<std::size_t>(n) * n);
    spec_ = fftw_alloc_complex(static_cast<std::size_t>(n) * nc_);
    {
      std::lock_guard<std::mutex> lock(fftw_planner_mutex());
      fwd_ = fftw_plan_dft_r2c_2d(n, n, real_, spec_, FFTW_ESTIMATE);
      bwd_ = fftw_plan_dft_c2r_2d(n, n, spec_, real_, FFTW_ESTIMATE);
    }
    std::copy(kernel.begin(), kernel.end(), real_);
    fftw_execute(fwd_);
    khat_.resize(static_cast<std::size_t>(n) * nc_);
    const double scale = 1.0 / (static_cast<double>(n) * n);
    for (std::size_t i = 0; i < khat_.size(); ++i)
      khat_[i] = std::complex<double>(spec_[i][0], spec_[i][1]) * scale;
  }
  Convolver2D(const Convolver2D&) = delete;
  Convolver2D& operator=(const Convolver2D&) = delete;
  ~Convolver2D() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(real_);
    fftw_free(spec_);
  }

  int size() const { return n_; }
  // Input grid, row-major N x N; overwritten by the convolution.
  double* grid() { return real_; }

  void run() {
    fftw_execute(fwd_);
    for (std::size_t i = 0; i < khat_.size(); ++i) {
      const std::complex<double> v(spec_[i][0], spec_[i][1]);
      const std::complex<double> r = v * khat_[i];
      spec_[i][0] = r.real();
      spec_[i][1] = r.imag();
    }
    fftw_execute(bwd_);
  }

 private:
  int n_, nc_;
  double* real_ = nullptr;
  fftw_complex* spec_ = nullptr;
  fftw_plan fwd_{}, bwd_{};
  std::vector<std::complex<double>> khat_;
};

}  // namespace pieces
