#pragma once

// Thin RAII wrapper over FFTW real-to-complex transforms, specialized for the
// double and long double precisions. Plans are built with FFTW_ESTIMATE so
// that identical inputs always produce bit-identical outputs.

#include <fftw3.h>

#include <array>
#include <complex>
#include <cstddef>
#include <span>

namespace ims::fft {

template <class Scalar>
struct Traits;

template <>
struct Traits<double> {
  using Plan = fftw_plan;
  using Complex = fftw_complex;
  static double* alloc_real(std::size_t n) { return fftw_alloc_real(n); }
  static Complex* alloc_complex(std::size_t n) { return fftw_alloc_complex(n); }
  static void free(void* p) { fftw_free(p); }
  static Plan forward(int rank, const int* n, double* in, Complex* out) {
    return fftw_plan_dft_r2c(rank, n, in, out, FFTW_ESTIMATE);
  }
  static Plan backward(int rank, const int* n, Complex* in, double* out) {
    return fftw_plan_dft_c2r(rank, n, in, out, FFTW_ESTIMATE);
  }
  static void execute(Plan p) { fftw_execute(p); }
  static void destroy(Plan p) { fftw_destroy_plan(p); }
};

template <>
struct Traits<long double> {
  using Plan = fftwl_plan;
  using Complex = fftwl_complex;
  static long double* alloc_real(std::size_t n) { return fftwl_alloc_real(n); }
  static Complex* alloc_complex(std::size_t n) { return fftwl_alloc_complex(n); }
  static void free(void* p) { fftwl_free(p); }
  static Plan forward(int rank, const int* n, long double* in, Complex* out) {
    return fftwl_plan_dft_r2c(rank, n, in, out, FFTW_ESTIMATE);
  }
  static Plan backward(int rank, const int* n, Complex* in, long double* out) {
    return fftwl_plan_dft_c2r(rank, n, in, out, FFTW_ESTIMATE);
  }
  static void execute(Plan p) { fftwl_execute(p); }
  static void destroy(Plan p) { fftwl_destroy_plan(p); }
};

/// Real <-> half-spectrum transform on an M^dim periodic grid. Owns aligned
/// scratch buffers; not safe to use from several threads at once.
template <class Scalar>
class RealTransform {
  using T = Traits<Scalar>;

 public:
  RealTransform(int dim, int m) : dim_(dim) {
    std::array<int, 3> n{m, m, m};
    real_size_ = 1;
    complex_size_ = 1;
    for (int a = 0; a < dim; ++a) {
      real_size_ *= static_cast<std::size_t>(m);
      complex_size_ *= static_cast<std::size_t>(a + 1 == dim ? m / 2 + 1 : m);
    }
    real_ = T::alloc_real(real_size_);
    spec_ = T::alloc_complex(complex_size_);
    forward_ = T::forward(dim, n.data(), real_, spec_);
    backward_ = T::backward(dim, n.data(), spec_, real_);
  }

  RealTransform(const RealTransform&) = delete;
  RealTransform& operator=(const RealTransform&) = delete;

  ~RealTransform() {
    T::destroy(forward_);
    T::destroy(backward_);
    T::free(real_);
    T::free(spec_);
  }

  std::size_t real_size() const { return real_size_; }
  std::size_t complex_size() const { return complex_size_; }

  /// Unnormalized forward transform.
  void forward(std::span<const Scalar> in, std::span<std::complex<Scalar>> out) {
    for (std::size_t i = 0; i < real_size_; ++i) real_[i] = in[i];
    T::execute(forward_);
    for (std::size_t i = 0; i < complex_size_; ++i) out[i] = {spec_[i][0], spec_[i][1]};
  }

  /// Inverse transform including the 1/M^dim normalization.
  void backward(std::span<const std::complex<Scalar>> in, std::span<Scalar> out) {
    for (std::size_t i = 0; i < complex_size_; ++i) {
      spec_[i][0] = in[i].real();
      spec_[i][1] = in[i].imag();
    }
    T::execute(backward_);
    const Scalar scale = Scalar(1) / static_cast<Scalar>(real_size_);
    for (std::size_t i = 0; i < real_size_; ++i) out[i] = real_[i] * scale;
  }

 private:
  int dim_;
  std::size_t real_size_{0};
  std::size_t complex_size_{0};
  Scalar* real_{nullptr};
  typename T::Complex* spec_{nullptr};
  typename T::Plan forward_{};
  typename T::Plan backward_{};
};

}  // namespace ims::fft
