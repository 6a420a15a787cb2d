// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "aptsep/dsp/fft.h"

#include <fftw3.h>

#include <mutex>
#include <type_traits>

#include "aptsep/common/error.h"

namespace aptsep::dsp {
namespace {

// The FFTW planner is not thread-safe; execution on distinct plans is.
std::mutex& PlannerMutex() {
  static std::mutex mu;
  return mu;
}

template <typename T>
struct Fftw;

template <>
struct Fftw<double> {
  using Plan = fftw_plan;
  using Complex = fftw_complex;
  static void* Malloc(std::size_t n) { return fftw_malloc(n); }
  static void Free(void* p) { fftw_free(p); }
  static Plan R2C(int n, double* in, Complex* out) {
    return fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
  }
  static Plan C2R(int n, Complex* in, double* out) {
    return fftw_plan_dft_c2r_1d(n, in, out, FFTW_ESTIMATE);
  }
  static void Execute(Plan p) { fftw_execute(p); }
  static void Destroy(Plan p) { fftw_destroy_plan(p); }
};

template <>
struct Fftw<float> {
  using Plan = fftwf_plan;
  using Complex = fftwf_complex;
  static void* Malloc(std::size_t n) { return fftwf_malloc(n); }
  static void Free(void* p) { fftwf_free(p); }
  static Plan R2C(int n, float* in, Complex* out) {
    return fftwf_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
  }
  static Plan C2R(int n, Complex* in, float* out) {
    return fftwf_plan_dft_c2r_1d(n, in, out, FFTW_ESTIMATE);
  }
  static void Execute(Plan p) { fftwf_execute(p); }
  static void Destroy(Plan p) { fftwf_destroy_plan(p); }
};

}  // namespace

template <typename T>
struct RealFft<T>::Impl {
  using F = Fftw<T>;
  T* real = nullptr;
  typename F::Complex* spec = nullptr;
  typename F::Plan forward{};
  typename F::Plan inverse{};

  explicit Impl(std::size_t n) {
    real = static_cast<T*>(F::Malloc(sizeof(T) * n));
    spec = static_cast<typename F::Complex*>(
        F::Malloc(sizeof(typename F::Complex) * (n / 2 + 1)));
    std::lock_guard<std::mutex> lock(PlannerMutex());
    forward = F::R2C(static_cast<int>(n), real, spec);
    inverse = F::C2R(static_cast<int>(n), spec, real);
  }
  ~Impl() {
    {
      std::lock_guard<std::mutex> lock(PlannerMutex());
      F::Destroy(forward);
      F::Destroy(inverse);
    }
    F::Free(real);
    F::Free(spec);
  }
};

template <typename T>
RealFft<T>::RealFft(std::size_t n) : n_(n) {
  if (n < 2 || (n & 1)) {
    throw Error(Errc::kInvalidArgument, "FFT length must be even and >= 2");
  }
  impl_ = std::make_unique<Impl>(n);
}

template <typename T>
RealFft<T>::~RealFft() = default;
template <typename T>
RealFft<T>::RealFft(RealFft&&) noexcept = default;
template <typename T>
RealFft<T>& RealFft<T>::operator=(RealFft&&) noexcept = default;

template <typename T>
void RealFft<T>::Forward(std::span<const T> in,
                         std::span<std::complex<T>> out) {
  if (in.size() != n_ || out.size() != bins()) {
    throw Error(Errc::kShapeMismatch, "RealFft::Forward buffer sizes");
  }
  std::copy(in.begin(), in.end(), impl_->real);
  Impl::F::Execute(impl_->forward);
  for (std::size_t k = 0; k < bins(); ++k) {
    out[k] = {impl_->spec[k][0], impl_->spec[k][1]};
  }
}

template <typename T>
void RealFft<T>::Inverse(std::span<const std::complex<T>> in,
                         std::span<T> out) {
  if (in.size() != bins() || out.size() != n_) {
    throw Error(Errc::kShapeMismatch, "RealFft::Inverse buffer sizes");
  }
  for (std::size_t k = 0; k < bins(); ++k) {
    impl_->spec[k][0] = in[k].real();
    impl_->spec[k][1] = in[k].imag();
  }
  impl_->spec[0][1] = T(0);
  impl_->spec[n_ / 2][1] = T(0);
  Impl::F::Execute(impl_->inverse);
  const T scale = T(1) / static_cast<T>(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = impl_->real[i] * scale;
}

template class RealFft<float>;
template class RealFft<double>;

}  // namespace aptsep::dsp
