// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef APTSEP_DSP_FFT_H_
#define APTSEP_DSP_FFT_H_

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

namespace aptsep::dsp {

// Real-input FFT of fixed length backed by FFTW. An instance owns its work
// buffers and must not be shared between threads; distinct instances may be
// used concurrently.
template <typename T>
class RealFft {
 public:
  explicit RealFft(std::size_t n);
  ~RealFft();
  RealFft(RealFft&&) noexcept;
  RealFft& operator=(RealFft&&) noexcept;

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  // out[k] = sum_n in[n] exp(-2 pi i k n / N), k in [0, N/2].
  void Forward(std::span<const T> in, std::span<std::complex<T>> out);
  // Hermitian inverse, scaled by 1/N so Inverse(Forward(x)) == x. Imaginary
  // parts of the DC and Nyquist bins are ignored.
  void Inverse(std::span<const std::complex<T>> in, std::span<T> out);

 private:
  struct Impl;
  std::size_t n_;
  std::unique_ptr<Impl> impl_;
};

extern template class RealFft<float>;
extern template class RealFft<double>;

}  // namespace aptsep::dsp

#endif  // APTSEP_DSP_FFT_H_
