// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Short-time Fourier analysis/synthesis with a periodic Hann window and
// center reflection padding of n_fft/2 on both ends. A signal of L samples
// yields 1 + L / hop frames. Synthesis is weighted overlap-add normalized by
// the summed squared window, so istft(stft(x)) == x whenever the squared
// window overlap-adds to a constant (Hann with hop = n_fft / k, k >= 3).

#ifndef APTSEP_DSP_STFT_H_
#define APTSEP_DSP_STFT_H_

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "aptsep/dsp/fft.h"
#include "aptsep/dsp/waveform.h"
#include "aptsep/grad/graph.h"

namespace aptsep::dsp {

template <typename T>
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::size_t n_fft = 0;
  std::size_t hop = 0;
  std::vector<T> real;  // frames x bins
  std::vector<T> imag;  // frames x bins

  T Magnitude(std::size_t t, std::size_t k) const {
    const std::size_t i = t * bins + k;
    return std::sqrt(real[i] * real[i] + imag[i] * imag[i]);
  }
};

std::size_t NumFrames(std::size_t length, std::size_t hop);

template <typename T>
std::vector<T> HannWindow(std::size_t n);

// Throws kNonCola unless the squared Hann window overlap-adds to a constant
// at this hop.
void CheckCola(std::size_t n_fft, std::size_t hop);

// Reusable analysis/synthesis engine; owns its FFT plan and scratch buffers.
template <typename T>
class StftEngine {
 public:
  StftEngine(std::size_t n_fft, std::size_t hop);

  std::size_t n_fft() const { return n_fft_; }
  std::size_t hop() const { return hop_; }

  // Throws kInputTooShort when length(x) < n_fft.
  Spectrogram<T> Analyze(std::span<const T> x);
  // Weighted overlap-add; output truncated or zero-padded to expected_len.
  std::vector<T> Synthesize(const Spectrogram<T>& spec,
                            std::size_t expected_len);
  // Adjoint of Synthesize for a fixed frame count: accumulates the
  // gradient w.r.t. the real and imaginary spectrogram planes given the
  // gradient w.r.t. the output waveform.
  void SynthesizeAdjoint(std::span<const T> grad_wave, std::size_t frames,
                         T* grad_real, T* grad_imag);

 private:
  void Normalizer(std::size_t frames, std::vector<T>& norm) const;

  std::size_t n_fft_;
  std::size_t hop_;
  RealFft<T> fft_;
  std::vector<T> window_;
  std::vector<T> frame_;
  std::vector<std::complex<T>> bins_;
  std::vector<T> norm_;
};

extern template class StftEngine<float>;
extern template class StftEngine<double>;

Spectrogram<float> Stft(const Waveform& x, std::size_t n_fft, std::size_t hop);
Waveform Istft(const Spectrogram<float>& spec, std::size_t expected_len,
               int sample_rate);

// Graph operation: (real [frames,bins], imag [frames,bins]) -> waveform
// [length]. Differentiable in both inputs.
template <typename T>
class IstftOp : public grad::CustomOp<T> {
 public:
  IstftOp(std::size_t n_fft, std::size_t hop, std::size_t length);

  std::string name() const override { return "istft"; }
  grad::Shape OutputShape(std::span<const grad::Shape> inputs) const override;
  void Forward(std::span<const grad::Tensor<T>* const> inputs,
               grad::Tensor<T>& out) override;
  void Backward(std::span<const grad::Tensor<T>* const> inputs,
                const grad::Tensor<T>& out, std::span<const T> grad_out,
                std::span<T* const> grad_in) override;

 private:
  StftEngine<T> engine_;
  std::size_t length_;
  Spectrogram<T> spec_;
};

extern template class IstftOp<float>;
extern template class IstftOp<double>;

}  // namespace aptsep::dsp

#endif  // APTSEP_DSP_STFT_H_
