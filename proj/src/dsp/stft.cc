// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "aptsep/dsp/stft.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "aptsep/common/error.h"

namespace aptsep::dsp {
namespace {

// Below this fraction of the peak squared-window sum a padded position is
// treated as uncovered.
constexpr double kNormFloor = 1e-8;

}  // namespace

std::size_t NumFrames(std::size_t length, std::size_t hop) {
  return 1 + length / hop;
}

template <typename T>
std::vector<T> HannWindow(std::size_t n) {
  std::vector<T> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = static_cast<T>(
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                             static_cast<double>(n)));
  }
  return w;
}

template std::vector<float> HannWindow<float>(std::size_t);
template std::vector<double> HannWindow<double>(std::size_t);

void CheckCola(std::size_t n_fft, std::size_t hop) {
  if (hop == 0 || hop > n_fft) {
    throw Error(Errc::kNonCola, "hop " + std::to_string(hop) +
                                    " invalid for n_fft " +
                                    std::to_string(n_fft));
  }
  const std::vector<double> w = HannWindow<double>(n_fft);
  double lo = 1e300, hi = 0.0;
  // Any position at least n_fft into an infinite frame train is steady.
  for (std::size_t n = n_fft; n < 2 * n_fft; ++n) {
    double s = 0.0;
    for (std::size_t start = 0; start <= n; start += hop) {
      if (n - start < n_fft) s += w[n - start] * w[n - start];
    }
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  if (hi - lo > 1e-9 * hi) {
    throw Error(Errc::kNonCola, "squared Hann window does not overlap-add to "
                                "a constant at n_fft " +
                                    std::to_string(n_fft) + ", hop " +
                                    std::to_string(hop));
  }
}

template <typename T>
StftEngine<T>::StftEngine(std::size_t n_fft, std::size_t hop)
    : n_fft_(n_fft),
      hop_(hop),
      fft_(n_fft),
      window_(HannWindow<T>(n_fft)),
      frame_(n_fft),
      bins_(n_fft / 2 + 1) {
  if (hop == 0) throw Error(Errc::kInvalidArgument, "hop must be positive");
}

template <typename T>
Spectrogram<T> StftEngine<T>::Analyze(std::span<const T> x) {
  const std::size_t len = x.size();
  if (len < n_fft_) {
    throw Error(Errc::kInputTooShort, "signal of " + std::to_string(len) +
                                          " samples is shorter than n_fft " +
                                          std::to_string(n_fft_));
  }
  const std::size_t pad = n_fft_ / 2;
  const auto at = [&](long j) -> T {
    if (j < 0) j = -j;
    const long last = static_cast<long>(len) - 1;
    if (j > last) j = 2 * last - j;
    return x[static_cast<std::size_t>(j)];
  };
  Spectrogram<T> spec;
  spec.frames = NumFrames(len, hop_);
  spec.bins = n_fft_ / 2 + 1;
  spec.n_fft = n_fft_;
  spec.hop = hop_;
  spec.real.resize(spec.frames * spec.bins);
  spec.imag.resize(spec.frames * spec.bins);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const long start = static_cast<long>(t * hop_) - static_cast<long>(pad);
    for (std::size_t i = 0; i < n_fft_; ++i) {
      frame_[i] = at(start + static_cast<long>(i)) * window_[i];
    }
    fft_.Forward(frame_, bins_);
    for (std::size_t k = 0; k < spec.bins; ++k) {
      spec.real[t * spec.bins + k] = bins_[k].real();
      spec.imag[t * spec.bins + k] = bins_[k].imag();
    }
  }
  return spec;
}

template <typename T>
void StftEngine<T>::Normalizer(std::size_t frames,
                               std::vector<T>& norm) const {
  const std::size_t padded = n_fft_ + hop_ * (frames - 1);
  norm.assign(padded, T(0));
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < n_fft_; ++i) {
      norm[t * hop_ + i] += window_[i] * window_[i];
    }
  }
  const T peak = *std::max_element(norm.begin(), norm.end());
  for (T& v : norm) {
    v = v > static_cast<T>(kNormFloor) * peak ? T(1) / v : T(0);
  }
}

template <typename T>
std::vector<T> StftEngine<T>::Synthesize(const Spectrogram<T>& spec,
                                         std::size_t expected_len) {
  if (spec.n_fft != n_fft_ || spec.hop != hop_ ||
      spec.bins != n_fft_ / 2 + 1 || spec.frames == 0 ||
      spec.real.size() != spec.frames * spec.bins ||
      spec.imag.size() != spec.real.size()) {
    throw Error(Errc::kShapeMismatch, "spectrogram does not match engine");
  }
  const std::size_t pad = n_fft_ / 2;
  Normalizer(spec.frames, norm_);
  std::vector<T> ola(norm_.size(), T(0));
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t k = 0; k < spec.bins; ++k) {
      bins_[k] = {spec.real[t * spec.bins + k], spec.imag[t * spec.bins + k]};
    }
    fft_.Inverse(bins_, frame_);
    T* dst = ola.data() + t * hop_;
    for (std::size_t i = 0; i < n_fft_; ++i) dst[i] += frame_[i] * window_[i];
  }
  std::vector<T> out(expected_len, T(0));
  for (std::size_t n = 0; n < expected_len && n + pad < ola.size(); ++n) {
    out[n] = ola[n + pad] * norm_[n + pad];
  }
  return out;
}

template <typename T>
void StftEngine<T>::SynthesizeAdjoint(std::span<const T> grad_wave,
                                      std::size_t frames, T* grad_real,
                                      T* grad_imag) {
  const std::size_t pad = n_fft_ / 2;
  const std::size_t bins = n_fft_ / 2 + 1;
  Normalizer(frames, norm_);
  std::vector<T> gp(norm_.size(), T(0));
  for (std::size_t n = 0; n < grad_wave.size() && n + pad < gp.size(); ++n) {
    gp[n + pad] = grad_wave[n] * norm_[n + pad];
  }
  const T edge = T(1) / static_cast<T>(n_fft_);
  const T inner = T(2) / static_cast<T>(n_fft_);
  for (std::size_t t = 0; t < frames; ++t) {
    const T* src = gp.data() + t * hop_;
    for (std::size_t i = 0; i < n_fft_; ++i) frame_[i] = src[i] * window_[i];
    fft_.Forward(frame_, bins_);
    for (std::size_t k = 0; k < bins; ++k) {
      const bool is_edge = k == 0 || k == bins - 1;
      const T c = is_edge ? edge : inner;
      if (grad_real != nullptr) grad_real[t * bins + k] += c * bins_[k].real();
      if (grad_imag != nullptr && !is_edge) {
        grad_imag[t * bins + k] += c * bins_[k].imag();
      }
    }
  }
}

template class StftEngine<float>;
template class StftEngine<double>;

Spectrogram<float> Stft(const Waveform& x, std::size_t n_fft,
                        std::size_t hop) {
  Validate(x);
  StftEngine<float> engine(n_fft, hop);
  return engine.Analyze(x.samples);
}

Waveform Istft(const Spectrogram<float>& spec, std::size_t expected_len,
               int sample_rate) {
  CheckCola(spec.n_fft, spec.hop);
  StftEngine<float> engine(spec.n_fft, spec.hop);
  return {engine.Synthesize(spec, expected_len), sample_rate};
}

template <typename T>
IstftOp<T>::IstftOp(std::size_t n_fft, std::size_t hop, std::size_t length)
    : engine_(n_fft, hop), length_(length) {
  CheckCola(n_fft, hop);
  spec_.n_fft = n_fft;
  spec_.hop = hop;
  spec_.bins = n_fft / 2 + 1;
}

template <typename T>
grad::Shape IstftOp<T>::OutputShape(
    std::span<const grad::Shape> inputs) const {
  if (inputs.size() != 2 || inputs[0] != inputs[1] || inputs[0].size() != 2 ||
      inputs[0][1] != spec_.bins) {
    throw Error(Errc::kShapeMismatch,
                "istft expects real and imag planes [frames," +
                    std::to_string(spec_.bins) + "]");
  }
  return {length_};
}

template <typename T>
void IstftOp<T>::Forward(std::span<const grad::Tensor<T>* const> inputs,
                         grad::Tensor<T>& out) {
  spec_.frames = inputs[0]->dim(0);
  spec_.real.assign(inputs[0]->data().begin(), inputs[0]->data().end());
  spec_.imag.assign(inputs[1]->data().begin(), inputs[1]->data().end());
  std::vector<T> wave = engine_.Synthesize(spec_, length_);
  std::copy(wave.begin(), wave.end(), out.data().begin());
}

template <typename T>
void IstftOp<T>::Backward(std::span<const grad::Tensor<T>* const> inputs,
                          const grad::Tensor<T>& /*out*/,
                          std::span<const T> grad_out,
                          std::span<T* const> grad_in) {
  engine_.SynthesizeAdjoint(grad_out, inputs[0]->dim(0), grad_in[0],
                            grad_in[1]);
}

template class IstftOp<float>;
template class IstftOp<double>;

}  // namespace aptsep::dsp
