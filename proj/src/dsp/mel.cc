// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "aptsep/dsp/mel.h"

#include <cmath>
#include <string>

#include "aptsep/common/error.h"

namespace aptsep::dsp {

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

MelFilterbank MakeMelFilterbank(std::size_t n_mels, std::size_t n_fft,
                                int sample_rate) {
  if (n_mels == 0 || n_fft < 4 || sample_rate <= 0) {
    throw Error(Errc::kInvalidArgument, "mel filterbank parameters");
  }
  if (n_mels >= n_fft / 2) {
    throw Error(Errc::kDegenerateBand,
                std::to_string(n_mels) + " mel bands cannot be resolved by " +
                    std::to_string(n_fft / 2 + 1) + " FFT bins");
  }
  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.bins = n_fft / 2 + 1;
  fb.weights.assign(n_mels * fb.bins, 0.0f);
  const double top = HzToMel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = MelToHz(top * static_cast<double>(i) /
                       static_cast<double>(n_mels + 1));
  }
  const double bin_hz = static_cast<double>(sample_rate) / n_fft;
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    fb.center_hz.push_back(mid);
    double row_sum = 0.0;
    for (std::size_t k = 0; k < fb.bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      double w = 0.0;
      if (f > lo && f <= mid) {
        w = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        w = (hi - f) / (hi - mid);
      }
      fb.weights[m * fb.bins + k] = static_cast<float>(w);
      row_sum += w;
    }
    if (row_sum <= 0.0) {
      throw Error(Errc::kDegenerateBand,
                  "mel filter " + std::to_string(m) + " centred at " +
                      std::to_string(mid) + " Hz covers no FFT bin");
    }
  }
  return fb;
}

MelSpec MelSpectrogram(const Spectrogram<float>& spec,
                       const MelFilterbank& fb) {
  if (spec.bins != fb.bins) {
    throw Error(Errc::kShapeMismatch, "filterbank vs spectrogram bins");
  }
  MelSpec out;
  out.frames = spec.frames;
  out.n_mels = fb.n_mels;
  out.values.resize(out.frames * out.n_mels);
  std::vector<double> power(spec.bins);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t k = 0; k < spec.bins; ++k) {
      const double re = spec.real[t * spec.bins + k];
      const double im = spec.imag[t * spec.bins + k];
      power[k] = re * re + im * im;
    }
    for (std::size_t m = 0; m < fb.n_mels; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < spec.bins; ++k) e += fb.at(m, k) * power[k];
      out.values[t * out.n_mels + m] =
          static_cast<float>(std::log(e + static_cast<double>(kLogFloor)));
    }
  }
  return out;
}

MelSpec MelSpectrogram(const Waveform& x, const MelConfig& config) {
  const MelFilterbank fb =
      MakeMelFilterbank(config.n_mels, config.n_fft, config.sample_rate);
  return MelSpectrogram(Stft(x, config.n_fft, config.hop), fb);
}

}  // namespace aptsep::dsp
