// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef APTSEP_DSP_MEL_H_
#define APTSEP_DSP_MEL_H_

#include <cstddef>
#include <vector>

#include "aptsep/dsp/stft.h"
#include "aptsep/dsp/waveform.h"

namespace aptsep::dsp {

inline constexpr float kLogFloor = 1e-10f;

struct MelConfig {
  std::size_t n_fft = 256;
  std::size_t hop = 64;
  std::size_t n_mels = 32;
  int sample_rate = 8000;
};

double HzToMel(double hz);
double MelToHz(double mel);

// n_mels x (n_fft/2 + 1), row-major. Triangular filters with peak 1 whose
// centres are equally spaced on the 2595 log10(1 + f/700) scale between 0
// and sample_rate/2. Throws kDegenerateBand if any filter has no support on
// the FFT bin grid.
struct MelFilterbank {
  std::size_t n_mels = 0;
  std::size_t bins = 0;
  std::vector<float> weights;
  std::vector<double> center_hz;

  float at(std::size_t m, std::size_t k) const { return weights[m * bins + k]; }
};

MelFilterbank MakeMelFilterbank(std::size_t n_mels, std::size_t n_fft,
                                int sample_rate);

// frames x n_mels log(mel power + 1e-10).
struct MelSpec {
  std::size_t frames = 0;
  std::size_t n_mels = 0;
  std::vector<float> values;

  float at(std::size_t t, std::size_t m) const {
    return values[t * n_mels + m];
  }
};

MelSpec MelSpectrogram(const Waveform& x, const MelConfig& config);
MelSpec MelSpectrogram(const Spectrogram<float>& spec,
                       const MelFilterbank& fb);

}  // namespace aptsep::dsp

#endif  // APTSEP_DSP_MEL_H_
