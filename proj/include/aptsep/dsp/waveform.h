// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef APTSEP_DSP_WAVEFORM_H_
#define APTSEP_DSP_WAVEFORM_H_

#include <filesystem>
#include <vector>

namespace aptsep::dsp {

struct Waveform {
  std::vector<float> samples;
  int sample_rate = 8000;

  std::size_t size() const { return samples.size(); }
};

// Throws kInvalidArgument unless non-empty, finite, positive rate.
void Validate(const Waveform& x);

// 16-bit PCM mono RIFF/WAVE. Samples are clipped to [-1, 1) on write.
void WriteWav(const std::filesystem::path& path, const Waveform& x);
// Accepts 16-bit PCM mono only; anything else is kCorruptFile.
Waveform ReadWav(const std::filesystem::path& path);

// Round-trips a float sample through the 16-bit PCM representation.
float QuantizePcm16(float v);

}  // namespace aptsep::dsp

#endif  // APTSEP_DSP_WAVEFORM_H_
