// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "aptsep/dsp/mel.h"
#include "aptsep/dsp/stft.h"
#include "aptsep/dsp/waveform.h"
#include "doctest.h"

using aptsep::Errc;
using aptsep::Error;
using namespace aptsep::dsp;

namespace {

Waveform Sine(double hz, std::size_t n, double amp = 1.0, double phase = 0.0) {
  Waveform w;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.samples[i] = static_cast<float>(
        amp * std::sin(2 * std::numbers::pi * hz * i / 8000.0 + phase));
  }
  return w;
}

Waveform Noise(std::size_t n, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<float> d(-1.f, 1.f);
  Waveform w;
  w.samples.resize(n);
  for (float& v : w.samples) v = d(gen);
  return w;
}

double Energy(const std::vector<float>& x) {
  double e = 0;
  for (float v : x) e += static_cast<double>(v) * v;
  return e;
}

}  // namespace

TEST_CASE("stft: zeros give an all-zero spectrogram of 1 + L/hop frames") {
  Waveform z;
  z.samples.assign(8000, 0.0f);
  Spectrogram<float> s = Stft(z, 256, 64);
  CHECK(s.frames == 126);
  CHECK(s.bins == 129);
  for (float v : s.real) CHECK(v == 0.0f);
  for (float v : s.imag) CHECK(v == 0.0f);
}

TEST_CASE("stft: 1 kHz sine peaks at bin 32 in interior frames") {
  Spectrogram<float> s = Stft(Sine(1000, 8000), 256, 64);
  for (std::size_t t = 2; t + 2 < s.frames; ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < s.bins; ++k) {
      if (s.Magnitude(t, k) > s.Magnitude(t, best)) best = k;
    }
    CHECK(best == 1000 * 256 / 8000);
  }
}

TEST_CASE("stft: Parseval against window-energy-scaled signal energy") {
  const std::size_t n_fft = 256, hop = 64;
  Waveform x = Noise(64000, 3);
  Spectrogram<float> s = Stft(x, n_fft, hop);
  double spec_energy = 0.0;
  for (std::size_t t = 0; t < s.frames; ++t) {
    for (std::size_t k = 0; k < s.bins; ++k) {
      const double m = s.Magnitude(t, k);
      const double weight = (k == 0 || k == s.bins - 1) ? 1.0 : 2.0;
      spec_energy += weight * m * m;
    }
  }
  const auto w = HannWindow<double>(n_fft);
  double win_energy = 0.0;
  for (double v : w) win_energy += v * v;
  const double expected = n_fft * (win_energy / hop) * Energy(x.samples);
  CHECK(std::abs(spec_energy / expected - 1.0) < 0.01);
}

TEST_CASE("stft: input shorter than n_fft is rejected") {
  Waveform x;
  x.samples.assign(100, 0.1f);
  try {
    Stft(x, 256, 64);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kInputTooShort);
  }
}

TEST_CASE("stft is linear in its input") {
  Waveform x = Noise(4096, 9), y = x;
  for (float& v : y.samples) v *= 3.0f;
  Spectrogram<float> a = Stft(x, 256, 64), b = Stft(y, 256, 64);
  double worst = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < a.real.size(); ++i) {
    worst = std::max(worst, std::abs(3.0 * a.real[i] - b.real[i]));
    worst = std::max(worst, std::abs(3.0 * a.imag[i] - b.imag[i]));
    peak = std::max(peak, std::abs(3.0 * a.real[i]));
  }
  CHECK(worst / peak < 1e-6);
}

TEST_CASE("istft(stft(x)) reconstructs random signals (COLA property)") {
  for (unsigned seed = 0; seed < 10; ++seed) {
    const std::size_t len = 1024 + 97 * seed;  // >= 4 * n_fft
    Waveform x = Noise(len, seed);
    Waveform y = Istft(Stft(x, 256, 64), len, 8000);
    REQUIRE(y.size() == len);
    double worst = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      worst = std::max(worst, static_cast<double>(
                                  std::abs(x.samples[i] - y.samples[i])));
    }
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("istft: zeros in, zeros out; sine energy preserved") {
  Spectrogram<float> s = Stft(Sine(440, 8000), 256, 64);
  Spectrogram<float> z = s;
  std::fill(z.real.begin(), z.real.end(), 0.0f);
  std::fill(z.imag.begin(), z.imag.end(), 0.0f);
  for (float v : Istft(z, 8000, 8000).samples) CHECK(v == 0.0f);
  Waveform x = Sine(440, 8000);
  Waveform y = Istft(s, 8000, 8000);
  CHECK(std::abs(Energy(y.samples) / Energy(x.samples) - 1.0) < 1e-3);
}

TEST_CASE("istft: non-COLA hop is rejected") {
  Spectrogram<float> s = Stft(Noise(1024, 1), 256, 128);
  try {
    Istft(s, 1024, 8000);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kNonCola);
  }
  CHECK_NOTHROW(CheckCola(256, 64));
}

TEST_CASE("mel filterbank: rows positive, peaks increasing, degenerate rejected") {
  MelFilterbank fb = MakeMelFilterbank(32, 256, 8000);
  CHECK(fb.n_mels == 32);
  CHECK(fb.bins == 129);
  for (std::size_t m = 0; m < fb.n_mels; ++m) {
    double sum = 0.0;
    std::size_t peak_bin = 0;
    for (std::size_t k = 0; k < fb.bins; ++k) {
      CHECK(fb.at(m, k) >= 0.0f);
      sum += fb.at(m, k);
      if (fb.at(m, k) > fb.at(m, peak_bin)) peak_bin = k;
    }
    CHECK(sum > 0.0);
    if (m > 0) CHECK(fb.center_hz[m] > fb.center_hz[m - 1]);
  }
  // Coverage: the first filter starts at 0 Hz and the last ends at Nyquist.
  CHECK(fb.at(0, 1) > 0.0f);
  CHECK(fb.at(31, 127) > 0.0f);
  try {
    MakeMelFilterbank(120, 256, 8000);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kDegenerateBand);
  }
}

TEST_CASE("mel spectrogram: pure tone concentrates in at most two filters") {
  MelFilterbank fb = MakeMelFilterbank(32, 256, 8000);
  Spectrogram<float> s = Stft(Sine(1000, 8000), 256, 64);
  const std::size_t t = s.frames / 2;
  std::vector<double> e(fb.n_mels, 0.0);
  for (std::size_t m = 0; m < fb.n_mels; ++m) {
    for (std::size_t k = 0; k < fb.bins; ++k) {
      const double mag = s.Magnitude(t, k);
      e[m] += fb.at(m, k) * mag * mag;
    }
  }
  std::vector<double> sorted = e;
  std::sort(sorted.rbegin(), sorted.rend());
  double total = 0.0;
  for (double v : e) total += v;
  CHECK((sorted[0] + sorted[1]) / total > 0.9);
}

TEST_CASE("mel spectrogram: floor, scaling, shape, phase invariance") {
  MelConfig cfg;
  Waveform z;
  z.samples.assign(8000, 0.0f);
  MelSpec zs = MelSpectrogram(z, cfg);
  CHECK(zs.frames == 126);
  CHECK(zs.n_mels == 32);
  const float floor_value =
      static_cast<float>(std::log(static_cast<double>(kLogFloor)));
  for (float v : zs.values) CHECK(v == floor_value);

  MelSpec quiet = MelSpectrogram(Sine(1000, 8000, 0.05), cfg);
  MelSpec loud = MelSpectrogram(Sine(1000, 8000, 0.5), cfg);
  int checked = 0;
  for (std::size_t i = 0; i < quiet.values.size(); ++i) {
    if (quiet.values[i] > std::log(1e-4)) {  // far above the floor
      CHECK(loud.values[i] - quiet.values[i] ==
            doctest::Approx(std::log(100.0)).epsilon(1e-3));
      ++checked;
    }
  }
  CHECK(checked > 0);

  MelSpec shifted = MelSpectrogram(Sine(1000, 8000, 0.5, 1.234), cfg);
  for (std::size_t t = 4; t + 4 < loud.frames; ++t) {
    for (std::size_t m = 0; m < loud.n_mels; ++m) {
      if (loud.at(t, m) > std::log(1e-3)) {
        CHECK(std::abs(loud.at(t, m) - shifted.at(t, m)) < 1e-3);
      }
    }
  }
}

TEST_CASE("wav: 16-bit PCM round trip and corrupt input") {
  auto dir = std::filesystem::temp_directory_path() / "aptsep_dsp_test";
  std::filesystem::create_directories(dir);
  Waveform x = Sine(300, 800, 0.5);
  WriteWav(dir / "a.wav", x);
  Waveform y = ReadWav(dir / "a.wav");
  CHECK(y.sample_rate == 8000);
  REQUIRE(y.size() == x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(y.samples[i] == QuantizePcm16(x.samples[i]));
  }
  {
    std::ofstream os(dir / "bad.wav", std::ios::binary);
    os << "RIFF0000WAVEjunk";
  }
  try {
    ReadWav(dir / "bad.wav");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kCorruptFile);
  }
  std::filesystem::remove_all(dir);
}
