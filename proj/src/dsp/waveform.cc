// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "aptsep/dsp/waveform.h"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "aptsep/common/error.h"

namespace aptsep::dsp {
namespace {

std::int16_t ToPcm(float v) {
  const float clipped = std::fmax(-1.0f, std::fmin(v, 32767.0f / 32768.0f));
  return static_cast<std::int16_t>(std::lrint(clipped * 32768.0f));
}

void PutU32(std::ofstream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void PutU16(std::ofstream& os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v),
                              static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char*>(b), 2);
}

std::uint32_t GetU32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t GetU16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

void Validate(const Waveform& x) {
  if (x.samples.empty()) throw Error(Errc::kInvalidArgument, "empty waveform");
  if (x.sample_rate <= 0) {
    throw Error(Errc::kInvalidArgument, "sample rate must be positive");
  }
  for (float v : x.samples) {
    if (!std::isfinite(v)) throw Error(Errc::kNonFinite, "waveform sample");
  }
}

float QuantizePcm16(float v) { return static_cast<float>(ToPcm(v)) / 32768.0f; }

void WriteWav(const std::filesystem::path& path, const Waveform& x) {
  Validate(x);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(Errc::kIo, "cannot write " + path.string());
  const std::uint32_t data_bytes =
      static_cast<std::uint32_t>(x.samples.size() * 2);
  os.write("RIFF", 4);
  PutU32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  PutU32(os, 16);
  PutU16(os, 1);  // PCM
  PutU16(os, 1);  // mono
  PutU32(os, static_cast<std::uint32_t>(x.sample_rate));
  PutU32(os, static_cast<std::uint32_t>(x.sample_rate) * 2);
  PutU16(os, 2);
  PutU16(os, 16);
  os.write("data", 4);
  PutU32(os, data_bytes);
  for (float v : x.samples) PutU16(os, static_cast<std::uint16_t>(ToPcm(v)));
  if (!os) throw Error(Errc::kIo, "short write to " + path.string());
}

Waveform ReadWav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::kIo, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  auto corrupt = [&](const char* why) {
    return Error(Errc::kCorruptFile, path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw corrupt("not a RIFF/WAVE file");
  }
  Waveform out;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = GetU32(chunk + 4);
    if (pos + 8 + len > bytes.size()) throw corrupt("truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16) throw corrupt("short fmt chunk");
      if (GetU16(chunk + 8) != 1 || GetU16(chunk + 10) != 1 ||
          GetU16(chunk + 22) != 16) {
        throw corrupt("only 16-bit PCM mono is supported");
      }
      out.sample_rate = static_cast<int>(GetU32(chunk + 12));
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw corrupt("data before fmt");
      out.samples.resize(len / 2);
      for (std::size_t i = 0; i < out.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(GetU16(chunk + 8 + 2 * i));
        out.samples[i] = static_cast<float>(v) / 32768.0f;
      }
      return out;
    }
    pos += 8 + len + (len & 1);
  }
  throw corrupt("no data chunk");
}

}  // namespace aptsep::dsp
