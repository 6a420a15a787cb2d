// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "aptsep/models/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "aptsep/common/error.h"
#include "json.hpp"

namespace aptsep::models {
namespace {

using Json = nlohmann::json;
constexpr char kMagic[8] = {'A', 'P', 'T', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void PutU64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

std::uint64_t GetU64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i]))
         << (8 * i);
  }
  return v;
}

[[noreturn]] void Corrupt(const std::filesystem::path& path,
                          const std::string& why) {
  throw Error(Errc::kCorruptFile, path.string() + ": " + why);
}

}  // namespace

bool Checkpoint::Has(const std::string& name) const {
  for (const NamedTensor& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

const grad::Tensor<float>& Checkpoint::Get(const std::string& name) const {
  for (const NamedTensor& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw Error(Errc::kInvalidArgument, "checkpoint has no tensor '" + name + "'");
}

grad::Tensor<float>& Checkpoint::Mutable(const std::string& name) {
  for (NamedTensor& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw Error(Errc::kInvalidArgument, "checkpoint has no tensor '" + name + "'");
}

void Checkpoint::SetFrozen(bool frozen) {
  for (NamedTensor& t : tensors) t.frozen = frozen;
}

std::size_t Checkpoint::ParameterCount() const {
  std::size_t n = 0;
  for (const NamedTensor& t : tensors) n += t.value.size();
  return n;
}

bool operator==(const Checkpoint& a, const Checkpoint& b) {
  if (a.version != b.version || a.model != b.model ||
      a.model_config != b.model_config || a.config_hash != b.config_hash ||
      a.seed != b.seed || a.epoch != b.epoch ||
      a.tensors.size() != b.tensors.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    const NamedTensor& x = a.tensors[i];
    const NamedTensor& y = b.tensors[i];
    if (x.name != y.name || x.frozen != y.frozen ||
        x.value.shape() != y.value.shape() ||
        std::memcmp(x.value.data().data(), y.value.data().data(),
                    x.value.size() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

void SaveCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  Json header;
  header["version"] = ckpt.version;
  header["model"] = ckpt.model;
  header["model_config"] = ckpt.model_config;
  header["config_hash"] = ckpt.config_hash;
  header["seed"] = std::to_string(ckpt.seed);
  header["epoch"] = ckpt.epoch;
  header["tensors"] = Json::array();
  for (const NamedTensor& t : ckpt.tensors) {
    header["tensors"].push_back({{"name", t.name},
                                 {"shape", t.value.shape()},
                                 {"dtype", "f32"},
                                 {"frozen", t.frozen},
                                 {"bytes", t.value.size() * sizeof(float)}});
  }
  const std::string text = header.dump();
  std::string blob(kMagic, sizeof(kMagic));
  PutU64(blob, text.size());
  blob += text;
  for (const NamedTensor& t : ckpt.tensors) {
    blob.append(reinterpret_cast<const char*>(t.value.data().data()),
                t.value.size() * sizeof(float));
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!os) throw Error(Errc::kIo, "cannot write " + path.string());
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(Errc::kIo, "cannot open checkpoint " + path.string());
  const std::string blob((std::istreambuf_iterator<char>(is)),
                         std::istreambuf_iterator<char>());
  if (blob.size() < 16 || std::memcmp(blob.data(), kMagic, 8) != 0) {
    Corrupt(path, "missing APTCKPT1 magic");
  }
  const std::uint64_t header_len = GetU64(blob, 8);
  if (header_len > blob.size() - 16) Corrupt(path, "truncated header");
  Checkpoint ckpt;
  std::size_t offset = 16 + header_len;
  try {
    const Json h = Json::parse(blob.substr(16, header_len));
    ckpt.version = h.at("version").get<int>();
    if (ckpt.version != Checkpoint::kFormatVersion) {
      throw Error(Errc::kVersionMismatch,
                  path.string() + ": checkpoint version " +
                      std::to_string(ckpt.version) + ", expected " +
                      std::to_string(Checkpoint::kFormatVersion));
    }
    ckpt.model = h.at("model").get<std::string>();
    ckpt.model_config = h.at("model_config").get<std::string>();
    ckpt.config_hash = h.at("config_hash").get<std::string>();
    ckpt.seed = std::stoull(h.at("seed").get<std::string>());
    ckpt.epoch = h.at("epoch").get<int>();
    for (const Json& t : h.at("tensors")) {
      if (t.at("dtype").get<std::string>() != "f32") {
        Corrupt(path, "unsupported dtype");
      }
      grad::Shape shape = t.at("shape").get<grad::Shape>();
      const std::size_t count = grad::NumElements(shape);
      const std::size_t bytes = t.at("bytes").get<std::size_t>();
      if (bytes != count * sizeof(float)) {
        Corrupt(path, "tensor length disagrees with its shape");
      }
      if (bytes > blob.size() - offset) Corrupt(path, "truncated tensor data");
      std::vector<float> data(count);
      std::memcpy(data.data(), blob.data() + offset, bytes);
      offset += bytes;
      ckpt.tensors.push_back({t.at("name").get<std::string>(),
                              grad::Tensor<float>(std::move(shape),
                                                  std::move(data)),
                              t.at("frozen").get<bool>()});
    }
  } catch (const Json::exception& e) {
    Corrupt(path, std::string("malformed header: ") + e.what());
  } catch (const std::invalid_argument&) {
    Corrupt(path, "malformed seed");
  } catch (const Error& e) {
    if (e.code() == Errc::kVersionMismatch || e.code() == Errc::kCorruptFile) {
      throw;
    }
    Corrupt(path, e.what());
  }
  if (offset != blob.size()) Corrupt(path, "trailing bytes after tensor data");
  return ckpt;
}

}  // namespace aptsep::models
