// Copyright 2026 The aptsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef APTSEP_COMMON_HASH_H_
#define APTSEP_COMMON_HASH_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace aptsep {

// Lowercase hex SHA-256.
std::string Sha256Hex(std::string_view bytes);
std::string Sha256File(const std::filesystem::path& path);

std::string Base64Encode(std::span<const std::uint8_t> bytes);
// Throws kCorruptFile on malformed input.
std::vector<std::uint8_t> Base64Decode(std::string_view text);

}  // namespace aptsep

#endif  // APTSEP_COMMON_HASH_H_
