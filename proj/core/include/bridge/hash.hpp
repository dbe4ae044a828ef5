#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace bridge {

/// FNV-1a 64-bit content hash; used for run ids and artifact identity.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value);

/// Hash of a file's bytes, as a 16-hex-digit string.
std::string file_hash(const std::filesystem::path& path);

}  // namespace bridge
