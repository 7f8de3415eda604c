#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace pairforge {

// FNV-1a, 64 bit. Stable across platforms and runs, which is what the
// scripting/manifest machinery needs; not a cryptographic hash.
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

constexpr std::uint64_t fnv1a64(std::string_view data,
                                std::uint64_t seed = kFnvOffset) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= static_cast<std::uint64_t>(c);
    h *= kFnvPrime;
  }
  return h;
}

std::string to_hex(std::uint64_t value);

// Canonical digest of a chat prompt: system and user joined by a unit
// separator so ("a","b") and ("ab","") cannot collide.
std::string prompt_digest(std::string_view system, std::string_view user);

// Digest of a file's raw bytes. Throws std::runtime_error if unreadable.
std::string file_digest(const std::string& path);

}  // namespace pairforge
