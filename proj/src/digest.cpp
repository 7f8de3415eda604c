#include "pairforge/digest.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace pairforge {

std::string to_hex(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

std::string prompt_digest(std::string_view system, std::string_view user) {
  std::uint64_t h = fnv1a64(system);
  h = fnv1a64("\x1f", h);
  h = fnv1a64(user, h);
  return to_hex(h);
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot read file for digest: " + path);
  }
  std::uint64_t h = kFnvOffset;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    std::streamsize got = in.gcount();
    h = fnv1a64(std::string_view(buf.data(), static_cast<std::size_t>(got)), h);
  }
  return to_hex(h);
}

}  // namespace pairforge
