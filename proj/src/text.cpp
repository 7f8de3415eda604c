#include "pairforge/text.hpp"

#include <cctype>

namespace pairforge {

namespace {

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

}  // namespace

std::string_view trim(std::string_view s) {
  std::size_t begin = 0;
  while (begin < s.size() && is_space(s[begin])) ++begin;
  std::size_t end = s.size();
  while (end > begin && is_space(s[end - 1])) --end;
  return s.substr(begin, end - begin);
}

std::string normalize_whitespace(std::string_view s) {
  std::string_view trimmed = trim(s);
  std::string out;
  out.reserve(trimmed.size());
  bool in_run = false;
  for (char c : trimmed) {
    if (is_space(c)) {
      in_run = true;
      continue;
    }
    if (in_run && !out.empty()) {
      out += ' ';
    }
    in_run = false;
    out += c;
  }
  return out;
}

std::size_t count_scalars(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string truncate_scalars(std::string_view s, std::size_t max_scalars) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) {
      if (n == max_scalars) {
        return std::string(s.substr(0, i));
      }
      ++n;
    }
  }
  return std::string(s);
}

}  // namespace pairforge
