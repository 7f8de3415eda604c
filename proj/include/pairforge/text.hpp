#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace pairforge {

std::string_view trim(std::string_view s);

// Trims and collapses every internal whitespace run to a single space.
std::string normalize_whitespace(std::string_view s);

// Number of Unicode scalar values in a UTF-8 string (continuation bytes are
// not counted). Tokenizer-agnostic length for tie-breaking.
std::size_t count_scalars(std::string_view s);

// Keeps at most max_scalars scalar values, never splitting a UTF-8 sequence.
std::string truncate_scalars(std::string_view s, std::size_t max_scalars);

}  // namespace pairforge
