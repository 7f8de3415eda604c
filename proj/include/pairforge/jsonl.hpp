#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace pairforge {

// Insertion-ordered JSON so every record serializes with a fixed key order;
// the file schemas promise byte-identical write -> read -> write.
using Json = nlohmann::ordered_json;

struct JsonlLineError {
  std::size_t line_number = 0;  // 1-based
  std::string message;
};

// Calls on_record(line_number, parsed) for every non-empty line. Parse and
// schema errors are reported through on_error; on_record may also throw
// JsonlLineError wrapped in std::invalid_argument-like types via the caller.
// Returns the number of lines visited. Throws std::runtime_error if the file
// cannot be opened.
std::size_t for_each_jsonl_line(
    const std::string& path,
    const std::function<void(std::size_t, const std::string&)>& on_line);

std::vector<Json> read_jsonl(const std::string& path);

std::string render_jsonl(const std::vector<Json>& records);

// Writes content to a temp file in the target directory then renames it over
// the final path, so readers never observe a partial file.
void atomic_write_file(const std::filesystem::path& path,
                       const std::string& content);

void write_jsonl(const std::filesystem::path& path,
                 const std::vector<Json>& records);

std::string read_file(const std::string& path);

}  // namespace pairforge
