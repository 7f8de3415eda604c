#include "pairforge/jsonl.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace pairforge {

std::size_t for_each_jsonl_line(
    const std::string& path,
    const std::function<void(std::size_t, const std::string&)>& on_line) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open file: " + path);
  }
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    on_line(line_number, line);
  }
  return line_number;
}

std::vector<Json> read_jsonl(const std::string& path) {
  std::vector<Json> records;
  for_each_jsonl_line(path, [&](std::size_t line_number, const std::string& line) {
    if (line.empty()) return;
    Json parsed = Json::parse(line, nullptr, false);
    if (parsed.is_discarded()) {
      throw std::runtime_error(path + ":" + std::to_string(line_number) +
                               ": invalid JSON");
    }
    records.push_back(std::move(parsed));
  });
  return records;
}

std::string render_jsonl(const std::vector<Json>& records) {
  std::string out;
  for (const Json& record : records) {
    out += record.dump();
    out += '\n';
  }
  return out;
}

void atomic_write_file(const std::filesystem::path& path,
                       const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot write file: " + tmp.string());
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      throw std::runtime_error("short write: " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

void write_jsonl(const std::filesystem::path& path,
                 const std::vector<Json>& records) {
  atomic_write_file(path, render_jsonl(records));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open file: " + path);
  }
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

}  // namespace pairforge
