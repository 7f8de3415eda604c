#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pairforge/jsonl.hpp"

namespace pairforge {

/// One unit of raw user-generated content.
struct UgcDocument {
  std::string id;
  std::string text;
  std::string source;
  std::optional<int> quality_score;  // 1..5 once the quality stage has run
  std::map<std::string, std::string> meta;

  Json to_json() const;
  static UgcDocument from_json(const Json& j);
};

struct CorpusError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LoadResult {
  std::vector<UgcDocument> docs;
  std::vector<JsonlLineError> skipped;  // populated only with skip_malformed
};

// One JSON object per line, file order preserved. A malformed line aborts the
// load (CorpusError with the line number) unless skip_malformed is set, in
// which case it is counted and skipped.
LoadResult load_corpus(const std::string& path, bool skip_malformed = false);

void save_corpus(const std::filesystem::path& path,
                 const std::vector<UgcDocument>& docs);

// Drops documents whose whitespace-normalized text already occurred, keeping
// first occurrences in order.
std::vector<UgcDocument> dedup(const std::vector<UgcDocument>& docs);

// Keeps documents with quality_score >= min_score. Every document must carry
// a score (the quality stage runs first); a missing one is a CorpusError.
std::vector<UgcDocument> select_by_quality(const std::vector<UgcDocument>& docs,
                                           int min_score);

}  // namespace pairforge
