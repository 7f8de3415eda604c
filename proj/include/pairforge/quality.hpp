#pragma once

#include <string>
#include <vector>

#include "pairforge/corpus.hpp"
#include "pairforge/gateway.hpp"

namespace pairforge {

/// One judge verdict on a document's 5-point quality.
struct QualityJudgment {
  std::string doc_id;
  int score = 0;  // 1..5
  std::string rationale;  // reasoning text preceding the score line
  std::string raw;        // full completion

  Json to_json() const;
  static QualityJudgment from_json(const Json& j);
};

struct ScoreFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ScoreRangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The scoring prompt with the document substituted between the document
// markers. Throws std::invalid_argument on an empty document.
std::string render_quality_prompt(const UgcDocument& doc);

// Last occurrence of case-insensitive "Score:" followed by an integer.
// No such occurrence -> ScoreFormatError; integer outside 1..5 ->
// ScoreRangeError.
int parse_quality_score(const std::string& completion);

struct QualityReject {
  UgcDocument doc;
  std::string error;
};

struct ScreenResult {
  std::vector<UgcDocument> scored;  // quality_score populated, input order
  std::vector<QualityJudgment> judgments;
  std::vector<QualityReject> rejects;
};

// Scores every document with the judge backend (greedy decoding). Documents
// whose judgments fail to parse are quarantined to rejects, never dropped.
ScreenResult screen(const std::vector<UgcDocument>& docs, Gateway& gateway,
                    Backend& judge, int workers = 1);

}  // namespace pairforge
