#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "pairforge/corpus.hpp"
#include "pairforge/fraction.hpp"
#include "pairforge/gateway.hpp"
#include "pairforge/instruct.hpp"
#include "pairforge/sampler.hpp"

namespace pairforge {

struct RewardRubric {
  std::string criteria;
  std::array<std::string, 5> score_descriptions;  // scores 1..5

  // "[<criteria>]\nScore 1: ...\n...\nScore 5: ..." block for the prompt.
  std::string expand() const;

  Json to_json() const;
  static RewardRubric from_json(const Json& j);
  static RewardRubric load(const std::string& path);
};

// The response-quality rubric the judge scores against by default.
const RewardRubric& default_rubric();

/// Per-response reward: the raw self-consistency judgments plus their
/// aggregate. `value` is exact (mean of small integers), so downstream
/// argmax and tie detection never touch floating point.
struct AggregateScore {
  std::string instruction_id;
  int response_index = 0;
  std::vector<int> raw_scores;  // valid parses, each 1..5
  int n_requested = 0;
  Fraction value;
  bool with_reference = true;

  Json to_json() const;
  static AggregateScore from_json(const Json& j);
};

struct RewardParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Reward prompt with instruction, response, optional reference document and
// expanded rubric substituted. When reference is absent the Reference
// Document section is omitted wholesale.
std::string render_reward_prompt(const std::string& instruction,
                                 const std::string& response,
                                 const std::optional<std::string>& reference,
                                 const RewardRubric& rubric);

// Integer following the last "[RESULT]" marker; RewardParseError when the
// marker is absent, not followed by an integer, or out of 1..5.
int parse_reward(const std::string& completion);

enum class Aggregator { kMean, kMode };

Fraction aggregate_scores(const std::vector<int>& raw_scores, Aggregator how);

struct RewardOptions {
  int n = 8;            // self-consistency samples per response
  bool batched = true;  // one n=N request vs N independent requests
  bool with_reference = true;
  Aggregator aggregator = Aggregator::kMean;
  std::size_t reference_char_budget = 100000;
  std::uint64_t seed = 0;
  int workers = 1;
};

// A score built from fewer than half the requested judgments is discarded.
int min_valid_parses(int n);

struct RewardQuarantine {
  std::string instruction_id;
  int response_index = 0;
  int n_requested = 0;
  int n_valid = 0;
  std::string reason;

  Json to_json() const;
};

struct ScoreTable {
  std::vector<AggregateScore> scores;
  std::vector<RewardQuarantine> quarantined;
  std::size_t references_truncated = 0;
};

// Scores one response with n judge samples (temperature 1.0, top_p 0.9) and
// aggregates the valid parses. Returns nothing when valid parses fall below
// min_valid_parses(n); the caller records the quarantine.
std::optional<AggregateScore> score_response(
    const std::string& instruction_text, const ResponseSample& response,
    const std::optional<std::string>& reference, const RewardRubric& rubric,
    Gateway& gateway, Backend& judge, const RewardOptions& options,
    RewardQuarantine* quarantine_out = nullptr);

// Scores every sample, passing the instruction's source document text as the
// reference (unless options.with_reference is off). A sample whose
// instruction or source document cannot be resolved is a wiring bug.
ScoreTable score_all(const std::vector<ResponseSample>& samples,
                     const std::vector<Instruction>& instructions,
                     const std::vector<UgcDocument>& docs,
                     const RewardRubric& rubric, Gateway& gateway,
                     Backend& judge, const RewardOptions& options);

std::vector<AggregateScore> load_scores(const std::string& path);
void save_scores(const std::filesystem::path& path,
                 const std::vector<AggregateScore>& scores);

}  // namespace pairforge
