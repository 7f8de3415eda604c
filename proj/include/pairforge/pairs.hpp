#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "pairforge/fraction.hpp"
#include "pairforge/instruct.hpp"
#include "pairforge/reward.hpp"
#include "pairforge/sampler.hpp"

namespace pairforge {

enum class TieBreak { kNone, kChosenShortest, kRejectedLongest, kBoth };

std::string to_string(TieBreak t);
TieBreak tiebreak_from_string(const std::string& s);

struct PreferencePair {
  std::string instruction_id;
  std::string instruction_text;
  std::string chosen_text;
  std::string rejected_text;
  Fraction chosen_score;
  Fraction rejected_score;
  int chosen_index = 0;
  int rejected_index = 0;
  TieBreak tiebreak_applied = TieBreak::kNone;
  std::string doc_id;
};

struct PairDiscard {
  std::string instruction_id;
  std::string reason;  // "degenerate" or "too_few_responses"

  Json to_json() const;
};

struct ScoredResponse {
  int index = 0;
  std::string text;
  std::size_t length_chars = 0;
  Fraction value;
};

// Chosen = shortest response among those attaining the maximum score
// (length ties by lowest index); rejected = longest among those attaining the
// minimum (ties by lowest index). All-equal scores carry no preference
// signal, so the instruction is discarded as degenerate.
std::variant<PreferencePair, PairDiscard> build_pair(
    const std::string& instruction_id, const std::string& instruction_text,
    const std::string& doc_id, const std::vector<ScoredResponse>& responses);

struct PairSet {
  std::vector<PreferencePair> pairs;
  std::vector<PairDiscard> discards;
};

// One pair or one discard per instruction, in instruction order.
PairSet build_all(const std::vector<Instruction>& instructions,
                  const std::vector<ResponseSample>& samples,
                  const std::vector<AggregateScore>& scores);

Json pair_to_json(const PreferencePair& pair);
PreferencePair pair_from_json(const Json& j);

// DPO-style JSONL: {"prompt","chosen","rejected","chosen_score",
// "rejected_score","meta"} per line, scores as exact decimal strings.
void export_pairs(const std::vector<PreferencePair>& pairs,
                  const std::filesystem::path& path);
std::vector<PreferencePair> load_pairs(const std::string& path);

// Seeded uniform shuffle partitioned into m near-equal subsets (sizes differ
// by at most one, larger subsets first). Disjoint, covering, deterministic
// per seed. Requires 1 <= m <= |items|.
std::vector<std::vector<std::string>> split_iterations(
    const std::vector<std::string>& items, int m, std::uint64_t seed);

}  // namespace pairforge
