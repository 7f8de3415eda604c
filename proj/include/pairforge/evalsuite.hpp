#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pairforge/fraction.hpp"
#include "pairforge/gateway.hpp"
#include "pairforge/reward.hpp"

namespace pairforge {

enum class PairLabel { kFirst, kSecond, kTie };
enum class GoldLabel { kFirst, kSecond };

std::string to_string(PairLabel label);
std::string to_string(GoldLabel label);

/// Position-debiased gold judgment for one response pair. Order verdicts are
/// expressed in terms of the underlying responses (first = resp_a as passed),
/// after un-swapping the second ordering.
struct PairJudgment {
  enum class Verdict { kFirst, kSecond, kTie, kDiscarded };

  std::string item_id;
  Verdict verdict = Verdict::kDiscarded;
  std::optional<GoldLabel> order_ab_verdict;
  std::optional<GoldLabel> order_ba_verdict;
  std::string discard_reason;  // set iff verdict == kDiscarded

  Json to_json() const;
  static PairJudgment from_json(const Json& j);
};

// Pairwise judge template ("m"/"M" identifiers) with the instruction and the
// two outputs substituted.
std::string render_pair_judge_prompt(const std::string& instruction,
                                     const std::string& output_1,
                                     const std::string& output_2);

// Judges the pair twice with switched positions (greedy decoding) and keeps
// the item only when both orderings name the same underlying response.
// Verdicts track response identity, not slot order.
PairJudgment judge_pair_debiased(Gateway& gateway, Backend& judge,
                                 const std::string& item_id,
                                 const std::string& instruction,
                                 const std::string& resp_a,
                                 const std::string& resp_b);

// Mean of per-item credit: 1 for a match, 0.5 for a predicted tie, else 0.
double agreement_with_ties(const std::vector<PairLabel>& preds,
                           const std::vector<GoldLabel>& gold);

// Accuracy over non-tie predictions only; all-tie input is undefined and
// throws std::invalid_argument.
double agreement_without_ties(const std::vector<PairLabel>& preds,
                              const std::vector<GoldLabel>& gold);

// Chance-corrected agreement between two label sequences over a shared
// finite set. Degenerate when expected agreement is 1 (both raters constant
// on the same label); throws std::invalid_argument with an explanation.
double cohens_kappa(const std::vector<std::string>& labels_a,
                    const std::vector<std::string>& labels_b);

struct AgreementReport {
  std::size_t n_items = 0;
  std::size_t n_ties = 0;
  double agreement_with_ties = 0.0;
  std::optional<double> agreement_without_ties;  // absent when every pred ties
  std::optional<double> kappa;  // absent when degenerate or no non-tie preds

  Json to_json() const;
};

// Reward prediction per gold item: first/second/tie by comparing the two
// aggregate values (exact rational equality when tie_epsilon == 0). n_prime
// truncates each raw-score list to its first n_prime judgments, so
// self-consistency sweeps replay offline from one full run. Discarded gold
// items are skipped; a kept gold item missing from either table is an error
// naming the missing ids.
AgreementReport compare_reward_to_gold(
    const std::vector<AggregateScore>& scores_a,
    const std::vector<AggregateScore>& scores_b,
    const std::vector<PairJudgment>& gold, double tie_epsilon = 0.0,
    std::optional<int> n_prime = std::nullopt);

std::string agreement_report_table(
    const std::vector<std::pair<std::string, AgreementReport>>& rows);

struct ScoreHistogram {
  int n = 8;  // bin width is 1/n
  std::vector<std::pair<Fraction, std::size_t>> bins;  // lower edge -> count
  double mean = 0.0;
  double variance = 0.0;  // population variance
};

// Counts per aggregate-value bin of width 1/n over [1,5]. Empty table throws.
ScoreHistogram score_distribution(const std::vector<AggregateScore>& table,
                                  int n);

std::string histogram_to_csv(const ScoreHistogram& histogram);

}  // namespace pairforge
