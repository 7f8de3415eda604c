#include "pairforge/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "pairforge/text.hpp"

namespace pairforge {

namespace {

const char* kJudgeTemplate =
    R"(<|im_start|>system
You are a highly efficient assistant, who evaluates and selects the best large language model (LLMs) based on the quality of their responses to a given instruction. This process will be used to create a leaderboard reflecting the most accurate and human-preferred answers.
<|im_end|>
<|im_start|>user
I require a leaderboard for various large language models. I'll provide you with prompts given to these models and their corresponding outputs. Your task is to assess these responses, and select the model that produces the best output from a human perspective.

## Instruction

{
    "instruction": ""{instruction}"",
}

## Model Outputs

Here are the unordered outputs from the models. Each output is associated with a specific model, identified by a unique model identifier.

{
    {
        "model_identifier": "m",
        "output": ""{Output_1}""
    },
    {
        "model_identifier": "M",
        "output": ""{Output_2}""
    }
}

## Task

Evaluate the models based on the quality and relevance of their outputs, and select the model that generated the best output. Answer by providing the model identifier of the best model. We will use your output as the name of the best model, so make sure your output only contains one of the following model identifiers and nothing else (no quotes, no spaces, no new lines, ...): m or M.

## Best Model Identifier
<|im_end|>)";

std::string substitute(std::string templ, const std::string& placeholder,
                       const std::string& value) {
  std::size_t pos = templ.find(placeholder);
  if (pos != std::string::npos) {
    templ.replace(pos, placeholder.size(), value);
  }
  return templ;
}

// Slot choice from a single judge completion: m = first slot, M = second.
std::optional<int> parse_slot(const std::string& completion) {
  std::string_view token = trim(completion);
  if (token == "m") return 0;
  if (token == "M") return 1;
  return std::nullopt;
}

std::string verdict_name(PairJudgment::Verdict v) {
  switch (v) {
    case PairJudgment::Verdict::kFirst:
      return "first";
    case PairJudgment::Verdict::kSecond:
      return "second";
    case PairJudgment::Verdict::kTie:
      return "tie";
    case PairJudgment::Verdict::kDiscarded:
      return "discarded";
  }
  return "discarded";
}

PairJudgment::Verdict verdict_from_name(const std::string& name) {
  if (name == "first") return PairJudgment::Verdict::kFirst;
  if (name == "second") return PairJudgment::Verdict::kSecond;
  if (name == "tie") return PairJudgment::Verdict::kTie;
  if (name == "discarded") return PairJudgment::Verdict::kDiscarded;
  throw std::invalid_argument("unknown verdict: " + name);
}

}  // namespace

std::string to_string(PairLabel label) {
  switch (label) {
    case PairLabel::kFirst:
      return "first";
    case PairLabel::kSecond:
      return "second";
    case PairLabel::kTie:
      return "tie";
  }
  return "tie";
}

std::string to_string(GoldLabel label) {
  return label == GoldLabel::kFirst ? "first" : "second";
}

Json PairJudgment::to_json() const {
  Json j;
  j["item_id"] = item_id;
  j["verdict"] = verdict_name(verdict);
  if (order_ab_verdict) {
    j["order_ab_verdict"] = to_string(*order_ab_verdict);
  }
  if (order_ba_verdict) {
    j["order_ba_verdict"] = to_string(*order_ba_verdict);
  }
  if (!discard_reason.empty()) {
    j["discard_reason"] = discard_reason;
  }
  return j;
}

PairJudgment PairJudgment::from_json(const Json& j) {
  PairJudgment out;
  out.item_id = j.at("item_id").get<std::string>();
  out.verdict = verdict_from_name(j.at("verdict").get<std::string>());
  auto parse_order = [&](const char* key) -> std::optional<GoldLabel> {
    if (!j.contains(key)) return std::nullopt;
    std::string v = j.at(key).get<std::string>();
    if (v == "first") return GoldLabel::kFirst;
    if (v == "second") return GoldLabel::kSecond;
    throw std::invalid_argument(std::string("bad ") + key + ": " + v);
  };
  out.order_ab_verdict = parse_order("order_ab_verdict");
  out.order_ba_verdict = parse_order("order_ba_verdict");
  if (j.contains("discard_reason")) {
    out.discard_reason = j.at("discard_reason").get<std::string>();
  }
  return out;
}

std::string render_pair_judge_prompt(const std::string& instruction,
                                     const std::string& output_1,
                                     const std::string& output_2) {
  std::string prompt = substitute(kJudgeTemplate, "{instruction}", instruction);
  prompt = substitute(std::move(prompt), "{Output_1}", output_1);
  return substitute(std::move(prompt), "{Output_2}", output_2);
}

PairJudgment judge_pair_debiased(Gateway& gateway, Backend& judge,
                                 const std::string& item_id,
                                 const std::string& instruction,
                                 const std::string& resp_a,
                                 const std::string& resp_b) {
  if (trim(resp_a).empty() || trim(resp_b).empty()) {
    throw std::invalid_argument("judge_pair_debiased needs non-empty responses");
  }

  auto ask = [&](const std::string& first_slot, const std::string& second_slot) {
    CompletionRequest req;
    req.user = render_pair_judge_prompt(instruction, first_slot, second_slot);
    req.temperature = 0.0;
    return parse_slot(gateway.complete(judge, req).texts.at(0));
  };

  PairJudgment result;
  result.item_id = item_id;

  std::optional<int> slot_ab = ask(resp_a, resp_b);
  std::optional<int> slot_ba = ask(resp_b, resp_a);

  if (slot_ab) {
    result.order_ab_verdict =
        *slot_ab == 0 ? GoldLabel::kFirst : GoldLabel::kSecond;
  }
  if (slot_ba) {
    // un-swap: slot 0 in the reversed ordering is resp_b
    result.order_ba_verdict =
        *slot_ba == 0 ? GoldLabel::kSecond : GoldLabel::kFirst;
  }

  if (!slot_ab || !slot_ba) {
    result.verdict = PairJudgment::Verdict::kDiscarded;
    result.discard_reason = "verdict token outside {m, M}";
    return result;
  }
  if (*result.order_ab_verdict != *result.order_ba_verdict) {
    result.verdict = PairJudgment::Verdict::kDiscarded;
    result.discard_reason = "orderings disagree (position-dependent)";
    return result;
  }
  result.verdict = *result.order_ab_verdict == GoldLabel::kFirst
                       ? PairJudgment::Verdict::kFirst
                       : PairJudgment::Verdict::kSecond;
  return result;
}

double agreement_with_ties(const std::vector<PairLabel>& preds,
                           const std::vector<GoldLabel>& gold) {
  if (preds.size() != gold.size()) {
    throw std::invalid_argument("prediction/gold length mismatch: " +
                                std::to_string(preds.size()) + " vs " +
                                std::to_string(gold.size()));
  }
  if (preds.empty()) {
    throw std::invalid_argument("agreement over zero items is undefined");
  }
  double credit = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == PairLabel::kTie) {
      credit += 0.5;
    } else if ((preds[i] == PairLabel::kFirst) ==
               (gold[i] == GoldLabel::kFirst)) {
      credit += 1.0;
    }
  }
  return credit / static_cast<double>(preds.size());
}

double agreement_without_ties(const std::vector<PairLabel>& preds,
                              const std::vector<GoldLabel>& gold) {
  if (preds.size() != gold.size()) {
    throw std::invalid_argument("prediction/gold length mismatch: " +
                                std::to_string(preds.size()) + " vs " +
                                std::to_string(gold.size()));
  }
  std::size_t considered = 0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == PairLabel::kTie) continue;
    ++considered;
    if ((preds[i] == PairLabel::kFirst) == (gold[i] == GoldLabel::kFirst)) {
      ++correct;
    }
  }
  if (considered == 0) {
    throw std::invalid_argument(
        "agreement without ties is undefined: every prediction is a tie");
  }
  return static_cast<double>(correct) / static_cast<double>(considered);
}

double cohens_kappa(const std::vector<std::string>& labels_a,
                    const std::vector<std::string>& labels_b) {
  if (labels_a.size() != labels_b.size()) {
    throw std::invalid_argument("label sequences differ in length");
  }
  if (labels_a.empty()) {
    throw std::invalid_argument("kappa over zero items is undefined");
  }
  const double n = static_cast<double>(labels_a.size());
  std::map<std::string, std::size_t> freq_a;
  std::map<std::string, std::size_t> freq_b;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < labels_a.size(); ++i) {
    ++freq_a[labels_a[i]];
    ++freq_b[labels_b[i]];
    if (labels_a[i] == labels_b[i]) ++agree;
  }
  double p_o = static_cast<double>(agree) / n;
  double p_e = 0.0;
  for (const auto& [label, count_a] : freq_a) {
    auto it = freq_b.find(label);
    if (it == freq_b.end()) continue;
    p_e += (static_cast<double>(count_a) / n) *
           (static_cast<double>(it->second) / n);
  }
  if (p_e >= 1.0) {
    throw std::invalid_argument(
        "kappa degenerate: both raters assign a single identical label, "
        "chance agreement is 1");
  }
  return (p_o - p_e) / (1.0 - p_e);
}

Json AgreementReport::to_json() const {
  Json j;
  j["n_items"] = n_items;
  j["n_ties"] = n_ties;
  j["agreement_with_ties"] = agreement_with_ties;
  if (agreement_without_ties) {
    j["agreement_without_ties"] = *agreement_without_ties;
  } else {
    j["agreement_without_ties"] = nullptr;
  }
  if (kappa) {
    j["kappa"] = *kappa;
  } else {
    j["kappa"] = nullptr;
  }
  return j;
}

AgreementReport compare_reward_to_gold(
    const std::vector<AggregateScore>& scores_a,
    const std::vector<AggregateScore>& scores_b,
    const std::vector<PairJudgment>& gold, double tie_epsilon,
    std::optional<int> n_prime) {
  if (n_prime && *n_prime < 1) {
    throw std::invalid_argument("n_prime must be >= 1");
  }

  std::unordered_map<std::string, const AggregateScore*> by_id_a;
  for (const AggregateScore& s : scores_a) by_id_a[s.instruction_id] = &s;
  std::unordered_map<std::string, const AggregateScore*> by_id_b;
  for (const AggregateScore& s : scores_b) by_id_b[s.instruction_id] = &s;

  auto truncated_value = [&](const AggregateScore& score) {
    if (!n_prime) return score.value;
    std::size_t take = std::min<std::size_t>(
        static_cast<std::size_t>(*n_prime), score.raw_scores.size());
    if (take == 0) {
      throw std::invalid_argument("score for " + score.instruction_id +
                                  " has no raw judgments to truncate");
    }
    std::vector<int> prefix(score.raw_scores.begin(),
                            score.raw_scores.begin() +
                                static_cast<std::ptrdiff_t>(take));
    return aggregate_scores(prefix, Aggregator::kMean);
  };

  std::vector<PairLabel> preds;
  std::vector<GoldLabel> golds;
  std::vector<std::string> missing;
  for (const PairJudgment& item : gold) {
    if (item.verdict == PairJudgment::Verdict::kDiscarded) continue;
    auto a = by_id_a.find(item.item_id);
    auto b = by_id_b.find(item.item_id);
    if (a == by_id_a.end() || b == by_id_b.end()) {
      missing.push_back(item.item_id);
      continue;
    }
    Fraction va = truncated_value(*a->second);
    Fraction vb = truncated_value(*b->second);
    PairLabel pred;
    if (tie_epsilon == 0.0) {
      if (va > vb) {
        pred = PairLabel::kFirst;
      } else if (vb > va) {
        pred = PairLabel::kSecond;
      } else {
        pred = PairLabel::kTie;
      }
    } else {
      double diff = va.to_double() - vb.to_double();
      if (diff > tie_epsilon) {
        pred = PairLabel::kFirst;
      } else if (diff < -tie_epsilon) {
        pred = PairLabel::kSecond;
      } else {
        pred = PairLabel::kTie;
      }
    }
    preds.push_back(pred);
    golds.push_back(item.verdict == PairJudgment::Verdict::kFirst
                        ? GoldLabel::kFirst
                        : GoldLabel::kSecond);
  }
  if (!missing.empty()) {
    std::string names;
    for (const std::string& id : missing) {
      if (!names.empty()) names += ", ";
      names += id;
    }
    throw std::invalid_argument("gold items missing reward scores: " + names);
  }
  if (preds.empty()) {
    throw std::invalid_argument("no joinable gold items");
  }

  AgreementReport report;
  report.n_items = preds.size();
  for (PairLabel p : preds) {
    if (p == PairLabel::kTie) ++report.n_ties;
  }
  report.agreement_with_ties = agreement_with_ties(preds, golds);
  if (report.n_ties < report.n_items) {
    report.agreement_without_ties = agreement_without_ties(preds, golds);
    std::vector<std::string> pred_labels;
    std::vector<std::string> gold_labels;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      if (preds[i] == PairLabel::kTie) continue;
      pred_labels.push_back(to_string(preds[i]));
      gold_labels.push_back(to_string(golds[i]));
    }
    try {
      report.kappa = cohens_kappa(pred_labels, gold_labels);
    } catch (const std::invalid_argument&) {
      // degenerate contingency table; leave kappa absent
    }
  }
  return report;
}

std::string agreement_report_table(
    const std::vector<std::pair<std::string, AgreementReport>>& rows) {
  std::ostringstream out;
  std::size_t label_width = 13;
  for (const auto& [label, report] : rows) {
    label_width = std::max(label_width, label.size());
  }
  out << std::left;
  out.width(static_cast<std::streamsize>(label_width));
  out << "configuration";
  out << "  items  ties  agree(w/tie)  agree(no-tie)  kappa\n";
  for (const auto& [label, report] : rows) {
    out.width(static_cast<std::streamsize>(label_width));
    out << label;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "  %5zu  %4zu  %12.4f", report.n_items,
                  report.n_ties, report.agreement_with_ties);
    out << buf;
    if (report.agreement_without_ties) {
      std::snprintf(buf, sizeof(buf), "  %13.4f", *report.agreement_without_ties);
      out << buf;
    } else {
      out << "  " << std::string(13 - 3, ' ') << "n/a";
    }
    if (report.kappa) {
      std::snprintf(buf, sizeof(buf), "  %5.3f", *report.kappa);
      out << buf;
    } else {
      out << "    n/a";
    }
    out << "\n";
  }
  return out.str();
}

ScoreHistogram score_distribution(const std::vector<AggregateScore>& table,
                                  int n) {
  if (table.empty()) {
    throw std::invalid_argument("score distribution over an empty table");
  }
  if (n < 1) {
    throw std::invalid_argument("bin count parameter must be >= 1");
  }
  ScoreHistogram histogram;
  histogram.n = n;

  std::map<std::int64_t, std::size_t> counts;  // bin index -> count
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const AggregateScore& score : table) {
    // floor(n * (value - 1)) with exact integer arithmetic
    std::int64_t num = (score.value.num() - score.value.den()) * n;
    std::int64_t den = score.value.den();
    std::int64_t idx = num >= 0 ? num / den : -(((-num) + den - 1) / den);
    ++counts[idx];  // bin 4n is the single-point bin {5.0}
    double v = score.value.to_double();
    sum += v;
    sum_sq += v * v;
  }
  const double count = static_cast<double>(table.size());
  histogram.mean = sum / count;
  histogram.variance = sum_sq / count - histogram.mean * histogram.mean;
  if (histogram.variance < 0.0) histogram.variance = 0.0;
  for (const auto& [idx, bin_count] : counts) {
    histogram.bins.emplace_back(Fraction(n + idx, n), bin_count);
  }
  return histogram;
}

std::string histogram_to_csv(const ScoreHistogram& histogram) {
  std::string out = "bin_low,count\n";
  for (const auto& [edge, count] : histogram.bins) {
    out += edge.to_string();
    out += ",";
    out += std::to_string(count);
    out += "\n";
  }
  return out;
}

}  // namespace pairforge
