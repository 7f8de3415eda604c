#include "pairforge/pairs.hpp"

#include <map>
#include <random>
#include <unordered_map>

namespace pairforge {

std::string to_string(TieBreak t) {
  switch (t) {
    case TieBreak::kNone:
      return "none";
    case TieBreak::kChosenShortest:
      return "chosen_shortest";
    case TieBreak::kRejectedLongest:
      return "rejected_longest";
    case TieBreak::kBoth:
      return "both";
  }
  return "none";
}

TieBreak tiebreak_from_string(const std::string& s) {
  if (s == "none") return TieBreak::kNone;
  if (s == "chosen_shortest") return TieBreak::kChosenShortest;
  if (s == "rejected_longest") return TieBreak::kRejectedLongest;
  if (s == "both") return TieBreak::kBoth;
  throw std::invalid_argument("unknown tiebreak value: " + s);
}

Json PairDiscard::to_json() const {
  Json j;
  j["instruction_id"] = instruction_id;
  j["reason"] = reason;
  return j;
}

std::variant<PreferencePair, PairDiscard> build_pair(
    const std::string& instruction_id, const std::string& instruction_text,
    const std::string& doc_id, const std::vector<ScoredResponse>& responses) {
  if (responses.size() < 2) {
    return PairDiscard{instruction_id, "too_few_responses"};
  }

  Fraction max_value = responses[0].value;
  Fraction min_value = responses[0].value;
  for (const ScoredResponse& r : responses) {
    if (r.value > max_value) max_value = r.value;
    if (r.value < min_value) min_value = r.value;
  }
  if (max_value == min_value) {
    return PairDiscard{instruction_id, "degenerate"};
  }

  const ScoredResponse* chosen = nullptr;
  const ScoredResponse* rejected = nullptr;
  int n_at_max = 0;
  int n_at_min = 0;
  for (const ScoredResponse& r : responses) {
    if (r.value == max_value) {
      ++n_at_max;
      if (chosen == nullptr || r.length_chars < chosen->length_chars ||
          (r.length_chars == chosen->length_chars && r.index < chosen->index)) {
        chosen = &r;
      }
    }
    if (r.value == min_value) {
      ++n_at_min;
      if (rejected == nullptr || r.length_chars > rejected->length_chars ||
          (r.length_chars == rejected->length_chars &&
           r.index < rejected->index)) {
        rejected = &r;
      }
    }
  }

  PreferencePair pair;
  pair.instruction_id = instruction_id;
  pair.instruction_text = instruction_text;
  pair.chosen_text = chosen->text;
  pair.rejected_text = rejected->text;
  pair.chosen_score = chosen->value;
  pair.rejected_score = rejected->value;
  pair.chosen_index = chosen->index;
  pair.rejected_index = rejected->index;
  pair.doc_id = doc_id;
  if (n_at_max > 1 && n_at_min > 1) {
    pair.tiebreak_applied = TieBreak::kBoth;
  } else if (n_at_max > 1) {
    pair.tiebreak_applied = TieBreak::kChosenShortest;
  } else if (n_at_min > 1) {
    pair.tiebreak_applied = TieBreak::kRejectedLongest;
  } else {
    pair.tiebreak_applied = TieBreak::kNone;
  }
  return pair;
}

PairSet build_all(const std::vector<Instruction>& instructions,
                  const std::vector<ResponseSample>& samples,
                  const std::vector<AggregateScore>& scores) {
  std::unordered_map<std::string, std::map<int, const ResponseSample*>>
      samples_by_inst;
  for (const ResponseSample& s : samples) {
    samples_by_inst[s.instruction_id][s.index] = &s;
  }
  std::unordered_map<std::string, std::map<int, const AggregateScore*>>
      scores_by_inst;
  for (const AggregateScore& s : scores) {
    scores_by_inst[s.instruction_id][s.response_index] = &s;
  }

  PairSet out;
  for (const Instruction& inst : instructions) {
    std::vector<ScoredResponse> joined;
    auto score_it = scores_by_inst.find(inst.id);
    auto sample_it = samples_by_inst.find(inst.id);
    if (score_it != scores_by_inst.end() &&
        sample_it != samples_by_inst.end()) {
      for (const auto& [index, score] : score_it->second) {
        auto resp = sample_it->second.find(index);
        if (resp == sample_it->second.end()) {
          throw std::logic_error("score for instruction " + inst.id +
                                 " response " + std::to_string(index) +
                                 " has no matching sample");
        }
        joined.push_back({index, resp->second->text,
                          resp->second->length_chars, score->value});
      }
    }
    auto outcome = build_pair(inst.id, inst.text, inst.doc_id, joined);
    if (std::holds_alternative<PreferencePair>(outcome)) {
      out.pairs.push_back(std::get<PreferencePair>(std::move(outcome)));
    } else {
      out.discards.push_back(std::get<PairDiscard>(std::move(outcome)));
    }
  }
  return out;
}

Json pair_to_json(const PreferencePair& pair) {
  Json j;
  j["prompt"] = pair.instruction_text;
  j["chosen"] = pair.chosen_text;
  j["rejected"] = pair.rejected_text;
  j["chosen_score"] = pair.chosen_score.to_string();
  j["rejected_score"] = pair.rejected_score.to_string();
  Json meta;
  meta["doc_id"] = pair.doc_id;
  meta["instruction_id"] = pair.instruction_id;
  meta["chosen_index"] = pair.chosen_index;
  meta["rejected_index"] = pair.rejected_index;
  meta["tiebreak"] = to_string(pair.tiebreak_applied);
  j["meta"] = std::move(meta);
  return j;
}

PreferencePair pair_from_json(const Json& j) {
  PreferencePair pair;
  pair.instruction_text = j.at("prompt").get<std::string>();
  pair.chosen_text = j.at("chosen").get<std::string>();
  pair.rejected_text = j.at("rejected").get<std::string>();
  pair.chosen_score = Fraction::parse(j.at("chosen_score").get<std::string>());
  pair.rejected_score =
      Fraction::parse(j.at("rejected_score").get<std::string>());
  const Json& meta = j.at("meta");
  pair.doc_id = meta.at("doc_id").get<std::string>();
  pair.instruction_id = meta.at("instruction_id").get<std::string>();
  pair.chosen_index = meta.at("chosen_index").get<int>();
  pair.rejected_index = meta.at("rejected_index").get<int>();
  pair.tiebreak_applied =
      tiebreak_from_string(meta.at("tiebreak").get<std::string>());
  if (!(pair.chosen_score > pair.rejected_score)) {
    throw std::invalid_argument("pair for instruction " + pair.instruction_id +
                                " violates chosen_score > rejected_score");
  }
  if (pair.chosen_index == pair.rejected_index) {
    throw std::invalid_argument("pair for instruction " + pair.instruction_id +
                                " has chosen_index == rejected_index");
  }
  return pair;
}

void export_pairs(const std::vector<PreferencePair>& pairs,
                  const std::filesystem::path& path) {
  std::vector<Json> records;
  records.reserve(pairs.size());
  for (const PreferencePair& pair : pairs) {
    records.push_back(pair_to_json(pair));
  }
  write_jsonl(path, records);
}

std::vector<PreferencePair> load_pairs(const std::string& path) {
  std::vector<PreferencePair> pairs;
  for (const Json& j : read_jsonl(path)) {
    pairs.push_back(pair_from_json(j));
  }
  return pairs;
}

std::vector<std::vector<std::string>> split_iterations(
    const std::vector<std::string>& items, int m, std::uint64_t seed) {
  if (m < 1) {
    throw std::invalid_argument("iteration count must be >= 1");
  }
  if (static_cast<std::size_t>(m) > items.size()) {
    throw std::invalid_argument("cannot split " + std::to_string(items.size()) +
                                " items into " + std::to_string(m) +
                                " subsets");
  }

  // Hand-rolled Fisher-Yates: std::shuffle's draw order is
  // implementation-defined, and partitions must replay across toolchains.
  std::vector<std::string> shuffled = items;
  std::mt19937_64 rng(seed);
  for (std::size_t i = shuffled.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(shuffled[i - 1], shuffled[j]);
  }

  std::vector<std::vector<std::string>> subsets(static_cast<std::size_t>(m));
  const std::size_t base = shuffled.size() / static_cast<std::size_t>(m);
  const std::size_t remainder = shuffled.size() % static_cast<std::size_t>(m);
  std::size_t at = 0;
  for (std::size_t s = 0; s < subsets.size(); ++s) {
    std::size_t take = base + (s < remainder ? 1 : 0);
    for (std::size_t i = 0; i < take; ++i) {
      subsets[s].push_back(shuffled[at++]);
    }
  }
  return subsets;
}

}  // namespace pairforge
