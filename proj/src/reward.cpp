#include "pairforge/reward.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <unordered_map>

#include "pairforge/digest.hpp"
#include "pairforge/parallel.hpp"
#include "pairforge/text.hpp"

namespace pairforge {

namespace {

const char* kRewardTemplateWithReference =
    R"tpl(###Task Description:
An instruction (might include an Input inside it), a response to evaluate, a reference document that contains relevant information, and a score rubric representing a evaluation criteria are given.
1. Write a detailed feedback that assess the quality of the response strictly based on the given score rubric, not evaluating in general.
2. After writing a feedback, write a score that is an integer between 1 and 5. You should refer to the score rubric.
3. The output format should look as follows: "(write a feedback for criteria) [RESULT] (an integer number between 1 and 5)"
4. Please do not generate any other opening, closing, and explanations.

###The instruction to evaluate:
{instruction}

###Response to evaluate:
{response}

###Reference Document:
{reference}

###Score Rubrics:
{rubric}

###Feedback:)tpl";

const char* kRewardTemplateNoReference =
    R"tpl(###Task Description:
An instruction (might include an Input inside it), a response to evaluate, a reference document that contains relevant information, and a score rubric representing a evaluation criteria are given.
1. Write a detailed feedback that assess the quality of the response strictly based on the given score rubric, not evaluating in general.
2. After writing a feedback, write a score that is an integer between 1 and 5. You should refer to the score rubric.
3. The output format should look as follows: "(write a feedback for criteria) [RESULT] (an integer number between 1 and 5)"
4. Please do not generate any other opening, closing, and explanations.

###The instruction to evaluate:
{instruction}

###Response to evaluate:
{response}

###Score Rubrics:
{rubric}

###Feedback:)tpl";

std::string substitute(std::string templ, const std::string& placeholder,
                       const std::string& value) {
  std::size_t pos = templ.find(placeholder);
  if (pos != std::string::npos) {
    templ.replace(pos, placeholder.size(), value);
  }
  return templ;
}

}  // namespace

std::string RewardRubric::expand() const {
  std::string out = "[" + criteria + "]";
  for (std::size_t i = 0; i < score_descriptions.size(); ++i) {
    out += "\nScore " + std::to_string(i + 1) + ": " + score_descriptions[i];
  }
  return out;
}

Json RewardRubric::to_json() const {
  Json j;
  j["criteria"] = criteria;
  for (std::size_t i = 0; i < score_descriptions.size(); ++i) {
    j["score" + std::to_string(i + 1) + "_description"] = score_descriptions[i];
  }
  return j;
}

RewardRubric RewardRubric::from_json(const Json& j) {
  RewardRubric rubric;
  rubric.criteria = j.at("criteria").get<std::string>();
  for (std::size_t i = 0; i < rubric.score_descriptions.size(); ++i) {
    rubric.score_descriptions[i] =
        j.at("score" + std::to_string(i + 1) + "_description")
            .get<std::string>();
  }
  if (rubric.criteria.empty()) {
    throw std::invalid_argument("rubric criteria must be non-empty");
  }
  for (const std::string& d : rubric.score_descriptions) {
    if (d.empty()) {
      throw std::invalid_argument("rubric score descriptions must be non-empty");
    }
  }
  return rubric;
}

RewardRubric RewardRubric::load(const std::string& path) {
  return from_json(Json::parse(read_file(path)));
}

const RewardRubric& default_rubric() {
  static const RewardRubric rubric = {
      "Does the response meet the criteria of quality, considering factors "
      "such as helpfulness, relevance, accuracy, depth, creativity, and level "
      "of detail?",
      {"The response is incomplete, vague, off-topic, or not aligned with the "
       "user's request. It may contain missing content, start lists "
       "incorrectly, or repeat the user's question. The response might "
       "reflect another person’s perspective, include irrelevant "
       "information such as promotional text, or resemble a forum post "
       "rather than a direct answer.",
       "The response addresses most of the user’s requests but does not "
       "directly answer the question. It may provide a high-level "
       "methodology instead of the exact solution, leaving the user without "
       "the specific guidance they were seeking.",
       "The response is useful but appears to be written by someone other "
       "than an AI assistant. It meets the basic requirements of the user's "
       "question but is written from another person’s perspective, "
       "resembling content from a blog post, web page, or search results "
       "rather than an AI-generated answer.",
       "The response is crafted from the perspective of an AI assistant, "
       "with a clear focus on addressing the user’s instruction. It "
       "provides a complete, clear, and comprehensive answer without missing "
       "or irrelevant information. While well-organized and helpful, there "
       "may be minor areas for improvement in clarity, conciseness, or "
       "focus.",
       "The response is an exemplary AI-generated answer, perfectly aligned "
       "with the user’s instruction. It is focused, helpful, and free "
       "of irrelevant content, delivering high-quality insights and expert "
       "knowledge. The response is engaging, logical, insightful, and easy "
       "to follow, reflecting the highest standard of quality for an AI "
       "assistant."}};
  return rubric;
}

Json AggregateScore::to_json() const {
  Json j;
  j["instruction_id"] = instruction_id;
  j["response_index"] = response_index;
  j["raw_scores"] = raw_scores;
  j["n_requested"] = n_requested;
  j["value"] = value.to_string();
  j["with_reference"] = with_reference;
  return j;
}

AggregateScore AggregateScore::from_json(const Json& j) {
  AggregateScore score;
  score.instruction_id = j.at("instruction_id").get<std::string>();
  score.response_index = j.at("response_index").get<int>();
  score.raw_scores = j.at("raw_scores").get<std::vector<int>>();
  score.n_requested = j.at("n_requested").get<int>();
  score.value = Fraction::parse(j.at("value").get<std::string>());
  score.with_reference = j.at("with_reference").get<bool>();
  for (int raw : score.raw_scores) {
    if (raw < 1 || raw > 5) {
      throw std::invalid_argument("raw score outside 1..5");
    }
  }
  if (score.value < Fraction::from_int(1) ||
      score.value > Fraction::from_int(5)) {
    throw std::invalid_argument("aggregate value outside [1,5]");
  }
  return score;
}

std::string render_reward_prompt(const std::string& instruction,
                                 const std::string& response,
                                 const std::optional<std::string>& reference,
                                 const RewardRubric& rubric) {
  std::string prompt = reference ? kRewardTemplateWithReference
                                 : kRewardTemplateNoReference;
  prompt = substitute(std::move(prompt), "{instruction}", instruction);
  prompt = substitute(std::move(prompt), "{response}", response);
  if (reference) {
    prompt = substitute(std::move(prompt), "{reference}", *reference);
  }
  return substitute(std::move(prompt), "{rubric}", rubric.expand());
}

int parse_reward(const std::string& completion) {
  static const std::string marker = "[RESULT]";
  std::size_t pos = completion.rfind(marker);
  if (pos == std::string::npos) {
    throw RewardParseError("no [RESULT] marker");
  }
  std::size_t at = pos + marker.size();
  while (at < completion.size() &&
         (completion[at] == ' ' || completion[at] == '\t')) {
    ++at;
  }
  bool negative = false;
  if (at < completion.size() && (completion[at] == '-' || completion[at] == '+')) {
    negative = completion[at] == '-';
    ++at;
  }
  if (at >= completion.size() ||
      !std::isdigit(static_cast<unsigned char>(completion[at]))) {
    throw RewardParseError("no integer after the last [RESULT] marker");
  }
  long value = 0;
  while (at < completion.size() &&
         std::isdigit(static_cast<unsigned char>(completion[at]))) {
    value = value * 10 + (completion[at] - '0');
    if (value > 1000000) value = 1000000;
    ++at;
  }
  if (at + 1 < completion.size() && completion[at] == '.' &&
      std::isdigit(static_cast<unsigned char>(completion[at + 1]))) {
    throw RewardParseError("score after [RESULT] is not an integer");
  }
  if (negative) value = -value;
  if (value < 1 || value > 5) {
    throw RewardParseError("score " + std::to_string(value) + " outside 1..5");
  }
  return static_cast<int>(value);
}

Fraction aggregate_scores(const std::vector<int>& raw_scores, Aggregator how) {
  if (raw_scores.empty()) {
    throw std::invalid_argument("cannot aggregate zero scores");
  }
  if (how == Aggregator::kMean) {
    std::int64_t sum = 0;
    for (int s : raw_scores) sum += s;
    return Fraction(sum, static_cast<std::int64_t>(raw_scores.size()));
  }
  // mode; frequency ties resolve to the smaller score for determinism
  std::map<int, int> counts;
  for (int s : raw_scores) ++counts[s];
  int best_score = raw_scores[0];
  int best_count = 0;
  for (const auto& [score, count] : counts) {
    if (count > best_count) {
      best_count = count;
      best_score = score;
    }
  }
  return Fraction::from_int(best_score);
}

int min_valid_parses(int n) { return (n + 1) / 2; }

Json RewardQuarantine::to_json() const {
  Json j;
  j["instruction_id"] = instruction_id;
  j["response_index"] = response_index;
  j["n_requested"] = n_requested;
  j["n_valid"] = n_valid;
  j["reason"] = reason;
  return j;
}

std::optional<AggregateScore> score_response(
    const std::string& instruction_text, const ResponseSample& response,
    const std::optional<std::string>& reference, const RewardRubric& rubric,
    Gateway& gateway, Backend& judge, const RewardOptions& options,
    RewardQuarantine* quarantine_out) {
  if (options.n < 1) {
    throw std::invalid_argument("self-consistency n must be >= 1");
  }
  CompletionRequest req;
  req.user = render_reward_prompt(instruction_text, response.text, reference,
                                  rubric);
  req.temperature = 1.0;
  req.top_p = 0.9;
  req.seed = static_cast<std::int64_t>(fnv1a64(
      response.instruction_id + "#" + std::to_string(response.index),
      fnv1a64(std::to_string(options.seed))));

  std::vector<std::string> completions;
  if (options.batched) {
    req.n = options.n;
    completions = gateway.complete(judge, req).texts;
  } else {
    req.n = 1;
    for (int i = 0; i < options.n; ++i) {
      completions.push_back(gateway.complete(judge, req).texts.at(0));
    }
  }

  std::vector<int> raw_scores;
  for (const std::string& completion : completions) {
    try {
      raw_scores.push_back(parse_reward(completion));
    } catch (const RewardParseError&) {
      // shortfall is accounted below
    }
  }

  if (static_cast<int>(raw_scores.size()) < min_valid_parses(options.n)) {
    if (quarantine_out) {
      *quarantine_out = {response.instruction_id, response.index, options.n,
                         static_cast<int>(raw_scores.size()),
                         "only " + std::to_string(raw_scores.size()) + " of " +
                             std::to_string(options.n) +
                             " judgments parsed; need " +
                             std::to_string(min_valid_parses(options.n))};
    }
    return std::nullopt;
  }

  AggregateScore score;
  score.instruction_id = response.instruction_id;
  score.response_index = response.index;
  score.raw_scores = std::move(raw_scores);
  score.n_requested = options.n;
  score.value = aggregate_scores(score.raw_scores, options.aggregator);
  score.with_reference = reference.has_value();
  return score;
}

std::vector<AggregateScore> load_scores(const std::string& path) {
  std::vector<AggregateScore> out;
  for (const Json& j : read_jsonl(path)) {
    out.push_back(AggregateScore::from_json(j));
  }
  return out;
}

void save_scores(const std::filesystem::path& path,
                 const std::vector<AggregateScore>& scores) {
  std::vector<Json> records;
  records.reserve(scores.size());
  for (const AggregateScore& score : scores) {
    records.push_back(score.to_json());
  }
  write_jsonl(path, records);
}

ScoreTable score_all(const std::vector<ResponseSample>& samples,
                     const std::vector<Instruction>& instructions,
                     const std::vector<UgcDocument>& docs,
                     const RewardRubric& rubric, Gateway& gateway,
                     Backend& judge, const RewardOptions& options) {
  std::unordered_map<std::string, const Instruction*> inst_by_id;
  for (const Instruction& inst : instructions) inst_by_id[inst.id] = &inst;
  std::unordered_map<std::string, const UgcDocument*> doc_by_id;
  for (const UgcDocument& doc : docs) doc_by_id[doc.id] = &doc;

  struct PerSample {
    std::optional<AggregateScore> score;
    RewardQuarantine quarantine;
    bool truncated = false;
  };

  std::vector<PerSample> outcomes = parallel_map<PerSample>(
      samples.size(), options.workers, [&](std::size_t i) -> PerSample {
        const ResponseSample& sample = samples[i];
        auto inst_it = inst_by_id.find(sample.instruction_id);
        if (inst_it == inst_by_id.end()) {
          throw std::logic_error("sample references unknown instruction " +
                                 sample.instruction_id);
        }
        const Instruction& inst = *inst_it->second;
        auto doc_it = doc_by_id.find(inst.doc_id);
        if (doc_it == doc_by_id.end()) {
          throw std::logic_error("instruction " + inst.id +
                                 " references unknown document " + inst.doc_id);
        }

        PerSample out;
        std::optional<std::string> reference;
        if (options.with_reference) {
          const std::string& full = doc_it->second->text;
          std::string clipped =
              truncate_scalars(full, options.reference_char_budget);
          out.truncated = clipped.size() < full.size();
          reference = std::move(clipped);
        }
        out.score = score_response(inst.text, sample, reference, rubric,
                                   gateway, judge, options, &out.quarantine);
        return out;
      });

  ScoreTable table;
  for (PerSample& outcome : outcomes) {
    if (outcome.truncated) ++table.references_truncated;
    if (outcome.score) {
      table.scores.push_back(std::move(*outcome.score));
    } else {
      table.quarantined.push_back(std::move(outcome.quarantine));
    }
  }
  return table;
}

}  // namespace pairforge
