#include "pairforge/quality.hpp"

#include <cctype>
#include <optional>

#include "pairforge/parallel.hpp"
#include "pairforge/text.hpp"

namespace pairforge {

namespace {

const char* kQualityTemplate =
    R"(Below is a text document. Evaluate whether the document is a good source for identifying potential user queries and crafting corresponding responses to demonstrate how an AI Assistant should handle user instructions. Please assign a score using the following 5-point scale:

1: The document is incomplete, vague, off-topic, or does not address what the user might want to know. It lacks any originality or valuable insights, making it difficult to extract relevant queries or responses. For example, the content might be missing key information, be poorly organized, or contain irrelevant or promotional text.

2: The document has some potential but does not provide all the necessary information to extract relevant queries or responses. It might offer a high-level overview or general ideas but lacks depth or specificity.

3: The document is helpful and covers basic topics but lacks depth or insightful information. It addresses common user concerns but does so in a generic or superficial manner. While it is self-contained and complete, it may not offer substantial content for crafting nuanced AI Assistant responses.

4: The document is a strong source for extracting potential user queries and crafting responses. It provides a clear, comprehensive, and well-organized presentation of information. While the content is informative and useful, there may still be minor areas for improvement, such as clarity, conciseness or focus.

5: The document is a perfect source for extracting potential user queries and responses. It is high-quality, demonstrating expert knowledge and offering clear, logical, and engaging insights. The document is infused with creative and original ideas that challenge conventional thinking, making it a perfect model for how an AI Assistant should respond to user instructions.

Please first provide a brief reasoning you used to derive the rating score, and then write "Score: " on the last line.

<document start>
{document}
<document end>)";

struct ScoreMatch {
  int value = 0;
  std::size_t begin = 0;  // offset of the 'S' in "Score:"
};

bool parse_integer_at(const std::string& s, std::size_t pos,
                      int& value_out) {
  while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
  bool negative = false;
  if (pos < s.size() && (s[pos] == '-' || s[pos] == '+')) {
    negative = s[pos] == '-';
    ++pos;
  }
  if (pos >= s.size() || !std::isdigit(static_cast<unsigned char>(s[pos]))) {
    return false;
  }
  long v = 0;
  while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
    v = v * 10 + (s[pos] - '0');
    if (v > 1000000) v = 1000000;
    ++pos;
  }
  // "4.5" is not an integer score
  if (pos + 1 < s.size() && s[pos] == '.' &&
      std::isdigit(static_cast<unsigned char>(s[pos + 1]))) {
    return false;
  }
  value_out = static_cast<int>(negative ? -v : v);
  return true;
}

std::optional<ScoreMatch> find_last_score(const std::string& completion) {
  static const std::string pattern = "score:";
  std::optional<ScoreMatch> last;
  for (std::size_t i = 0; i + pattern.size() <= completion.size(); ++i) {
    bool matches = true;
    for (std::size_t k = 0; k < pattern.size(); ++k) {
      if (std::tolower(static_cast<unsigned char>(completion[i + k])) !=
          pattern[k]) {
        matches = false;
        break;
      }
    }
    if (!matches) continue;
    int value = 0;
    if (parse_integer_at(completion, i + pattern.size(), value)) {
      last = ScoreMatch{value, i};
    }
  }
  return last;
}

std::string substitute(std::string templ, const std::string& placeholder,
                       const std::string& value) {
  std::size_t pos = templ.find(placeholder);
  if (pos != std::string::npos) {
    templ.replace(pos, placeholder.size(), value);
  }
  return templ;
}

}  // namespace

Json QualityJudgment::to_json() const {
  Json j;
  j["doc_id"] = doc_id;
  j["score"] = score;
  j["rationale"] = rationale;
  j["raw"] = raw;
  return j;
}

QualityJudgment QualityJudgment::from_json(const Json& j) {
  QualityJudgment q;
  q.doc_id = j.at("doc_id").get<std::string>();
  q.score = j.at("score").get<int>();
  q.rationale = j.at("rationale").get<std::string>();
  q.raw = j.at("raw").get<std::string>();
  return q;
}

std::string render_quality_prompt(const UgcDocument& doc) {
  if (trim(doc.text).empty()) {
    throw std::invalid_argument("cannot score a document with empty text");
  }
  return substitute(kQualityTemplate, "{document}", doc.text);
}

int parse_quality_score(const std::string& completion) {
  auto match = find_last_score(completion);
  if (!match) {
    throw ScoreFormatError("no \"Score:\" line followed by an integer");
  }
  if (match->value < 1 || match->value > 5) {
    throw ScoreRangeError("score " + std::to_string(match->value) +
                          " outside 1..5");
  }
  return match->value;
}

ScreenResult screen(const std::vector<UgcDocument>& docs, Gateway& gateway,
                    Backend& judge, int workers) {
  struct PerDoc {
    std::optional<QualityJudgment> judgment;
    std::optional<QualityReject> reject;
  };

  std::vector<PerDoc> outcomes = parallel_map<PerDoc>(
      docs.size(), workers, [&](std::size_t i) -> PerDoc {
        const UgcDocument& doc = docs[i];
        CompletionRequest req;
        req.user = render_quality_prompt(doc);
        req.temperature = 0.0;
        req.top_p = 1.0;
        CompletionResult result = gateway.complete(judge, req);
        const std::string& raw = result.texts.at(0);
        try {
          int score = parse_quality_score(raw);
          auto match = find_last_score(raw);
          QualityJudgment judgment;
          judgment.doc_id = doc.id;
          judgment.score = score;
          judgment.rationale = std::string(trim(
              std::string_view(raw).substr(0, match->begin)));
          judgment.raw = raw;
          return {std::move(judgment), std::nullopt};
        } catch (const std::runtime_error& e) {
          return {std::nullopt, QualityReject{doc, e.what()}};
        }
      });

  ScreenResult result;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (outcomes[i].judgment) {
      UgcDocument scored = docs[i];
      scored.quality_score = outcomes[i].judgment->score;
      result.scored.push_back(std::move(scored));
      result.judgments.push_back(std::move(*outcomes[i].judgment));
    } else {
      result.rejects.push_back(std::move(*outcomes[i].reject));
    }
  }
  return result;
}

}  // namespace pairforge
