#include <doctest.h>

#include <numeric>
#include <random>

#include "pairforge/reward.hpp"
#include "support/test_util.hpp"

using namespace pairforge;
using pairforge::testing::ScriptBuilder;
using pairforge::testing::make_doc;
using pairforge::testing::make_gateway;

namespace {

ResponseSample make_sample(const std::string& inst_id, int index,
                           const std::string& text) {
  ResponseSample s;
  s.instruction_id = inst_id;
  s.index = index;
  s.text = text;
  s.length_chars = text.size();
  return s;
}

}  // namespace

TEST_CASE("reward prompt includes the reference section only when present") {
  auto with_ref = render_reward_prompt("I", "R", std::string("UGC"),
                                       default_rubric());
  CHECK(with_ref.find("###Reference Document:\nUGC") != std::string::npos);
  CHECK(with_ref.find("###The instruction to evaluate:\nI") != std::string::npos);
  CHECK(with_ref.find("###Response to evaluate:\nR") != std::string::npos);
  CHECK(with_ref.find("[RESULT]") != std::string::npos);

  auto without_ref = render_reward_prompt("I", "R", std::nullopt,
                                          default_rubric());
  CHECK(without_ref.find("###Reference Document:") == std::string::npos);
  CHECK(without_ref.find("###Score Rubrics:") != std::string::npos);
}

TEST_CASE("rubric expansion follows the Score-1..5 layout") {
  RewardRubric rubric;
  rubric.criteria = "C";
  rubric.score_descriptions = {"d1", "d2", "d3", "d4", "d5"};
  CHECK(rubric.expand() ==
        "[C]\nScore 1: d1\nScore 2: d2\nScore 3: d3\nScore 4: d4\nScore 5: d5");
}

TEST_CASE("parse_reward takes the integer after the last marker") {
  CHECK(parse_reward("good answer [RESULT] 4") == 4);
  CHECK(parse_reward("[RESULT] 3 ... [RESULT] 5") == 5);
  CHECK_THROWS_AS(parse_reward("[RESULT] seven"), RewardParseError);
  CHECK_THROWS_AS(parse_reward("no marker 4"), RewardParseError);
  CHECK_THROWS_AS(parse_reward("[RESULT] 7"), RewardParseError);
  CHECK_THROWS_AS(parse_reward("[RESULT] 4.5"), RewardParseError);
  // an earlier parseable marker does not rescue a bad final one
  CHECK_THROWS_AS(parse_reward("[RESULT] 4 [RESULT] ?"), RewardParseError);
}

TEST_CASE("mean aggregation is an exact rational") {
  CHECK(aggregate_scores({4, 4, 5, 4, 4, 4, 3, 4}, Aggregator::kMean) ==
        Fraction(32, 8));
  CHECK(aggregate_scores({5}, Aggregator::kMean) == Fraction(5, 1));
  CHECK(aggregate_scores({4, 5}, Aggregator::kMean) == Fraction(9, 2));
}

TEST_CASE("mode aggregation picks the most frequent, low on ties") {
  CHECK(aggregate_scores({4, 4, 5}, Aggregator::kMode) == Fraction(4, 1));
  CHECK(aggregate_scores({5, 4, 5, 4}, Aggregator::kMode) == Fraction(4, 1));
  CHECK(aggregate_scores({2}, Aggregator::kMode) == Fraction(2, 1));
}

TEST_CASE("mean matches a gcd-reduction oracle on random vectors") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 1000; ++trial) {
    int n = 1 + static_cast<int>(rng() % 8);
    std::vector<int> raw;
    for (int i = 0; i < n; ++i) raw.push_back(1 + static_cast<int>(rng() % 5));
    Fraction value = aggregate_scores(raw, Aggregator::kMean);
    std::int64_t sum = std::accumulate(raw.begin(), raw.end(), std::int64_t{0});
    // exactness: value * len == sum
    CHECK(value.num() * n == sum * value.den());
  }
}

TEST_CASE("replacing a raw score with a larger one strictly raises the mean") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 1000; ++trial) {
    int n = 1 + static_cast<int>(rng() % 8);
    std::vector<int> raw;
    for (int i = 0; i < n; ++i) raw.push_back(1 + static_cast<int>(rng() % 4));
    std::size_t at = rng() % raw.size();
    std::vector<int> bumped = raw;
    bumped[at] += 1 + static_cast<int>(rng() % (5 - raw[at]));
    CHECK(aggregate_scores(bumped, Aggregator::kMean) >
          aggregate_scores(raw, Aggregator::kMean));
  }
}

TEST_CASE("score_response aggregates scripted judgments") {
  auto sample = make_sample("a/q0", 0, "resp");
  auto prompt = render_reward_prompt("Q", "resp", std::string("D"),
                                     default_rubric());
  ScriptBuilder builder;
  builder.add(prompt, {"fb [RESULT] 4", "fb [RESULT] 4", "fb [RESULT] 5",
                       "fb [RESULT] 4", "fb [RESULT] 4", "fb [RESULT] 4",
                       "fb [RESULT] 3", "fb [RESULT] 4"});
  auto backend = builder.build();
  auto gateway = make_gateway();
  RewardOptions options;
  options.n = 8;

  auto score = score_response("Q", sample, std::string("D"), default_rubric(),
                              gateway, *backend, options);
  REQUIRE(score.has_value());
  CHECK(score->value == Fraction(4, 1));
  CHECK(score->value.to_string() == "4.0");
  CHECK(score->raw_scores == std::vector<int>{4, 4, 5, 4, 4, 4, 3, 4});
  CHECK(score->with_reference);
}

TEST_CASE("single-sample scoring") {
  auto sample = make_sample("a/q0", 0, "resp");
  auto prompt = render_reward_prompt("Q", "resp", std::nullopt, default_rubric());
  auto backend = ScriptBuilder().add(prompt, {"[RESULT] 5"}).build();
  auto gateway = make_gateway();
  RewardOptions options;
  options.n = 1;
  options.with_reference = false;
  auto score = score_response("Q", sample, std::nullopt, default_rubric(),
                              gateway, *backend, options);
  REQUIRE(score.has_value());
  CHECK(score->value == Fraction(5, 1));
  CHECK_FALSE(score->with_reference);
}

TEST_CASE("all-invalid judgments quarantine the response") {
  auto sample = make_sample("a/q0", 0, "resp");
  auto prompt = render_reward_prompt("Q", "resp", std::string("D"),
                                     default_rubric());
  ScriptBuilder builder;
  builder.add(prompt, std::vector<std::string>(8, "no marker"));
  auto backend = builder.build();
  auto gateway = make_gateway();
  RewardOptions options;
  options.n = 8;
  RewardQuarantine quarantine;
  auto score = score_response("Q", sample, std::string("D"), default_rubric(),
                              gateway, *backend, options, &quarantine);
  CHECK_FALSE(score.has_value());
  CHECK(quarantine.n_valid == 0);
  CHECK(quarantine.n_requested == 8);
}

TEST_CASE("min_valid is ceil(n/2): 4 of 8 parses is enough, 3 is not") {
  auto run_with_valid = [&](int n_valid) {
    auto sample = make_sample("a/q0", 0, "resp");
    auto prompt = render_reward_prompt("Q", "resp", std::string("D"),
                                       default_rubric());
    std::vector<std::string> outs;
    for (int i = 0; i < 8; ++i) {
      outs.push_back(i < n_valid ? "[RESULT] 4" : "garbled");
    }
    ScriptBuilder builder;
    builder.add(prompt, outs);
    auto backend = builder.build();
    auto gateway = make_gateway();
    RewardOptions options;
    options.n = 8;
    return score_response("Q", sample, std::string("D"), default_rubric(),
                          gateway, *backend, options)
        .has_value();
  };
  CHECK(min_valid_parses(8) == 4);
  CHECK(min_valid_parses(1) == 1);
  CHECK(run_with_valid(4));
  CHECK_FALSE(run_with_valid(3));
}

TEST_CASE("score_all resolves references and counts conservation") {
  std::vector<UgcDocument> docs = {make_doc("a", "doc text a"),
                                   make_doc("b", "doc text b")};
  std::vector<Instruction> instructions;
  for (const auto& doc : docs) {
    Instruction inst;
    inst.id = doc.id + "/q0";
    inst.doc_id = doc.id;
    inst.text = "Q " + doc.id;
    instructions.push_back(inst);
  }
  std::vector<ResponseSample> samples;
  ScriptBuilder builder;
  RewardOptions options;
  options.n = 2;
  for (const auto& inst : instructions) {
    for (int r = 0; r < 5; ++r) {
      auto sample =
          make_sample(inst.id, r, "resp " + inst.id + std::to_string(r));
      samples.push_back(sample);
      const UgcDocument& doc = inst.doc_id == "a" ? docs[0] : docs[1];
      auto prompt = render_reward_prompt(inst.text, sample.text, doc.text,
                                         default_rubric());
      builder.add(prompt, {"[RESULT] " + std::to_string(1 + r % 5),
                           "[RESULT] " + std::to_string(1 + r % 5)});
    }
  }
  auto backend = builder.build();
  auto gateway = make_gateway();

  auto table = score_all(samples, instructions, docs, default_rubric(),
                         gateway, *backend, options);
  CHECK(table.scores.size() == 10);
  CHECK(table.quarantined.empty());
}

TEST_CASE("without-reference ablation keeps the row count") {
  std::vector<UgcDocument> docs = {make_doc("a", "doc text a")};
  Instruction inst;
  inst.id = "a/q0";
  inst.doc_id = "a";
  inst.text = "Q";
  std::vector<ResponseSample> samples = {make_sample(inst.id, 0, "r0"),
                                         make_sample(inst.id, 1, "r1")};
  ScriptBuilder builder;
  for (const auto& s : samples) {
    builder.add(render_reward_prompt(inst.text, s.text, std::nullopt,
                                     default_rubric()),
                {"[RESULT] 4"});
  }
  auto backend = builder.build();
  auto gateway = make_gateway();
  RewardOptions options;
  options.n = 1;
  options.with_reference = false;
  auto table = score_all(samples, {inst}, docs, default_rubric(), gateway,
                         *backend, options);
  CHECK(table.scores.size() == 2);
  CHECK_FALSE(table.scores[0].with_reference);
}

TEST_CASE("reference truncation respects the character budget") {
  std::vector<UgcDocument> docs = {make_doc("a", std::string(100, 'x'))};
  Instruction inst;
  inst.id = "a/q0";
  inst.doc_id = "a";
  inst.text = "Q";
  std::vector<ResponseSample> samples = {make_sample(inst.id, 0, "r0")};
  RewardOptions options;
  options.n = 1;
  options.reference_char_budget = 10;
  ScriptBuilder builder;
  builder.add(render_reward_prompt(inst.text, "r0", std::string(10, 'x'),
                                   default_rubric()),
              {"[RESULT] 4"});
  auto backend = builder.build();
  auto gateway = make_gateway();
  auto table = score_all(samples, {inst}, docs, default_rubric(), gateway,
                         *backend, options);
  CHECK(table.scores.size() == 1);
  CHECK(table.references_truncated == 1);
}

TEST_CASE("score table JSONL round-trip") {
  pairforge::testing::TempDir dir("reward");
  AggregateScore score;
  score.instruction_id = "a/q0";
  score.response_index = 2;
  score.raw_scores = {4, 5, 4};
  score.n_requested = 8;
  score.value = Fraction(13, 3);
  score.with_reference = true;
  auto p1 = dir.path() / "s.jsonl";
  save_scores(p1, {score});
  auto loaded = load_scores(p1.string());
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].value == Fraction(13, 3));
  auto p2 = dir.path() / "s2.jsonl";
  save_scores(p2, loaded);
  CHECK(read_file(p1.string()) == read_file(p2.string()));
}

TEST_CASE("default rubric matches the shipped criteria text") {
  const RewardRubric& rubric = default_rubric();
  CHECK(rubric.criteria.find("helpfulness, relevance, accuracy, depth,") !=
        std::string::npos);
  for (const auto& description : rubric.score_descriptions) {
    CHECK_FALSE(description.empty());
  }
  auto expanded = rubric.expand();
  CHECK(expanded.rfind("[Does the response meet the criteria", 0) == 0);
  CHECK(expanded.find("Score 1:") != std::string::npos);
  CHECK(expanded.find("Score 5:") != std::string::npos);
}
