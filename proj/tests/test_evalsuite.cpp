#include <doctest.h>

#include <cmath>
#include <random>

#include "pairforge/evalsuite.hpp"
#include "support/test_util.hpp"

using namespace pairforge;
using pairforge::testing::ScriptBuilder;
using pairforge::testing::make_gateway;

namespace {

AggregateScore make_score(const std::string& id, int index,
                          std::vector<int> raw) {
  AggregateScore s;
  s.instruction_id = id;
  s.response_index = index;
  s.raw_scores = std::move(raw);
  s.n_requested = 8;
  s.value = aggregate_scores(s.raw_scores, Aggregator::kMean);
  s.with_reference = true;
  return s;
}

PairJudgment gold_of(const std::string& id, PairJudgment::Verdict v) {
  PairJudgment g;
  g.item_id = id;
  g.verdict = v;
  return g;
}

}  // namespace

TEST_CASE("judge prompt embeds the identifiers and outputs") {
  auto prompt = render_pair_judge_prompt("INST", "OUT-A", "OUT-B");
  CHECK(prompt.find("\"model_identifier\": \"m\"") != std::string::npos);
  CHECK(prompt.find("\"model_identifier\": \"M\"") != std::string::npos);
  CHECK(prompt.find("OUT-A") < prompt.find("OUT-B"));
  CHECK(prompt.find("INST") != std::string::npos);
  CHECK(prompt.find("m or M") != std::string::npos);
}

TEST_CASE("debiased judging un-swaps the second ordering") {
  const std::string inst = "I";
  auto ab = render_pair_judge_prompt(inst, "A", "B");
  auto ba = render_pair_judge_prompt(inst, "B", "A");

  SUBCASE("consistent winner a: (m, M) -> first") {
    auto backend = ScriptBuilder().add(ab, {"m"}).add(ba, {"M"}).build();
    auto gateway = make_gateway();
    auto judgment = judge_pair_debiased(gateway, *backend, "x", inst, "A", "B");
    CHECK(judgment.verdict == PairJudgment::Verdict::kFirst);
    CHECK(judgment.order_ab_verdict == GoldLabel::kFirst);
    CHECK(judgment.order_ba_verdict == GoldLabel::kFirst);
  }

  SUBCASE("position-dependent (m, m) -> discarded") {
    auto backend = ScriptBuilder().add(ab, {"m"}).add(ba, {"m"}).build();
    auto gateway = make_gateway();
    auto judgment = judge_pair_debiased(gateway, *backend, "x", inst, "A", "B");
    CHECK(judgment.verdict == PairJudgment::Verdict::kDiscarded);
    CHECK(judgment.discard_reason.find("disagree") != std::string::npos);
  }

  SUBCASE("invalid token -> discarded") {
    auto backend = ScriptBuilder().add(ab, {"tie"}).add(ba, {"M"}).build();
    auto gateway = make_gateway();
    auto judgment = judge_pair_debiased(gateway, *backend, "x", inst, "A", "B");
    CHECK(judgment.verdict == PairJudgment::Verdict::kDiscarded);
    CHECK(judgment.discard_reason.find("outside") != std::string::npos);
  }

  SUBCASE("verdict tracks response identity under call-site swap") {
    auto backend =
        ScriptBuilder().add(ab, {"m", "m"}).add(ba, {"M", "M"}).build();
    auto gateway = make_gateway();
    auto forward = judge_pair_debiased(gateway, *backend, "x", inst, "A", "B");
    auto swapped = judge_pair_debiased(gateway, *backend, "x", inst, "B", "A");
    CHECK(forward.verdict == PairJudgment::Verdict::kFirst);   // A wins
    CHECK(swapped.verdict == PairJudgment::Verdict::kSecond);  // still A
  }
}

TEST_CASE("judging rejects empty responses") {
  auto backend = ScriptBuilder().build();
  auto gateway = make_gateway();
  CHECK_THROWS_AS(
      judge_pair_debiased(gateway, *backend, "x", "I", "", "B"),
      std::invalid_argument);
}

TEST_CASE("agreement_with_ties hand examples") {
  using PL = PairLabel;
  using GL = GoldLabel;
  CHECK(agreement_with_ties({PL::kFirst, PL::kTie, PL::kSecond},
                            {GL::kFirst, GL::kFirst, GL::kFirst}) ==
        doctest::Approx(0.5));
  CHECK(agreement_with_ties({PL::kFirst, PL::kSecond},
                            {GL::kFirst, GL::kSecond}) == doctest::Approx(1.0));
  CHECK(agreement_with_ties({PL::kTie, PL::kTie}, {GL::kFirst, GL::kSecond}) ==
        doctest::Approx(0.5));
  CHECK_THROWS_AS(agreement_with_ties({PL::kTie}, {}), std::invalid_argument);
}

TEST_CASE("agreement_without_ties hand examples") {
  using PL = PairLabel;
  using GL = GoldLabel;
  CHECK(agreement_without_ties({PL::kFirst, PL::kTie, PL::kSecond},
                               {GL::kFirst, GL::kFirst, GL::kFirst}) ==
        doctest::Approx(0.5));
  CHECK(agreement_without_ties({PL::kFirst, PL::kSecond},
                               {GL::kFirst, GL::kSecond}) ==
        doctest::Approx(1.0));
  CHECK_THROWS_AS(
      agreement_without_ties({PL::kTie, PL::kTie}, {GL::kFirst, GL::kSecond}),
      std::invalid_argument);
}

TEST_CASE("tie credit never helps when ties are scored as zero instead") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 300; ++trial) {
    int n = 1 + static_cast<int>(rng() % 30);
    std::vector<PairLabel> preds;
    std::vector<GoldLabel> gold;
    for (int i = 0; i < n; ++i) {
      preds.push_back(static_cast<PairLabel>(rng() % 3));
      gold.push_back(static_cast<GoldLabel>(rng() % 2));
    }
    double with_credit = agreement_with_ties(preds, gold);
    // zero-credit variant
    double zero_credit = 0.0;
    for (int i = 0; i < n; ++i) {
      if (preds[static_cast<std::size_t>(i)] != PairLabel::kTie &&
          (preds[static_cast<std::size_t>(i)] == PairLabel::kFirst) ==
              (gold[static_cast<std::size_t>(i)] == GoldLabel::kFirst)) {
        zero_credit += 1.0;
      }
    }
    zero_credit /= n;
    CHECK(with_credit >= zero_credit);
  }
}

TEST_CASE("agreement metrics are invariant under consistent relabeling") {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 1000; ++trial) {
    int n = 1 + static_cast<int>(rng() % 20);
    std::vector<PairLabel> preds;
    std::vector<GoldLabel> gold;
    bool has_non_tie = false;
    for (int i = 0; i < n; ++i) {
      preds.push_back(static_cast<PairLabel>(rng() % 3));
      if (preds.back() != PairLabel::kTie) has_non_tie = true;
      gold.push_back(static_cast<GoldLabel>(rng() % 2));
    }
    auto flip_pred = [](PairLabel p) {
      if (p == PairLabel::kFirst) return PairLabel::kSecond;
      if (p == PairLabel::kSecond) return PairLabel::kFirst;
      return p;
    };
    auto flip_gold = [](GoldLabel g) {
      return g == GoldLabel::kFirst ? GoldLabel::kSecond : GoldLabel::kFirst;
    };
    std::vector<PairLabel> preds_flipped;
    std::vector<GoldLabel> gold_flipped;
    for (int i = 0; i < n; ++i) {
      preds_flipped.push_back(flip_pred(preds[static_cast<std::size_t>(i)]));
      gold_flipped.push_back(flip_gold(gold[static_cast<std::size_t>(i)]));
    }
    CHECK(agreement_with_ties(preds, gold) ==
          doctest::Approx(agreement_with_ties(preds_flipped, gold_flipped)));
    if (has_non_tie) {
      CHECK(agreement_without_ties(preds, gold) ==
            doctest::Approx(
                agreement_without_ties(preds_flipped, gold_flipped)));
    }
  }
}

TEST_CASE("cohens_kappa hand cases") {
  CHECK(cohens_kappa({"x", "x", "y", "y"}, {"x", "x", "y", "y"}) ==
        doctest::Approx(1.0));
  // p_o = 0.5, p_e = 0.5 -> kappa 0
  CHECK(cohens_kappa({"x", "x", "y", "y"}, {"x", "y", "x", "y"}) ==
        doctest::Approx(0.0));
  CHECK_THROWS_AS(cohens_kappa({"x", "x", "x"}, {"x", "x", "x"}),
                  std::invalid_argument);
  CHECK_THROWS_AS(cohens_kappa({"x"}, {"x", "y"}), std::invalid_argument);
  // constant but different labels: kappa 0, not degenerate
  CHECK(cohens_kappa({"x", "x"}, {"y", "y"}) == doctest::Approx(0.0));
}

TEST_CASE("kappa is symmetric on random label sequences") {
  std::mt19937_64 rng(61);
  const char* labels[] = {"a", "b", "c"};
  for (int trial = 0; trial < 1000; ++trial) {
    int n = 2 + static_cast<int>(rng() % 20);
    std::vector<std::string> seq_a;
    std::vector<std::string> seq_b;
    for (int i = 0; i < n; ++i) {
      seq_a.push_back(labels[rng() % 3]);
      seq_b.push_back(labels[rng() % 3]);
    }
    double forward;
    try {
      forward = cohens_kappa(seq_a, seq_b);
    } catch (const std::invalid_argument&) {
      CHECK_THROWS_AS(cohens_kappa(seq_b, seq_a), std::invalid_argument);
      continue;
    }
    CHECK(forward == doctest::Approx(cohens_kappa(seq_b, seq_a)));
    CHECK(forward >= -1.0);
    CHECK(forward <= 1.0);
  }
}

TEST_CASE("compare_reward_to_gold predicts by exact rational comparison") {
  std::vector<AggregateScore> a = {make_score("i1", 0, {5, 4}),   // 4.5
                                   make_score("i2", 0, {4, 4})};  // 4.0
  std::vector<AggregateScore> b = {make_score("i1", 1, {3, 3}),   // 3.0
                                   make_score("i2", 1, {4, 4})};  // 4.0
  std::vector<PairJudgment> gold = {
      gold_of("i1", PairJudgment::Verdict::kFirst),
      gold_of("i2", PairJudgment::Verdict::kFirst)};

  auto report = compare_reward_to_gold(a, b, gold, 0.0);
  CHECK(report.n_items == 2);
  CHECK(report.n_ties == 1);  // i2 is an exact tie
  CHECK(report.agreement_with_ties == doctest::Approx((1.0 + 0.5) / 2));
  CHECK(*report.agreement_without_ties == doctest::Approx(1.0));
}

TEST_CASE("N-prime truncation uses raw-score prefixes") {
  // full vectors agree with gold, but first judgments disagree
  std::vector<AggregateScore> a = {make_score("i1", 0, {1, 5, 5, 5})};
  std::vector<AggregateScore> b = {make_score("i1", 1, {4, 2, 2, 2})};
  std::vector<PairJudgment> gold = {gold_of("i1", PairJudgment::Verdict::kFirst)};

  auto at_full = compare_reward_to_gold(a, b, gold, 0.0);
  CHECK(at_full.agreement_with_ties == doctest::Approx(1.0));

  auto at_one = compare_reward_to_gold(a, b, gold, 0.0, 1);
  CHECK(at_one.agreement_with_ties == doctest::Approx(0.0));
}

TEST_CASE("discarded gold items are skipped; missing joins are named") {
  std::vector<AggregateScore> a = {make_score("i1", 0, {5})};
  std::vector<AggregateScore> b = {make_score("i1", 1, {3})};
  std::vector<PairJudgment> gold = {
      gold_of("i1", PairJudgment::Verdict::kFirst),
      gold_of("ghost", PairJudgment::Verdict::kDiscarded)};
  auto report = compare_reward_to_gold(a, b, gold, 0.0);
  CHECK(report.n_items == 1);

  gold.push_back(gold_of("missing", PairJudgment::Verdict::kSecond));
  try {
    compare_reward_to_gold(a, b, gold, 0.0);
    FAIL("expected missing-join error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("missing") != std::string::npos);
  }
}

TEST_CASE("score_distribution bins exact values") {
  std::vector<AggregateScore> table = {make_score("a", 0, {4, 4, 4, 4, 4, 4, 4, 4}),
                                       make_score("b", 0, {4, 4, 4, 4, 4, 4, 4, 4}),
                                       make_score("c", 0, {4, 4, 4, 4, 4, 4, 3, 4})};
  auto histogram = score_distribution(table, 8);
  REQUIRE(histogram.bins.size() == 2);
  CHECK(histogram.bins[0].first == Fraction(31, 8));
  CHECK(histogram.bins[0].second == 1);
  CHECK(histogram.bins[1].first == Fraction(4, 1));
  CHECK(histogram.bins[1].second == 2);

  auto csv = histogram_to_csv(histogram);
  CHECK(csv == "bin_low,count\n3.875,1\n4.0,2\n");
}

TEST_CASE("single-value distribution has zero variance") {
  auto histogram = score_distribution({make_score("a", 0, {3})}, 8);
  CHECK(histogram.mean == doctest::Approx(3.0));
  CHECK(histogram.variance == doctest::Approx(0.0));
  CHECK_THROWS_AS(score_distribution({}, 8), std::invalid_argument);
}

TEST_CASE("with- and without-reference tables share the row format") {
  auto with_ref = make_score("a", 0, {4});
  auto no_ref = make_score("a", 0, {2});
  no_ref.with_reference = false;
  auto h1 = score_distribution({with_ref}, 8);
  auto h2 = score_distribution({no_ref}, 8);
  CHECK(histogram_to_csv(h1).rfind("bin_low,count\n", 0) == 0);
  CHECK(histogram_to_csv(h2).rfind("bin_low,count\n", 0) == 0);
}

TEST_CASE("pair judgment JSONL round-trip") {
  PairJudgment j;
  j.item_id = "x";
  j.verdict = PairJudgment::Verdict::kDiscarded;
  j.order_ab_verdict = GoldLabel::kFirst;
  j.discard_reason = "orderings disagree (position-dependent)";
  auto parsed = PairJudgment::from_json(j.to_json());
  CHECK(parsed.item_id == "x");
  CHECK(parsed.verdict == PairJudgment::Verdict::kDiscarded);
  CHECK(parsed.order_ab_verdict == GoldLabel::kFirst);
  CHECK_FALSE(parsed.order_ba_verdict.has_value());
  CHECK(parsed.discard_reason == j.discard_reason);
}
