#include <doctest.h>

#include "pairforge/instruct.hpp"
#include "support/test_util.hpp"

using namespace pairforge;
using pairforge::testing::ScriptBuilder;
using pairforge::testing::make_doc;
using pairforge::testing::make_gateway;

TEST_CASE("geninst prompt fills both delimited slots") {
  auto prompt = render_geninst_prompt(make_doc("a", "T"), "E");
  CHECK(prompt.find("<example start> E <example end>") != std::string::npos);
  CHECK(prompt.find("<context start> T <context end>") != std::string::npos);
  CHECK(prompt.find("Only generate one question or instruction") !=
        std::string::npos);

  auto p1 = render_geninst_prompt(make_doc("a", "T"), "E1");
  auto p2 = render_geninst_prompt(make_doc("a", "T"), "E2");
  CHECK(p1 != p2);
  CHECK(p1.find("<context start> T <context end>") != std::string::npos);
  CHECK(p2.find("<context start> T <context end>") != std::string::npos);

  CHECK_THROWS_AS(render_geninst_prompt(make_doc("a", "T"), ""),
                  std::invalid_argument);
}

TEST_CASE("filter prompt layout and pairing check") {
  Instruction inst;
  inst.id = "a/q0";
  inst.doc_id = "a";
  inst.text = "Q";
  auto prompt = render_filter_prompt(inst, make_doc("a", "T"));
  CHECK(prompt.find("###Context\nT") != std::string::npos);
  CHECK(prompt.find("###Question\nQ") != std::string::npos);
  CHECK(prompt.find("Determine if the context contains accurate") !=
        std::string::npos);
  CHECK(prompt.find("Respond with only True or False") != std::string::npos);

  CHECK_THROWS_AS(render_filter_prompt(inst, make_doc("other", "T")),
                  std::logic_error);
}

TEST_CASE("generate_all produces one instruction per document") {
  std::vector<UgcDocument> docs = {make_doc("a", "about media"),
                                   make_doc("b", "about books")};
  std::vector<std::string> pool = {"What is X?", "Explain Y."};
  const std::uint64_t seed = 17;

  ScriptBuilder builder;
  for (const auto& doc : docs) {
    const std::string& example =
        pool[pick_example_index(seed, doc.id, pool.size())];
    builder.add(render_geninst_prompt(doc, example),
                {"What are the trends in media revenue?"});
  }
  auto backend = builder.build();
  auto gateway = make_gateway();

  auto result = generate_all(docs, gateway, *backend, pool, seed);
  REQUIRE(result.instructions.size() == 2);
  CHECK(result.instructions[0].doc_id == "a");
  CHECK(result.instructions[0].text ==
        "What are the trends in media revenue?");
  CHECK(result.quarantined.empty());

  // same (doc, pool, seed) always picks the same exemplar
  auto again = generate_all(docs, gateway, *backend, pool, seed);
  CHECK(again.instructions[0].example_used ==
        result.instructions[0].example_used);
  CHECK(again.instructions[1].example_used ==
        result.instructions[1].example_used);
}

TEST_CASE("empty or marker-leaking completions are quarantined") {
  std::vector<UgcDocument> docs = {make_doc("a", "alpha"),
                                   make_doc("b", "beta")};
  std::vector<std::string> pool = {"E"};
  ScriptBuilder builder;
  builder.add(render_geninst_prompt(docs[0], "E"), {"   "});
  builder.add(render_geninst_prompt(docs[1], "E"),
              {"Q about <context start> leak"});
  auto backend = builder.build();
  auto gateway = make_gateway();

  auto result = generate_all(docs, gateway, *backend, pool, 0);
  CHECK(result.instructions.empty());
  REQUIRE(result.quarantined.size() == 2);
  CHECK(result.quarantined[0].reason == "empty completion");
  CHECK(result.quarantined[1].reason.find("template marker") !=
        std::string::npos);
}

TEST_CASE("relevance filter routes True/False/other verdicts") {
  std::vector<UgcDocument> docs = {make_doc("a", "ta"), make_doc("b", "tb"),
                                   make_doc("c", "tc")};
  std::vector<Instruction> instructions;
  for (const auto& doc : docs) {
    Instruction inst;
    inst.id = doc.id + "/q0";
    inst.doc_id = doc.id;
    inst.text = "Q " + doc.id;
    inst.example_used = "E";
    instructions.push_back(inst);
  }
  ScriptBuilder builder;
  builder.add(render_filter_prompt(instructions[0], docs[0]), {"True"});
  builder.add(render_filter_prompt(instructions[1], docs[1]), {"False"});
  builder.add(render_filter_prompt(instructions[2], docs[2]), {"Maybe"});
  auto backend = builder.build();
  auto gateway = make_gateway();

  auto result = filter_all(instructions, docs, gateway, *backend);
  REQUIRE(result.retained.size() == 1);
  CHECK(result.retained[0].id == "a/q0");
  CHECK(result.retained[0].filter_verdict == true);
  REQUIRE(result.dropped.size() == 1);
  CHECK(result.dropped[0].filter_verdict == false);
  REQUIRE(result.quarantined.size() == 1);
  CHECK(result.quarantined[0].instruction_id == "c/q0");

  // conservation
  CHECK(result.retained.size() + result.dropped.size() +
            result.quarantined.size() ==
        instructions.size());
}

TEST_CASE("scripted true-fraction is reproduced exactly") {
  const int n = 20;
  const int n_true = 13;
  std::vector<UgcDocument> docs;
  std::vector<Instruction> instructions;
  ScriptBuilder builder;
  for (int i = 0; i < n; ++i) {
    docs.push_back(make_doc("d" + std::to_string(i), "t" + std::to_string(i)));
    Instruction inst;
    inst.id = docs.back().id + "/q0";
    inst.doc_id = docs.back().id;
    inst.text = "q" + std::to_string(i);
    instructions.push_back(inst);
    builder.add(render_filter_prompt(inst, docs.back()),
                {i < n_true ? "True" : "False"});
  }
  auto backend = builder.build();
  auto gateway = make_gateway();
  auto result = filter_all(instructions, docs, gateway, *backend, 4);
  CHECK(result.retained.size() == n_true);
  CHECK(result.dropped.size() == n - n_true);
}

TEST_CASE("instruction JSONL round-trip") {
  pairforge::testing::TempDir dir("instruct");
  Instruction inst;
  inst.id = "a/q0";
  inst.doc_id = "a";
  inst.text = "What?";
  inst.filter_verdict = true;
  inst.example_used = "E";
  auto path = dir.path() / "i.jsonl";
  save_instructions(path, {inst});
  auto loaded = load_instructions(path.string());
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].id == inst.id);
  CHECK(loaded[0].filter_verdict == true);
  save_instructions(dir.path() / "i2.jsonl", loaded);
  CHECK(read_file((dir.path() / "i.jsonl").string()) ==
        read_file((dir.path() / "i2.jsonl").string()));
}
