#pragma once

#include <set>
#include <string>
#include <vector>

#include "pairforge/instruct.hpp"
#include "pairforge/pipeline.hpp"
#include "pairforge/quality.hpp"
#include "pairforge/reward.hpp"
#include "test_util.hpp"

namespace pairforge::testing {

// Fully scripted end-to-end scenario: builds the corpus file, the example
// pool and one mock script that answers every prompt the pipeline will
// render, by rendering those prompts with the same library code and seeds the
// pipeline itself uses.
struct ScenarioSpec {
  int n_docs = 50;
  int n_quality_pass = 20;  // docs scored >= 4, the rest get 2
  int n_filter_true = 15;   // retained instructions among the quality-passing
  int k = 5;
  int n_judge = 8;
  std::set<int> degenerate;  // indices among retained instructions
  int duplicate_docs = 0;    // extra docs whose text collapses to doc 0's
  int malformed_lines = 0;
  std::uint64_t seed = 7;
};

struct Scenario {
  PipelineConfig config;
  std::vector<std::string> retained_instruction_texts;
  int expected_pairs = 0;
};

inline std::string scenario_doc_text(int i) {
  return "Document body " + std::to_string(i) +
         " with enough substance to ask a question about topic " +
         std::to_string(i) + ".";
}

inline Scenario build_scenario(const ScenarioSpec& spec,
                               const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  const std::vector<std::string> pool = {"What is the capital of France?",
                                         "Explain how tides work.",
                                         "Summarize the plot of Hamlet."};
  {
    std::ofstream out(dir / "pool.txt", std::ios::binary);
    for (const std::string& example : pool) out << example << "\n";
  }

  std::vector<UgcDocument> docs;
  for (int i = 0; i < spec.n_docs; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "doc%03d", i);
    docs.push_back(make_doc(id, scenario_doc_text(i)));
  }

  {
    std::ofstream out(dir / "corpus.jsonl", std::ios::binary);
    for (const auto& doc : docs) out << doc.to_json().dump() << "\n";
    for (int d = 0; d < spec.duplicate_docs; ++d) {
      UgcDocument dup = make_doc("dup" + std::to_string(d),
                                 "  " + scenario_doc_text(0) + "  ");
      out << dup.to_json().dump() << "\n";
    }
    for (int m = 0; m < spec.malformed_lines; ++m) {
      out << "{\"id\": \"broken" << m << "\"\n";
    }
  }

  ScriptBuilder script;

  // quality stage: first n_quality_pass docs score 4 or 5, the rest 2
  for (int i = 0; i < spec.n_docs; ++i) {
    int score = i < spec.n_quality_pass ? (i % 2 == 0 ? 4 : 5) : 2;
    script.add(render_quality_prompt(docs[static_cast<std::size_t>(i)]),
               {"brief reasoning\nScore: " + std::to_string(score)});
  }

  // instruction generation over the selected docs
  const std::uint64_t gen_seed = stage_seed(spec.seed, "instructions");
  std::vector<Instruction> retained;
  Scenario scenario;
  for (int i = 0; i < spec.n_quality_pass; ++i) {
    const UgcDocument& doc = docs[static_cast<std::size_t>(i)];
    const std::string& example =
        pool[pick_example_index(gen_seed, doc.id, pool.size())];
    std::string question = "What should a reader learn about topic " +
                           std::to_string(i) + "?";
    script.add(render_geninst_prompt(doc, example), {question});

    Instruction inst;
    inst.id = doc.id + "/q0";
    inst.doc_id = doc.id;
    inst.text = question;
    bool keep = i < spec.n_filter_true;
    script.add(render_filter_prompt(inst, doc), {keep ? "True" : "False"});
    if (keep) {
      retained.push_back(inst);
      scenario.retained_instruction_texts.push_back(question);
    }
  }

  // response sampling + reward scoring for retained instructions
  for (std::size_t j = 0; j < retained.size(); ++j) {
    const Instruction& inst = retained[j];
    const std::string& reference =
        scenario_doc_text(static_cast<int>(j));  // doc j is inst j's source
    bool degenerate = spec.degenerate.count(static_cast<int>(j)) > 0;

    std::vector<std::string> responses;
    for (int r = 0; r < spec.k; ++r) {
      std::string text = "Answer " + inst.id + " option " + std::to_string(r) +
                         " " + std::string(static_cast<std::size_t>(
                                               (spec.k - r) * 7),
                                           'x');
      responses.push_back(text);
    }
    script.add(inst.text, responses);

    for (int r = 0; r < spec.k; ++r) {
      int value = degenerate ? 3 : 1 + r % 5;
      std::vector<std::string> judgments(
          static_cast<std::size_t>(spec.n_judge),
          "feedback [RESULT] " + std::to_string(value));
      script.add(render_reward_prompt(inst.text, responses[static_cast<std::size_t>(r)],
                                      reference, default_rubric()),
                 judgments);
    }
  }

  script.write(dir / "script.json");

  scenario.expected_pairs =
      static_cast<int>(retained.size() - spec.degenerate.size());

  PipelineConfig config;
  config.workspace = dir / "ws";
  config.corpus_input = (dir / "corpus.jsonl").string();
  config.skip_malformed = spec.malformed_lines > 0;
  BackendSpec mock;
  mock.kind = "mock";
  mock.script = (dir / "script.json").string();
  mock.seed = 1;
  config.backends["policy"] = mock;
  config.backends["quality"] = mock;
  config.backends["reward"] = mock;
  config.quality_threshold = 4;
  config.k_responses = spec.k;
  config.n_judge = spec.n_judge;
  config.seed = spec.seed;
  config.example_pool = (dir / "pool.txt").string();
  config.retry_initial_delay_ms = 0;
  config.concurrency = 4;
  scenario.config = std::move(config);
  return scenario;
}

}  // namespace pairforge::testing
