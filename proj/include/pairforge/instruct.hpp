#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pairforge/corpus.hpp"
#include "pairforge/gateway.hpp"

namespace pairforge {

/// A generated reader query bound to its source document.
struct Instruction {
  std::string id;
  std::string doc_id;
  std::string text;
  std::optional<bool> filter_verdict;
  std::string example_used;

  Json to_json() const;
  static Instruction from_json(const Json& j);
};

struct InstructionQuarantine {
  std::string doc_id;
  std::string instruction_id;  // empty when generation itself failed
  std::string reason;

  Json to_json() const;
};

// Reader-question prompt with the example and document substituted into
// their delimited slots. The example must be non-empty.
std::string render_geninst_prompt(const UgcDocument& doc,
                                  const std::string& example);

// Relevance-filter prompt. The instruction must belong to the document
// (mismatched pairing is a wiring bug and throws std::logic_error).
std::string render_filter_prompt(const Instruction& inst,
                                 const UgcDocument& doc);

// Uniform example choice that depends only on (seed, doc id), so reruns and
// parallel schedules pick the same exemplar.
std::size_t pick_example_index(std::uint64_t seed, const std::string& doc_id,
                               std::size_t pool_size);

struct GenerateResult {
  std::vector<Instruction> instructions;  // one per surviving document
  std::vector<InstructionQuarantine> quarantined;
};

GenerateResult generate_all(const std::vector<UgcDocument>& docs,
                            Gateway& gateway, Backend& policy,
                            const std::vector<std::string>& example_pool,
                            std::uint64_t seed, int workers = 1);

struct FilterResult {
  std::vector<Instruction> retained;   // filter_verdict == true
  std::vector<Instruction> dropped;    // filter_verdict == false
  std::vector<InstructionQuarantine> quarantined;
};

// Keeps an instruction iff the constrained {True,False} decode over the
// filter prompt says the document can answer it.
FilterResult filter_all(const std::vector<Instruction>& instructions,
                        const std::vector<UgcDocument>& docs, Gateway& gateway,
                        Backend& backend, int workers = 1);

std::vector<std::string> load_example_pool(const std::string& path);

std::vector<Instruction> load_instructions(const std::string& path);
void save_instructions(const std::filesystem::path& path,
                       const std::vector<Instruction>& instructions);

}  // namespace pairforge
