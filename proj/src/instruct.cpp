#include "pairforge/instruct.hpp"

#include <fstream>
#include <unordered_map>

#include "pairforge/digest.hpp"
#include "pairforge/parallel.hpp"
#include "pairforge/text.hpp"

namespace pairforge {

namespace {

const char* kGenInstTemplate =
    R"(###Task Instruction
Act as a human and generate a question or instruction based on the provided context. Here is an instruction or query example, you can follow its pattern.

<example start> {example} <example end>

<context start> {context} <context end>

Ensure that the provided context contains sufficient information and details to support responses to the question or instruction. Your question or instruction should be complete, independent, and self-contained. Give specific and detailed information in the question or instruction. Only generate one question or instruction and nothing else. The question or instruction cannot explicitly refer to the context.)";

const char* kFilterTemplate =
    R"(###Context
{context}

###Question
{question}

###Task Instruction
Determine if the context contains accurate, comprehensive, profound, creative, and insightful information relevant to the question. Respond with only True or False without any additional characters or formatting.)";

const char* kTemplateMarkers[] = {"<example start>", "<example end>",
                                  "<context start>", "<context end>"};

std::string substitute(std::string templ, const std::string& placeholder,
                       const std::string& value) {
  std::size_t pos = templ.find(placeholder);
  if (pos != std::string::npos) {
    templ.replace(pos, placeholder.size(), value);
  }
  return templ;
}

std::optional<std::string> instruction_defect(const std::string& text) {
  if (text.empty()) {
    return "empty completion";
  }
  for (const char* marker : kTemplateMarkers) {
    if (text.find(marker) != std::string::npos) {
      return std::string("completion contains template marker ") + marker;
    }
  }
  return std::nullopt;
}

}  // namespace

Json Instruction::to_json() const {
  Json j;
  j["id"] = id;
  j["doc_id"] = doc_id;
  j["text"] = text;
  if (filter_verdict) {
    j["filter_verdict"] = *filter_verdict;
  }
  j["example_used"] = example_used;
  return j;
}

Instruction Instruction::from_json(const Json& j) {
  Instruction inst;
  inst.id = j.at("id").get<std::string>();
  inst.doc_id = j.at("doc_id").get<std::string>();
  inst.text = j.at("text").get<std::string>();
  if (j.contains("filter_verdict")) {
    inst.filter_verdict = j.at("filter_verdict").get<bool>();
  }
  inst.example_used = j.at("example_used").get<std::string>();
  return inst;
}

Json InstructionQuarantine::to_json() const {
  Json j;
  j["doc_id"] = doc_id;
  if (!instruction_id.empty()) {
    j["instruction_id"] = instruction_id;
  }
  j["reason"] = reason;
  return j;
}

std::string render_geninst_prompt(const UgcDocument& doc,
                                  const std::string& example) {
  if (example.empty()) {
    throw std::invalid_argument("instruction example must be non-empty");
  }
  std::string prompt = substitute(kGenInstTemplate, "{example}", example);
  return substitute(std::move(prompt), "{context}", doc.text);
}

std::string render_filter_prompt(const Instruction& inst,
                                 const UgcDocument& doc) {
  if (inst.doc_id != doc.id) {
    throw std::logic_error("filter prompt pairing mismatch: instruction " +
                           inst.id + " belongs to document " + inst.doc_id +
                           ", got " + doc.id);
  }
  std::string prompt = substitute(kFilterTemplate, "{context}", doc.text);
  return substitute(std::move(prompt), "{question}", inst.text);
}

std::size_t pick_example_index(std::uint64_t seed, const std::string& doc_id,
                               std::size_t pool_size) {
  if (pool_size == 0) {
    throw std::invalid_argument("example pool is empty");
  }
  std::uint64_t h = fnv1a64(std::to_string(seed));
  h = fnv1a64("\x1f", h);
  h = fnv1a64(doc_id, h);
  return static_cast<std::size_t>(h % pool_size);
}

GenerateResult generate_all(const std::vector<UgcDocument>& docs,
                            Gateway& gateway, Backend& policy,
                            const std::vector<std::string>& example_pool,
                            std::uint64_t seed, int workers) {
  if (example_pool.empty()) {
    throw std::invalid_argument("example pool is empty");
  }

  struct PerDoc {
    std::optional<Instruction> instruction;
    std::optional<InstructionQuarantine> quarantine;
  };

  std::vector<PerDoc> outcomes = parallel_map<PerDoc>(
      docs.size(), workers, [&](std::size_t i) -> PerDoc {
        const UgcDocument& doc = docs[i];
        const std::string& example =
            example_pool[pick_example_index(seed, doc.id, example_pool.size())];
        CompletionRequest req;
        req.user = render_geninst_prompt(doc, example);
        req.temperature = 0.7;
        req.top_p = 0.9;
        req.seed = static_cast<std::int64_t>(
            fnv1a64(doc.id, fnv1a64(std::to_string(seed))));
        CompletionResult result = gateway.complete(policy, req);
        std::string text(trim(result.texts.at(0)));
        if (auto defect = instruction_defect(text)) {
          return {std::nullopt, InstructionQuarantine{doc.id, "", *defect}};
        }
        Instruction inst;
        inst.id = doc.id + "/q0";
        inst.doc_id = doc.id;
        inst.text = std::move(text);
        inst.example_used = example;
        return {std::move(inst), std::nullopt};
      });

  GenerateResult result;
  for (PerDoc& outcome : outcomes) {
    if (outcome.instruction) {
      result.instructions.push_back(std::move(*outcome.instruction));
    } else {
      result.quarantined.push_back(std::move(*outcome.quarantine));
    }
  }
  return result;
}

FilterResult filter_all(const std::vector<Instruction>& instructions,
                        const std::vector<UgcDocument>& docs, Gateway& gateway,
                        Backend& backend, int workers) {
  std::unordered_map<std::string, const UgcDocument*> by_id;
  for (const UgcDocument& doc : docs) {
    by_id[doc.id] = &doc;
  }

  struct PerInst {
    std::optional<bool> verdict;
    std::string quarantine_reason;
  };

  std::vector<PerInst> outcomes = parallel_map<PerInst>(
      instructions.size(), workers, [&](std::size_t i) -> PerInst {
        const Instruction& inst = instructions[i];
        auto it = by_id.find(inst.doc_id);
        if (it == by_id.end()) {
          throw std::logic_error("instruction " + inst.id +
                                 " references unknown document " + inst.doc_id);
        }
        CompletionRequest req;
        req.user = render_filter_prompt(inst, *it->second);
        try {
          return {gateway.constrained_binary(backend, req), {}};
        } catch (const ProtocolError& e) {
          return {std::nullopt, e.what()};
        }
      });

  FilterResult result;
  for (std::size_t i = 0; i < instructions.size(); ++i) {
    Instruction inst = instructions[i];
    if (!outcomes[i].verdict) {
      result.quarantined.push_back(
          {inst.doc_id, inst.id, outcomes[i].quarantine_reason});
      continue;
    }
    inst.filter_verdict = *outcomes[i].verdict;
    if (*outcomes[i].verdict) {
      result.retained.push_back(std::move(inst));
    } else {
      result.dropped.push_back(std::move(inst));
    }
  }
  return result;
}

std::vector<Instruction> load_instructions(const std::string& path) {
  std::vector<Instruction> out;
  for (const Json& j : read_jsonl(path)) {
    out.push_back(Instruction::from_json(j));
  }
  return out;
}

void save_instructions(const std::filesystem::path& path,
                       const std::vector<Instruction>& instructions) {
  std::vector<Json> records;
  records.reserve(instructions.size());
  for (const Instruction& inst : instructions) {
    records.push_back(inst.to_json());
  }
  write_jsonl(path, records);
}

std::vector<std::string> load_example_pool(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open example pool: " + path);
  }
  std::vector<std::string> pool;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    pool.push_back(line);
  }
  if (pool.empty()) {
    throw std::runtime_error("example pool has no exemplars: " + path);
  }
  return pool;
}

}  // namespace pairforge
