#include "pairforge/sampler.hpp"

#include "pairforge/digest.hpp"
#include "pairforge/parallel.hpp"
#include "pairforge/text.hpp"

namespace pairforge {

Json ResponseSample::to_json() const {
  Json j;
  j["instruction_id"] = instruction_id;
  j["index"] = index;
  j["text"] = text;
  j["length_chars"] = length_chars;
  return j;
}

ResponseSample ResponseSample::from_json(const Json& j) {
  ResponseSample s;
  s.instruction_id = j.at("instruction_id").get<std::string>();
  s.index = j.at("index").get<int>();
  s.text = j.at("text").get<std::string>();
  s.length_chars = j.at("length_chars").get<std::size_t>();
  if (s.length_chars != count_scalars(s.text)) {
    throw std::invalid_argument("length_chars " + std::to_string(s.length_chars) +
                                " does not match text length for instruction " +
                                s.instruction_id);
  }
  return s;
}

Json SampleQuarantine::to_json() const {
  Json j;
  j["instruction_id"] = instruction_id;
  j["reason"] = reason;
  return j;
}

std::vector<ResponseSample> load_samples(const std::string& path) {
  std::vector<ResponseSample> out;
  for (const Json& j : read_jsonl(path)) {
    out.push_back(ResponseSample::from_json(j));
  }
  return out;
}

void save_samples(const std::filesystem::path& path,
                  const std::vector<ResponseSample>& samples) {
  std::vector<Json> records;
  records.reserve(samples.size());
  for (const ResponseSample& sample : samples) {
    records.push_back(sample.to_json());
  }
  write_jsonl(path, records);
}

SampleResult sample_all(const std::vector<Instruction>& instructions,
                        Gateway& gateway, Backend& policy,
                        const SamplerOptions& options) {
  if (options.k < 2) {
    throw std::invalid_argument("a preference pair needs k >= 2 responses");
  }

  struct PerInst {
    std::vector<ResponseSample> samples;
    std::string quarantine_reason;
  };

  auto make_request = [&](const Instruction& inst, int n) {
    CompletionRequest req;
    req.user = inst.text;
    req.temperature = 0.8;
    req.top_p = 0.95;
    req.n = n;
    req.seed = static_cast<std::int64_t>(
        fnv1a64(inst.id, fnv1a64(std::to_string(options.seed))));
    return req;
  };

  std::vector<PerInst> outcomes = parallel_map<PerInst>(
      instructions.size(), options.workers, [&](std::size_t i) -> PerInst {
        const Instruction& inst = instructions[i];
        std::vector<std::string> texts;
        if (options.batched) {
          CompletionResult result =
              gateway.complete(policy, make_request(inst, options.k));
          texts = result.texts;
        } else {
          for (int r = 0; r < options.k; ++r) {
            texts.push_back(
                gateway.complete(policy, make_request(inst, 1)).texts.at(0));
          }
        }

        for (std::string& text : texts) {
          if (!trim(text).empty()) continue;
          // one resample per empty slot
          text = gateway.complete(policy, make_request(inst, 1)).texts.at(0);
          if (trim(text).empty()) {
            return {{}, "empty completion persisted after one resample"};
          }
        }

        PerInst out;
        for (int r = 0; r < options.k; ++r) {
          ResponseSample sample;
          sample.instruction_id = inst.id;
          sample.index = r;
          sample.text = texts[static_cast<std::size_t>(r)];
          sample.length_chars = count_scalars(sample.text);
          out.samples.push_back(std::move(sample));
        }
        return out;
      });

  SampleResult result;
  for (std::size_t i = 0; i < instructions.size(); ++i) {
    if (!outcomes[i].quarantine_reason.empty()) {
      result.quarantined.push_back(
          {instructions[i].id, outcomes[i].quarantine_reason});
      continue;
    }
    for (ResponseSample& sample : outcomes[i].samples) {
      result.samples.push_back(std::move(sample));
    }
  }
  return result;
}

}  // namespace pairforge
