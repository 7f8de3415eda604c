#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pairforge/gateway.hpp"
#include "pairforge/instruct.hpp"

namespace pairforge {

/// One policy-model response to an instruction.
struct ResponseSample {
  std::string instruction_id;
  int index = 0;  // 0..K-1, contiguous within an instruction
  std::string text;
  std::size_t length_chars = 0;  // Unicode scalar count of text

  Json to_json() const;
  static ResponseSample from_json(const Json& j);
};

struct SamplerOptions {
  int k = 5;
  bool batched = true;  // one n=K request vs K independent requests
  std::uint64_t seed = 0;
  int workers = 1;
};

struct SampleQuarantine {
  std::string instruction_id;
  std::string reason;

  Json to_json() const;
};

struct SampleResult {
  // Exactly k samples per surviving instruction, grouped by instruction in
  // input order.
  std::vector<ResponseSample> samples;
  std::vector<SampleQuarantine> quarantined;
};

// Draws k responses per instruction at temperature 0.8 / top_p 0.95. An empty
// completion is resampled once; an instruction that still has an empty slot
// after that is quarantined whole, so survivors always carry exactly k
// non-empty samples. Requires k >= 2.
SampleResult sample_all(const std::vector<Instruction>& instructions,
                        Gateway& gateway, Backend& policy,
                        const SamplerOptions& options);

std::vector<ResponseSample> load_samples(const std::string& path);
void save_samples(const std::filesystem::path& path,
                  const std::vector<ResponseSample>& samples);

}  // namespace pairforge
