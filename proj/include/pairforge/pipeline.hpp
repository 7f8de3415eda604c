#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pairforge/corpus.hpp"
#include "pairforge/evalsuite.hpp"
#include "pairforge/gateway.hpp"
#include "pairforge/instruct.hpp"
#include "pairforge/pairs.hpp"
#include "pairforge/quality.hpp"
#include "pairforge/reward.hpp"
#include "pairforge/sampler.hpp"

namespace pairforge {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct StageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BackendSpec {
  std::string kind;  // "http" or "mock"
  std::string base_url;
  std::string model;
  std::string api_key_env;
  std::string script;  // mock: path to the script file
  std::int64_t seed = 0;

  Json to_json() const;
  static BackendSpec from_json(const Json& j);
  // Content-addressed identity for stage manifests (script file digest for
  // mocks, never key material).
  Json fingerprint() const;
};

struct PipelineConfig {
  std::filesystem::path workspace;
  std::string corpus_input;
  bool skip_malformed = false;

  // Roles: "policy", "quality", "reward" are required for run-all; "gold" is
  // required for eval-agreement; "geninst"/"filter" override "policy" for
  // those stages when present.
  std::map<std::string, BackendSpec> backends;
  std::vector<BackendSpec> iteration_policies;

  int quality_threshold = 4;
  int k_responses = 5;
  int n_judge = 8;
  int iterations = 3;
  std::uint64_t seed = 0;
  std::string example_pool;
  std::string rubric;  // empty: built-in default rubric
  bool with_reference = true;
  std::size_t reference_char_budget = 100000;
  std::string aggregator = "mean";  // or "mode"
  bool batched_judge_samples = true;
  bool batched_response_samples = true;
  int concurrency = 4;
  int retry_attempts = 3;
  int retry_initial_delay_ms = 1000;
  int timeout_ms = 120000;
  bool trace = false;
  double tie_epsilon = 0.0;

  static PipelineConfig load(const std::string& path);
  Json to_json() const;

  // Structural invariants plus existence of every referenced file. Throws
  // ConfigError.
  void validate(bool for_run_all = true) const;
};

struct StageManifest {
  std::string stage;
  std::map<std::string, std::string> input_digests;
  std::map<std::string, std::string> output_digests;
  std::string config_digest;
  std::string status;  // "partial" or "complete"
  std::map<std::string, std::int64_t> counts;

  Json to_json() const;
  static StageManifest from_json(const Json& j);
};

// Per-stage seed derivation from the root seed; documented so any stage can
// be reproduced in isolation.
std::uint64_t stage_seed(std::uint64_t root_seed, const std::string& stage);

std::shared_ptr<Backend> make_backend(const BackendSpec& spec, int timeout_ms);

extern const std::vector<std::string> kStageOrder;  // corpus .. pairs

struct RunSummary {
  std::vector<StageManifest> stages;
  bool conservation_ok = true;
  std::vector<std::string> conservation_failures;

  Json to_json() const;
};

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);
  ~Pipeline();

  const PipelineConfig& config() const { return config_; }

  // Runs one named stage, skipping it when its manifest is complete and all
  // input/config digests still match. Outputs land atomically; the manifest
  // is written last. Throws StageError when an upstream stage is incomplete.
  StageManifest run_stage(const std::string& name);

  // corpus -> quality -> select -> instructions -> filter -> sample ->
  // reward -> pairs, then the run summary (with conservation identities).
  RunSummary run_all();

  // Would-run/would-skip per stage, without executing anything.
  std::vector<std::pair<std::string, bool>> plan();

  // Iterative mode over m instruction subsets. Stages through "filter" are
  // shared; each iteration samples/scores/pairs its subset against
  // iteration_policies[i]. confirm(i) runs before iteration i > 0 so the
  // operator can redeploy the retrained policy; returning false stops.
  // Returns the per-iteration pairs files.
  std::vector<std::filesystem::path> run_iterative(
      int m, const std::function<bool(int)>& confirm);

  std::filesystem::path stage_output(const std::string& stage,
                                     const std::string& label) const;
  std::optional<StageManifest> load_manifest(const std::string& stage) const;

  Gateway& gateway() { return *gateway_; }
  Backend& backend(const std::string& role);

 private:
  struct StageDef;
  StageDef stage_def(const std::string& name);
  StageDef iteration_stage_def(const std::string& base, int iteration,
                               const std::vector<std::string>& subset_ids);
  StageManifest run_stage_def(const StageDef& def);
  void require_complete(const std::string& stage) const;
  std::filesystem::path manifest_path(const std::string& stage) const;
  RewardRubric rubric() const;

  PipelineConfig config_;
  std::unique_ptr<Gateway> gateway_;
  std::map<std::string, std::shared_ptr<Backend>> backend_cache_;
  std::mutex trace_mu_;
};

// ---------------------------------------------------------------------------
// Reward-agreement protocol (gold judging + with/without-reference scoring +
// self-consistency sweep), runnable standalone from an items file.

struct EvalItem {
  std::string item_id;
  std::string instruction;
  std::string resp_a;
  std::string resp_b;
  std::string reference;  // source UGC for the with-reference arm

  Json to_json() const;
  static EvalItem from_json(const Json& j);
};

std::vector<EvalItem> load_eval_items(const std::string& path);

struct AgreementRun {
  std::vector<PairJudgment> gold;
  std::vector<AggregateScore> with_ref_a;
  std::vector<AggregateScore> with_ref_b;
  std::vector<AggregateScore> no_ref_a;
  std::vector<AggregateScore> no_ref_b;
  // (configuration label, N', report); configurations "with_reference" and
  // "without_reference".
  std::vector<std::tuple<std::string, int, AgreementReport>> reports;
};

struct AgreementRunOptions {
  int n = 8;
  std::vector<int> n_sweep = {1, 3, 5, 8};
  double tie_epsilon = 0.0;
  Aggregator aggregator = Aggregator::kMean;
  bool batched = true;
  std::uint64_t seed = 0;
  int workers = 1;
};

AgreementRun run_reward_agreement(const std::vector<EvalItem>& items,
                                  Gateway& gateway, Backend& gold_judge,
                                  Backend& reward_judge,
                                  const RewardRubric& rubric,
                                  const AgreementRunOptions& options);

}  // namespace pairforge
