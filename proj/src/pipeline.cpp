#include "pairforge/pipeline.hpp"

#include <fstream>

#include "pairforge/digest.hpp"
#include "pairforge/parallel.hpp"
#include "pairforge/text.hpp"

namespace pairforge {

namespace fs = std::filesystem;

const std::vector<std::string> kStageOrder = {
    "corpus", "quality", "select", "instructions",
    "filter", "sample",  "reward", "pairs"};

// ---------------------------------------------------------------------------
// Config

Json BackendSpec::to_json() const {
  Json j;
  j["kind"] = kind;
  if (kind == "http") {
    j["base_url"] = base_url;
    j["model"] = model;
    if (!api_key_env.empty()) j["api_key_env"] = api_key_env;
  } else {
    j["script"] = script;
    j["seed"] = seed;
  }
  return j;
}

BackendSpec BackendSpec::from_json(const Json& j) {
  BackendSpec spec;
  spec.kind = j.at("kind").get<std::string>();
  if (spec.kind == "http") {
    spec.base_url = j.at("base_url").get<std::string>();
    spec.model = j.at("model").get<std::string>();
    spec.api_key_env = j.value("api_key_env", "");
  } else if (spec.kind == "mock") {
    spec.script = j.at("script").get<std::string>();
    spec.seed = j.value("seed", std::int64_t{0});
  } else {
    throw ConfigError("backend kind must be \"http\" or \"mock\", got \"" +
                      spec.kind + "\"");
  }
  return spec;
}

Json BackendSpec::fingerprint() const {
  Json j = to_json();
  if (kind == "mock") {
    j["script_digest"] = file_digest(script);
  }
  return j;
}

std::shared_ptr<Backend> make_backend(const BackendSpec& spec, int timeout_ms) {
  if (spec.kind == "mock") {
    return MockBackend::from_script_file(spec.script, spec.seed);
  }
  return std::make_shared<HttpBackend>(spec.base_url, spec.model,
                                       spec.api_key_env, timeout_ms);
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const std::exception& e) {
    throw ConfigError(std::string("cannot parse config: ") + e.what());
  }
  PipelineConfig config;
  try {
    config.workspace = j.at("workspace").get<std::string>();
    config.corpus_input = j.value("corpus_input", "");
    config.skip_malformed = j.value("skip_malformed", false);
    if (j.contains("backends")) {
      for (const auto& [role, spec] : j.at("backends").items()) {
        config.backends[role] = BackendSpec::from_json(spec);
      }
    }
    if (j.contains("iteration_policies")) {
      for (const Json& spec : j.at("iteration_policies")) {
        config.iteration_policies.push_back(BackendSpec::from_json(spec));
      }
    }
    config.quality_threshold = j.value("quality_threshold", 4);
    config.k_responses = j.value("k_responses", 5);
    config.n_judge = j.value("n_judge", 8);
    config.iterations = j.value("iterations", 3);
    config.seed = j.value("seed", std::uint64_t{0});
    config.example_pool = j.value("example_pool", "");
    config.rubric = j.value("rubric", "");
    config.with_reference = j.value("with_reference", true);
    config.reference_char_budget =
        j.value("reference_char_budget", std::size_t{100000});
    config.aggregator = j.value("aggregator", "mean");
    config.batched_judge_samples = j.value("batched_judge_samples", true);
    config.batched_response_samples = j.value("batched_response_samples", true);
    config.concurrency = j.value("concurrency", 4);
    config.retry_attempts = j.value("retry_attempts", 3);
    config.retry_initial_delay_ms = j.value("retry_initial_delay_ms", 1000);
    config.timeout_ms = j.value("timeout_ms", 120000);
    config.trace = j.value("trace", false);
    config.tie_epsilon = j.value("tie_epsilon", 0.0);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad config field: ") + e.what());
  }
  return config;
}

Json PipelineConfig::to_json() const {
  Json j;
  j["workspace"] = workspace.string();
  j["corpus_input"] = corpus_input;
  j["skip_malformed"] = skip_malformed;
  Json roles = Json::object();
  for (const auto& [role, spec] : backends) roles[role] = spec.to_json();
  j["backends"] = std::move(roles);
  Json iters = Json::array();
  for (const BackendSpec& spec : iteration_policies) {
    iters.push_back(spec.to_json());
  }
  j["iteration_policies"] = std::move(iters);
  j["quality_threshold"] = quality_threshold;
  j["k_responses"] = k_responses;
  j["n_judge"] = n_judge;
  j["iterations"] = iterations;
  j["seed"] = seed;
  j["example_pool"] = example_pool;
  j["rubric"] = rubric;
  j["with_reference"] = with_reference;
  j["reference_char_budget"] = reference_char_budget;
  j["aggregator"] = aggregator;
  j["batched_judge_samples"] = batched_judge_samples;
  j["batched_response_samples"] = batched_response_samples;
  j["concurrency"] = concurrency;
  j["retry_attempts"] = retry_attempts;
  j["retry_initial_delay_ms"] = retry_initial_delay_ms;
  j["timeout_ms"] = timeout_ms;
  j["trace"] = trace;
  j["tie_epsilon"] = tie_epsilon;
  return j;
}

void PipelineConfig::validate(bool for_run_all) const {
  if (workspace.empty()) {
    throw ConfigError("workspace directory is required");
  }
  if (k_responses < 2) {
    throw ConfigError("k_responses must be >= 2 (a pair needs two candidates)");
  }
  if (n_judge < 1) {
    throw ConfigError("n_judge must be >= 1");
  }
  if (quality_threshold < 1 || quality_threshold > 5) {
    throw ConfigError("quality_threshold must be in 1..5");
  }
  if (aggregator != "mean" && aggregator != "mode") {
    throw ConfigError("aggregator must be \"mean\" or \"mode\"");
  }
  if (iterations < 1) {
    throw ConfigError("iterations must be >= 1");
  }
  auto require_file = [](const std::string& label, const std::string& path) {
    if (path.empty()) {
      throw ConfigError(label + " path is required");
    }
    if (!fs::exists(path)) {
      throw ConfigError(label + " does not exist: " + path);
    }
  };
  auto check_backend = [&](const std::string& role, const BackendSpec& spec) {
    if (spec.kind == "mock") {
      require_file("backend \"" + role + "\" script", spec.script);
    } else if (spec.base_url.empty() || spec.model.empty()) {
      throw ConfigError("backend \"" + role +
                        "\" needs base_url and model");
    }
  };
  for (const auto& [role, spec] : backends) check_backend(role, spec);
  for (std::size_t i = 0; i < iteration_policies.size(); ++i) {
    check_backend("iteration " + std::to_string(i + 1), iteration_policies[i]);
  }
  if (!rubric.empty()) {
    require_file("rubric", rubric);
  }
  if (for_run_all) {
    require_file("corpus_input", corpus_input);
    require_file("example_pool", example_pool);
    for (const char* role : {"policy", "quality", "reward"}) {
      if (!backends.count(role)) {
        throw ConfigError(std::string("backend role \"") + role +
                          "\" is required");
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Manifests

Json StageManifest::to_json() const {
  Json j;
  j["stage"] = stage;
  Json in = Json::object();
  for (const auto& [label, digest] : input_digests) in[label] = digest;
  j["input_digests"] = std::move(in);
  Json out = Json::object();
  for (const auto& [label, digest] : output_digests) out[label] = digest;
  j["output_digests"] = std::move(out);
  j["config_digest"] = config_digest;
  j["status"] = status;
  Json c = Json::object();
  for (const auto& [key, value] : counts) c[key] = value;
  j["counts"] = std::move(c);
  return j;
}

StageManifest StageManifest::from_json(const Json& j) {
  StageManifest m;
  m.stage = j.at("stage").get<std::string>();
  for (const auto& [label, digest] : j.at("input_digests").items()) {
    m.input_digests[label] = digest.get<std::string>();
  }
  for (const auto& [label, digest] : j.at("output_digests").items()) {
    m.output_digests[label] = digest.get<std::string>();
  }
  m.config_digest = j.at("config_digest").get<std::string>();
  m.status = j.at("status").get<std::string>();
  for (const auto& [key, value] : j.at("counts").items()) {
    m.counts[key] = value.get<std::int64_t>();
  }
  return m;
}

std::uint64_t stage_seed(std::uint64_t root_seed, const std::string& stage) {
  std::uint64_t h = fnv1a64(std::to_string(root_seed));
  h = fnv1a64("\x1f", h);
  return fnv1a64(stage, h);
}

// ---------------------------------------------------------------------------
// Run summary

Json RunSummary::to_json() const {
  Json j;
  Json stage_list = Json::array();
  for (const StageManifest& m : stages) stage_list.push_back(m.to_json());
  j["stages"] = std::move(stage_list);
  j["conservation_ok"] = conservation_ok;
  j["conservation_failures"] = conservation_failures;
  return j;
}

namespace {

std::int64_t count_of(const StageManifest& m, const std::string& key) {
  auto it = m.counts.find(key);
  return it == m.counts.end() ? 0 : it->second;
}

void check_conservation(RunSummary& summary) {
  std::map<std::string, const StageManifest*> by_name;
  for (const StageManifest& m : summary.stages) by_name[m.stage] = &m;

  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) {
      summary.conservation_ok = false;
      summary.conservation_failures.push_back(what);
    }
  };
  auto stage = [&](const char* name) -> const StageManifest* {
    auto it = by_name.find(name);
    return it == by_name.end() ? nullptr : it->second;
  };

  if (const StageManifest* m = stage("corpus")) {
    expect(count_of(*m, "in") ==
               count_of(*m, "loaded") + count_of(*m, "skipped_malformed"),
           "corpus: in == loaded + skipped_malformed");
    expect(count_of(*m, "loaded") ==
               count_of(*m, "out") + count_of(*m, "duplicates_removed"),
           "corpus: loaded == out + duplicates_removed");
  }
  struct Simple {
    const char* name;
    const char* extra;  // additional sink besides "out" and "quarantined"
  };
  for (const Simple& s : {Simple{"quality", nullptr}, Simple{"select", "below_threshold"},
                          Simple{"instructions", nullptr}, Simple{"filter", "dropped"},
                          Simple{"reward", nullptr}, Simple{"pairs", "discarded"}}) {
    const StageManifest* m = stage(s.name);
    if (!m) continue;
    std::int64_t sinks = count_of(*m, "out") + count_of(*m, "quarantined");
    if (s.extra) sinks += count_of(*m, s.extra);
    expect(count_of(*m, "in") == sinks,
           std::string(s.name) + ": in == out + losses");
  }
  if (const StageManifest* m = stage("sample")) {
    expect(count_of(*m, "in") ==
               count_of(*m, "out") + count_of(*m, "quarantined"),
           "sample: in == out + quarantined");
  }

  // funnel joints
  auto joint = [&](const char* up, const char* up_key, const char* down,
                   const char* down_key) {
    const StageManifest* a = stage(up);
    const StageManifest* b = stage(down);
    if (a && b) {
      expect(count_of(*a, up_key) == count_of(*b, down_key),
             std::string(up) + "." + up_key + " == " + down + "." + down_key);
    }
  };
  joint("corpus", "out", "quality", "in");
  joint("quality", "out", "select", "in");
  joint("select", "out", "instructions", "in");
  joint("instructions", "out", "filter", "in");
  joint("filter", "out", "sample", "in");
  joint("sample", "samples", "reward", "in");
  joint("filter", "out", "pairs", "in");
}

std::vector<UgcDocument> load_docs_strict(const std::string& path) {
  return load_corpus(path, false).docs;
}

}  // namespace

// ---------------------------------------------------------------------------
// Pipeline

struct Pipeline::StageDef {
  std::string name;
  std::vector<std::string> upstream;
  std::vector<std::pair<std::string, fs::path>> inputs;
  std::vector<std::pair<std::string, fs::path>> outputs;
  Json fingerprint;
  std::function<std::map<std::string, std::int64_t>()> run;
};

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  GatewayConfig gw;
  gw.max_attempts = config_.retry_attempts;
  gw.initial_backoff_ms = config_.retry_initial_delay_ms;
  gw.concurrency_cap = config_.concurrency;
  if (config_.trace) {
    fs::path trace_path = config_.workspace / "trace.jsonl";
    gw.trace = [this, trace_path](const Json& entry) {
      std::lock_guard<std::mutex> lock(trace_mu_);
      fs::create_directories(trace_path.parent_path());
      std::ofstream out(trace_path, std::ios::app | std::ios::binary);
      out << entry.dump() << "\n";
    };
  }
  gateway_ = std::make_unique<Gateway>(std::move(gw));
}

Pipeline::~Pipeline() = default;

Backend& Pipeline::backend(const std::string& role) {
  std::string effective = role;
  if ((role == "geninst" || role == "filter") && !config_.backends.count(role)) {
    effective = "policy";
  }
  auto it = backend_cache_.find(effective);
  if (it != backend_cache_.end()) {
    return *it->second;
  }
  auto spec_it = config_.backends.find(effective);
  if (spec_it == config_.backends.end()) {
    throw ConfigError("no backend configured for role \"" + effective + "\"");
  }
  auto backend = make_backend(spec_it->second, config_.timeout_ms);
  Backend& ref = *backend;
  backend_cache_[effective] = std::move(backend);
  return ref;
}

fs::path Pipeline::manifest_path(const std::string& stage) const {
  return config_.workspace / "manifests" / (stage + ".json");
}

std::optional<StageManifest> Pipeline::load_manifest(
    const std::string& stage) const {
  fs::path path = manifest_path(stage);
  if (!fs::exists(path)) return std::nullopt;
  return StageManifest::from_json(Json::parse(read_file(path.string())));
}

void Pipeline::require_complete(const std::string& stage) const {
  auto manifest = load_manifest(stage);
  if (!manifest || manifest->status != "complete") {
    throw StageError("upstream stage \"" + stage +
                     "\" is not complete; run it first");
  }
}

fs::path Pipeline::stage_output(const std::string& stage,
                                const std::string& label) const {
  return config_.workspace / stage / (label + ".jsonl");
}

RewardRubric Pipeline::rubric() const {
  if (config_.rubric.empty()) return default_rubric();
  return RewardRubric::load(config_.rubric);
}

namespace {

Json backend_fingerprint_for_role(const PipelineConfig& config,
                                  const std::string& role) {
  std::string effective = role;
  if ((role == "geninst" || role == "filter") && !config.backends.count(role)) {
    effective = "policy";
  }
  auto it = config.backends.find(effective);
  if (it == config.backends.end()) {
    throw ConfigError("no backend configured for role \"" + effective + "\"");
  }
  return it->second.fingerprint();
}

}  // namespace

Pipeline::StageDef Pipeline::stage_def(const std::string& name) {
  StageDef def;
  def.name = name;

  if (name == "corpus") {
    def.inputs = {{"raw", config_.corpus_input}};
    def.outputs = {{"docs", stage_output("corpus", "corpus")},
                   {"skipped", stage_output("corpus", "skipped")}};
    def.fingerprint = {{"skip_malformed", config_.skip_malformed}};
    def.run = [this] {
      LoadResult loaded = load_corpus(config_.corpus_input,
                                      config_.skip_malformed);
      std::vector<UgcDocument> deduped = dedup(loaded.docs);
      save_corpus(stage_output("corpus", "corpus"), deduped);
      std::vector<Json> skipped;
      for (const JsonlLineError& err : loaded.skipped) {
        Json j;
        j["line"] = err.line_number;
        j["error"] = err.message;
        skipped.push_back(std::move(j));
      }
      write_jsonl(stage_output("corpus", "skipped"), skipped);
      std::int64_t n_loaded = static_cast<std::int64_t>(loaded.docs.size());
      std::int64_t n_skipped = static_cast<std::int64_t>(loaded.skipped.size());
      std::int64_t n_out = static_cast<std::int64_t>(deduped.size());
      return std::map<std::string, std::int64_t>{
          {"in", n_loaded + n_skipped},
          {"loaded", n_loaded},
          {"skipped_malformed", n_skipped},
          {"duplicates_removed", n_loaded - n_out},
          {"out", n_out}};
    };
    return def;
  }

  if (name == "quality") {
    def.upstream = {"corpus"};
    def.inputs = {{"docs", stage_output("corpus", "corpus")}};
    def.outputs = {{"scored", stage_output("quality", "scored")},
                   {"judgments", stage_output("quality", "judgments")},
                   {"rejects", stage_output("quality", "rejects")}};
    def.fingerprint = {
        {"backend", backend_fingerprint_for_role(config_, "quality")}};
    def.run = [this] {
      std::vector<UgcDocument> docs =
          load_docs_strict(stage_output("corpus", "corpus").string());
      ScreenResult screened =
          screen(docs, *gateway_, backend("quality"), config_.concurrency);
      save_corpus(stage_output("quality", "scored"), screened.scored);
      std::vector<Json> judgments;
      for (const QualityJudgment& j : screened.judgments) {
        judgments.push_back(j.to_json());
      }
      write_jsonl(stage_output("quality", "judgments"), judgments);
      std::vector<Json> rejects;
      for (const QualityReject& r : screened.rejects) {
        Json j;
        j["doc"] = r.doc.to_json();
        j["error"] = r.error;
        rejects.push_back(std::move(j));
      }
      write_jsonl(stage_output("quality", "rejects"), rejects);
      return std::map<std::string, std::int64_t>{
          {"in", static_cast<std::int64_t>(docs.size())},
          {"out", static_cast<std::int64_t>(screened.scored.size())},
          {"quarantined", static_cast<std::int64_t>(screened.rejects.size())}};
    };
    return def;
  }

  if (name == "select") {
    def.upstream = {"quality"};
    def.inputs = {{"scored", stage_output("quality", "scored")}};
    def.outputs = {{"selected", stage_output("select", "selected")}};
    def.fingerprint = {{"quality_threshold", config_.quality_threshold}};
    def.run = [this] {
      std::vector<UgcDocument> docs =
          load_docs_strict(stage_output("quality", "scored").string());
      std::vector<UgcDocument> selected =
          select_by_quality(docs, config_.quality_threshold);
      save_corpus(stage_output("select", "selected"), selected);
      return std::map<std::string, std::int64_t>{
          {"in", static_cast<std::int64_t>(docs.size())},
          {"out", static_cast<std::int64_t>(selected.size())},
          {"below_threshold",
           static_cast<std::int64_t>(docs.size() - selected.size())}};
    };
    return def;
  }

  if (name == "instructions") {
    def.upstream = {"select"};
    def.inputs = {{"selected", stage_output("select", "selected")},
                  {"example_pool", config_.example_pool}};
    def.outputs = {{"instructions", stage_output("instructions", "instructions")},
                   {"quarantine", stage_output("instructions", "quarantine")}};
    def.fingerprint = {
        {"backend", backend_fingerprint_for_role(config_, "geninst")},
        {"seed", stage_seed(config_.seed, "instructions")}};
    def.run = [this] {
      std::vector<UgcDocument> docs =
          load_docs_strict(stage_output("select", "selected").string());
      std::vector<std::string> pool = load_example_pool(config_.example_pool);
      GenerateResult generated =
          generate_all(docs, *gateway_, backend("geninst"), pool,
                       stage_seed(config_.seed, "instructions"),
                       config_.concurrency);
      save_instructions(stage_output("instructions", "instructions"),
                        generated.instructions);
      std::vector<Json> quarantine;
      for (const InstructionQuarantine& q : generated.quarantined) {
        quarantine.push_back(q.to_json());
      }
      write_jsonl(stage_output("instructions", "quarantine"), quarantine);
      return std::map<std::string, std::int64_t>{
          {"in", static_cast<std::int64_t>(docs.size())},
          {"out", static_cast<std::int64_t>(generated.instructions.size())},
          {"quarantined",
           static_cast<std::int64_t>(generated.quarantined.size())}};
    };
    return def;
  }

  if (name == "filter") {
    def.upstream = {"instructions"};
    def.inputs = {{"instructions", stage_output("instructions", "instructions")},
                  {"selected", stage_output("select", "selected")}};
    def.outputs = {{"retained", stage_output("filter", "retained")},
                   {"dropped", stage_output("filter", "dropped")},
                   {"quarantine", stage_output("filter", "quarantine")}};
    def.fingerprint = {
        {"backend", backend_fingerprint_for_role(config_, "filter")}};
    def.run = [this] {
      std::vector<Instruction> instructions = load_instructions(
          stage_output("instructions", "instructions").string());
      std::vector<UgcDocument> docs =
          load_docs_strict(stage_output("select", "selected").string());
      FilterResult filtered = filter_all(instructions, docs, *gateway_,
                                         backend("filter"), config_.concurrency);
      save_instructions(stage_output("filter", "retained"), filtered.retained);
      save_instructions(stage_output("filter", "dropped"), filtered.dropped);
      std::vector<Json> quarantine;
      for (const InstructionQuarantine& q : filtered.quarantined) {
        quarantine.push_back(q.to_json());
      }
      write_jsonl(stage_output("filter", "quarantine"), quarantine);
      return std::map<std::string, std::int64_t>{
          {"in", static_cast<std::int64_t>(instructions.size())},
          {"out", static_cast<std::int64_t>(filtered.retained.size())},
          {"dropped", static_cast<std::int64_t>(filtered.dropped.size())},
          {"quarantined",
           static_cast<std::int64_t>(filtered.quarantined.size())}};
    };
    return def;
  }

  if (name == "sample" || name == "reward" || name == "pairs") {
    return iteration_stage_def(name, 0, {});
  }

  throw std::invalid_argument("unknown stage: " + name);
}

// Shared definition for the sampling tail. iteration == 0 is the offline
// run over filter/retained; iteration >= 1 reads its instruction subset and
// talks to that iteration's policy backend.
Pipeline::StageDef Pipeline::iteration_stage_def(
    const std::string& base, int iteration,
    const std::vector<std::string>& /*subset_ids*/) {
  StageDef def;
  const bool offline = iteration == 0;
  std::string suffix = offline ? "" : "-iter" + std::to_string(iteration);
  def.name = base + suffix;

  std::string dir = offline ? base
                            : "iterations/iter" + std::to_string(iteration) +
                                  "/" + base;
  auto out_path = [this, dir](const std::string& label) {
    return config_.workspace / dir / (label + ".jsonl");
  };
  fs::path instructions_path =
      offline ? stage_output("filter", "retained")
              : config_.workspace / "split" /
                    ("subset" + std::to_string(iteration) + ".jsonl");
  std::string sample_stage = "sample" + suffix;
  std::string reward_stage = "reward" + suffix;
  fs::path samples_path = offline
                              ? stage_output("sample", "samples")
                              : config_.workspace / "iterations" /
                                    ("iter" + std::to_string(iteration)) /
                                    "sample" / "samples.jsonl";
  fs::path scores_path = offline ? stage_output("reward", "scores")
                                 : config_.workspace / "iterations" /
                                       ("iter" + std::to_string(iteration)) /
                                       "reward" / "scores.jsonl";

  auto policy_backend = [this, offline, iteration]() -> Backend& {
    if (offline) return backend("policy");
    const std::string key = "iteration:" + std::to_string(iteration);
    auto it = backend_cache_.find(key);
    if (it != backend_cache_.end()) return *it->second;
    const auto& specs = config_.iteration_policies;
    if (iteration > static_cast<int>(specs.size())) {
      throw ConfigError("no iteration policy backend configured for iteration " +
                        std::to_string(iteration));
    }
    auto made = make_backend(specs[static_cast<std::size_t>(iteration - 1)],
                             config_.timeout_ms);
    Backend& ref = *made;
    backend_cache_[key] = std::move(made);
    return ref;
  };

  if (base == "sample") {
    def.upstream = {offline ? "filter" : "split"};
    def.inputs = {{"instructions", instructions_path}};
    Json backend_fp;
    if (offline) {
      backend_fp = backend_fingerprint_for_role(config_, "policy");
    } else {
      const auto& specs = config_.iteration_policies;
      if (iteration > static_cast<int>(specs.size())) {
        throw ConfigError(
            "no iteration policy backend configured for iteration " +
            std::to_string(iteration));
      }
      backend_fp = specs[static_cast<std::size_t>(iteration - 1)].fingerprint();
    }
    def.outputs = {{"samples", out_path("samples")},
                   {"quarantine", out_path("quarantine")}};
    def.fingerprint = {{"backend", backend_fp},
                       {"k", config_.k_responses},
                       {"batched", config_.batched_response_samples},
                       {"seed", stage_seed(config_.seed, def.name)}};
    def.run = [this, instructions_path, out_path, policy_backend, def_name = def.name] {
      std::vector<Instruction> instructions =
          load_instructions(instructions_path.string());
      SamplerOptions options;
      options.k = config_.k_responses;
      options.batched = config_.batched_response_samples;
      options.seed = stage_seed(config_.seed, def_name);
      options.workers = config_.concurrency;
      SampleResult sampled =
          sample_all(instructions, *gateway_, policy_backend(), options);
      save_samples(out_path("samples"), sampled.samples);
      std::vector<Json> quarantine;
      for (const SampleQuarantine& q : sampled.quarantined) {
        quarantine.push_back(q.to_json());
      }
      write_jsonl(out_path("quarantine"), quarantine);
      std::int64_t in = static_cast<std::int64_t>(instructions.size());
      std::int64_t quarantined =
          static_cast<std::int64_t>(sampled.quarantined.size());
      return std::map<std::string, std::int64_t>{
          {"in", in},
          {"out", in - quarantined},
          {"samples", static_cast<std::int64_t>(sampled.samples.size())},
          {"quarantined", quarantined}};
    };
    return def;
  }

  if (base == "reward") {
    def.upstream = {sample_stage};
    def.inputs = {{"samples", samples_path},
                  {"instructions", instructions_path},
                  {"selected", stage_output("select", "selected")}};
    if (!config_.rubric.empty()) {
      def.inputs.emplace_back("rubric", config_.rubric);
    }
    def.outputs = {{"scores", out_path("scores")},
                   {"quarantine", out_path("quarantine")}};
    def.fingerprint = {
        {"backend", backend_fingerprint_for_role(config_, "reward")},
        {"n", config_.n_judge},
        {"batched", config_.batched_judge_samples},
        {"with_reference", config_.with_reference},
        {"aggregator", config_.aggregator},
        {"reference_char_budget", config_.reference_char_budget},
        {"rubric", config_.rubric.empty() ? "default" : "file"},
        {"seed", stage_seed(config_.seed, def.name)}};
    def.run = [this, samples_path, instructions_path, out_path,
               def_name = def.name] {
      std::vector<ResponseSample> samples = load_samples(samples_path.string());
      std::vector<Instruction> instructions =
          load_instructions(instructions_path.string());
      std::vector<UgcDocument> docs =
          load_docs_strict(stage_output("select", "selected").string());
      RewardOptions options;
      options.n = config_.n_judge;
      options.batched = config_.batched_judge_samples;
      options.with_reference = config_.with_reference;
      options.aggregator = config_.aggregator == "mode" ? Aggregator::kMode
                                                        : Aggregator::kMean;
      options.reference_char_budget = config_.reference_char_budget;
      options.seed = stage_seed(config_.seed, def_name);
      options.workers = config_.concurrency;
      ScoreTable table = score_all(samples, instructions, docs, rubric(),
                                   *gateway_, backend("reward"), options);
      save_scores(out_path("scores"), table.scores);
      std::vector<Json> quarantine;
      for (const RewardQuarantine& q : table.quarantined) {
        quarantine.push_back(q.to_json());
      }
      write_jsonl(out_path("quarantine"), quarantine);
      return std::map<std::string, std::int64_t>{
          {"in", static_cast<std::int64_t>(samples.size())},
          {"out", static_cast<std::int64_t>(table.scores.size())},
          {"quarantined", static_cast<std::int64_t>(table.quarantined.size())},
          {"references_truncated",
           static_cast<std::int64_t>(table.references_truncated)}};
    };
    return def;
  }

  // pairs
  def.upstream = {reward_stage};
  def.inputs = {{"instructions", instructions_path},
                {"samples", samples_path},
                {"scores", scores_path}};
  def.outputs = {{"pairs", out_path("pairs")},
                 {"discards", out_path("discards")}};
  def.fingerprint = Json::object();
  def.run = [this, instructions_path, samples_path, scores_path, out_path] {
    std::vector<Instruction> instructions =
        load_instructions(instructions_path.string());
    std::vector<ResponseSample> samples = load_samples(samples_path.string());
    std::vector<AggregateScore> scores = load_scores(scores_path.string());
    PairSet set = build_all(instructions, samples, scores);
    export_pairs(set.pairs, out_path("pairs"));
    std::vector<Json> discards;
    for (const PairDiscard& d : set.discards) {
      discards.push_back(d.to_json());
    }
    write_jsonl(out_path("discards"), discards);
    return std::map<std::string, std::int64_t>{
        {"in", static_cast<std::int64_t>(instructions.size())},
        {"out", static_cast<std::int64_t>(set.pairs.size())},
        {"discarded", static_cast<std::int64_t>(set.discards.size())}};
  };
  return def;
}

StageManifest Pipeline::run_stage_def(const StageDef& def) {
  for (const std::string& upstream : def.upstream) {
    require_complete(upstream);
  }

  StageManifest manifest;
  manifest.stage = def.name;
  for (const auto& [label, path] : def.inputs) {
    if (!fs::exists(path)) {
      throw StageError("stage \"" + def.name + "\" input \"" + label +
                       "\" missing: " + path.string());
    }
    manifest.input_digests[label] = file_digest(path.string());
  }
  manifest.config_digest = to_hex(fnv1a64(def.fingerprint.dump()));

  if (auto existing = load_manifest(def.name)) {
    if (existing->status == "complete" &&
        existing->input_digests == manifest.input_digests &&
        existing->config_digest == manifest.config_digest) {
      bool outputs_present = true;
      for (const auto& [label, path] : def.outputs) {
        if (!fs::exists(path)) outputs_present = false;
      }
      if (outputs_present) {
        return *existing;  // resume: skip, manifest untouched
      }
    }
  }

  manifest.status = "partial";
  atomic_write_file(manifest_path(def.name), manifest.to_json().dump(2) + "\n");

  manifest.counts = def.run();

  for (const auto& [label, path] : def.outputs) {
    manifest.output_digests[label] = file_digest(path.string());
  }
  manifest.status = "complete";
  atomic_write_file(manifest_path(def.name), manifest.to_json().dump(2) + "\n");
  return manifest;
}

StageManifest Pipeline::run_stage(const std::string& name) {
  return run_stage_def(stage_def(name));
}

RunSummary Pipeline::run_all() {
  config_.validate(true);
  RunSummary summary;
  for (const std::string& name : kStageOrder) {
    summary.stages.push_back(run_stage(name));
  }
  check_conservation(summary);
  atomic_write_file(config_.workspace / "summary.json",
                    summary.to_json().dump(2) + "\n");
  return summary;
}

std::vector<std::pair<std::string, bool>> Pipeline::plan() {
  std::vector<std::pair<std::string, bool>> out;
  for (const std::string& name : kStageOrder) {
    StageDef def = stage_def(name);
    bool would_run = true;
    auto existing = load_manifest(name);
    if (existing && existing->status == "complete") {
      bool inputs_ready = true;
      std::map<std::string, std::string> digests;
      for (const auto& [label, path] : def.inputs) {
        if (!fs::exists(path)) {
          inputs_ready = false;
          break;
        }
        digests[label] = file_digest(path.string());
      }
      if (inputs_ready && digests == existing->input_digests &&
          to_hex(fnv1a64(def.fingerprint.dump())) == existing->config_digest) {
        would_run = false;
      }
    }
    out.emplace_back(name, would_run);
  }
  return out;
}

std::vector<fs::path> Pipeline::run_iterative(
    int m, const std::function<bool(int)>& confirm) {
  if (m < 1) {
    throw ConfigError("iteration count must be >= 1");
  }
  if (static_cast<int>(config_.iteration_policies.size()) < m) {
    throw ConfigError("iterative mode needs " + std::to_string(m) +
                      " iteration policy backends, got " +
                      std::to_string(config_.iteration_policies.size()));
  }

  // shared head of the funnel
  for (const char* name : {"corpus", "quality", "select", "instructions",
                           "filter"}) {
    run_stage(name);
  }

  // split stage: m disjoint instruction subsets
  {
    StageDef def;
    def.name = "split";
    def.upstream = {"filter"};
    def.inputs = {{"retained", stage_output("filter", "retained")}};
    for (int i = 1; i <= m; ++i) {
      def.outputs.emplace_back(
          "subset" + std::to_string(i),
          config_.workspace / "split" /
              ("subset" + std::to_string(i) + ".jsonl"));
    }
    def.fingerprint = {{"m", m}, {"seed", stage_seed(config_.seed, "split")}};
    def.run = [this, m] {
      std::vector<Instruction> retained =
          load_instructions(stage_output("filter", "retained").string());
      std::vector<std::string> ids;
      ids.reserve(retained.size());
      for (const Instruction& inst : retained) ids.push_back(inst.id);
      std::vector<std::vector<std::string>> subsets =
          split_iterations(ids, m, stage_seed(config_.seed, "split"));
      std::map<std::string, const Instruction*> by_id;
      for (const Instruction& inst : retained) by_id[inst.id] = &inst;
      for (int i = 1; i <= m; ++i) {
        std::vector<Instruction> subset;
        for (const std::string& id : subsets[static_cast<std::size_t>(i - 1)]) {
          subset.push_back(*by_id.at(id));
        }
        save_instructions(config_.workspace / "split" /
                              ("subset" + std::to_string(i) + ".jsonl"),
                          subset);
      }
      return std::map<std::string, std::int64_t>{
          {"in", static_cast<std::int64_t>(retained.size())},
          {"out", static_cast<std::int64_t>(retained.size())},
          {"subsets", m}};
    };
    run_stage_def(def);
  }

  std::vector<fs::path> pairs_files;
  for (int i = 1; i <= m; ++i) {
    if (i > 1 && !confirm(i)) {
      break;  // operator declined to continue
    }
    run_stage_def(iteration_stage_def("sample", i, {}));
    run_stage_def(iteration_stage_def("reward", i, {}));
    run_stage_def(iteration_stage_def("pairs", i, {}));
    pairs_files.push_back(config_.workspace / "iterations" /
                          ("iter" + std::to_string(i)) / "pairs" /
                          "pairs.jsonl");
  }
  return pairs_files;
}

// ---------------------------------------------------------------------------
// Reward-agreement protocol

Json EvalItem::to_json() const {
  Json j;
  j["item_id"] = item_id;
  j["instruction"] = instruction;
  j["response_a"] = resp_a;
  j["response_b"] = resp_b;
  j["reference"] = reference;
  return j;
}

EvalItem EvalItem::from_json(const Json& j) {
  EvalItem item;
  item.item_id = j.at("item_id").get<std::string>();
  item.instruction = j.at("instruction").get<std::string>();
  item.resp_a = j.at("response_a").get<std::string>();
  item.resp_b = j.at("response_b").get<std::string>();
  item.reference = j.value("reference", "");
  return item;
}

std::vector<EvalItem> load_eval_items(const std::string& path) {
  std::vector<EvalItem> items;
  for (const Json& j : read_jsonl(path)) {
    items.push_back(EvalItem::from_json(j));
  }
  return items;
}

AgreementRun run_reward_agreement(const std::vector<EvalItem>& items,
                                  Gateway& gateway, Backend& gold_judge,
                                  Backend& reward_judge,
                                  const RewardRubric& rubric,
                                  const AgreementRunOptions& options) {
  struct PerItem {
    PairJudgment gold;
    AggregateScore with_ref_a, with_ref_b, no_ref_a, no_ref_b;
  };

  RewardOptions reward_options;
  reward_options.n = options.n;
  reward_options.batched = options.batched;
  reward_options.aggregator = options.aggregator;
  reward_options.seed = options.seed;

  auto score_arm = [&](const EvalItem& item, int index, bool with_reference) {
    ResponseSample sample;
    sample.instruction_id = item.item_id;
    sample.index = index;
    sample.text = index == 0 ? item.resp_a : item.resp_b;
    sample.length_chars = count_scalars(sample.text);
    std::optional<std::string> reference;
    if (with_reference) reference = item.reference;
    RewardQuarantine quarantine;
    auto score = score_response(item.instruction, sample, reference, rubric,
                                gateway, reward_judge, reward_options,
                                &quarantine);
    if (!score) {
      throw StageError("reward scoring failed for item " + item.item_id + ": " +
                       quarantine.reason);
    }
    return *score;
  };

  std::vector<PerItem> rows = parallel_map<PerItem>(
      items.size(), options.workers, [&](std::size_t i) -> PerItem {
        const EvalItem& item = items[i];
        PerItem row;
        row.gold = judge_pair_debiased(gateway, gold_judge, item.item_id,
                                       item.instruction, item.resp_a,
                                       item.resp_b);
        row.with_ref_a = score_arm(item, 0, true);
        row.with_ref_b = score_arm(item, 1, true);
        row.no_ref_a = score_arm(item, 0, false);
        row.no_ref_b = score_arm(item, 1, false);
        return row;
      });

  AgreementRun run;
  for (PerItem& row : rows) {
    run.gold.push_back(std::move(row.gold));
    run.with_ref_a.push_back(std::move(row.with_ref_a));
    run.with_ref_b.push_back(std::move(row.with_ref_b));
    run.no_ref_a.push_back(std::move(row.no_ref_a));
    run.no_ref_b.push_back(std::move(row.no_ref_b));
  }

  for (int n_prime : options.n_sweep) {
    run.reports.emplace_back(
        "with_reference", n_prime,
        compare_reward_to_gold(run.with_ref_a, run.with_ref_b, run.gold,
                               options.tie_epsilon, n_prime));
    run.reports.emplace_back(
        "without_reference", n_prime,
        compare_reward_to_gold(run.no_ref_a, run.no_ref_b, run.gold,
                               options.tie_epsilon, n_prime));
  }
  return run;
}

}  // namespace pairforge
