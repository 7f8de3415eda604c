// Command-line entry point: configuration, stage execution, resumable
// end-to-end and iterative runs, and the offline evaluation commands.

#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "pairforge/digest.hpp"
#include "pairforge/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

void print_manifest(const pairforge::StageManifest& manifest) {
  std::cout << "stage " << manifest.stage << ": " << manifest.status;
  for (const auto& [key, value] : manifest.counts) {
    std::cout << "  " << key << "=" << value;
  }
  std::cout << "\n";
}

int run_stages(pairforge::Pipeline& pipeline,
               const std::vector<std::string>& stages, bool dry_run) {
  if (dry_run) {
    auto plan = pipeline.plan();
    for (const auto& [stage, would_run] : plan) {
      bool wanted = std::find(stages.begin(), stages.end(), stage) !=
                    stages.end();
      if (wanted) {
        std::cout << "stage " << stage << ": "
                  << (would_run ? "would run" : "up to date") << "\n";
      }
    }
    return kExitOk;
  }
  for (const std::string& stage : stages) {
    print_manifest(pipeline.run_stage(stage));
  }
  return kExitOk;
}

int cmd_run_all(pairforge::Pipeline& pipeline, bool dry_run) {
  if (dry_run) {
    for (const auto& [stage, would_run] : pipeline.plan()) {
      std::cout << "stage " << stage << ": "
                << (would_run ? "would run" : "up to date") << "\n";
    }
    return kExitOk;
  }
  pairforge::RunSummary summary = pipeline.run_all();
  for (const pairforge::StageManifest& manifest : summary.stages) {
    print_manifest(manifest);
  }
  if (!summary.conservation_ok) {
    std::cerr << "conservation identities violated:\n";
    for (const std::string& failure : summary.conservation_failures) {
      std::cerr << "  " << failure << "\n";
    }
    return kExitStage;
  }
  std::cout << "pairs: "
            << pipeline.stage_output("pairs", "pairs").string() << "\n";
  return kExitOk;
}

int cmd_iterate(pairforge::Pipeline& pipeline, int m, bool yes) {
  auto confirm = [&](int iteration) {
    if (yes) return true;
    std::cout << "iteration " << iteration
              << ": deploy the retrained policy backend, then press enter to "
                 "continue (or type 'stop'): "
              << std::flush;
    std::string line;
    if (!std::getline(std::cin, line)) return false;
    return line != "stop";
  };
  auto files = pipeline.run_iterative(m, confirm);
  for (const auto& path : files) {
    std::cout << "pairs: " << path.string() << "\n";
  }
  return kExitOk;
}

int cmd_eval_agreement(pairforge::Pipeline& pipeline,
                       const std::string& items_path,
                       const std::string& out_dir) {
  namespace fs = std::filesystem;
  const pairforge::PipelineConfig& config = pipeline.config();
  for (const char* role : {"gold", "reward"}) {
    if (!config.backends.count(role)) {
      throw pairforge::ConfigError(std::string("backend role \"") + role +
                                   "\" is required for eval-agreement");
    }
  }
  auto items = pairforge::load_eval_items(items_path);

  pairforge::AgreementRunOptions options;
  options.n = config.n_judge;
  options.tie_epsilon = config.tie_epsilon;
  options.aggregator = config.aggregator == "mode"
                           ? pairforge::Aggregator::kMode
                           : pairforge::Aggregator::kMean;
  options.batched = config.batched_judge_samples;
  options.seed = pairforge::stage_seed(config.seed, "eval-agreement");
  options.workers = config.concurrency;
  options.n_sweep.clear();
  for (int n : {1, 3, 5, 8}) {
    if (n <= config.n_judge) options.n_sweep.push_back(n);
  }
  if (options.n_sweep.empty() ||
      options.n_sweep.back() != config.n_judge) {
    options.n_sweep.push_back(config.n_judge);
  }

  pairforge::AgreementRun run = pairforge::run_reward_agreement(
      items, pipeline.gateway(), pipeline.backend("gold"),
      pipeline.backend("reward"), pairforge::default_rubric(), options);

  fs::path out(out_dir);
  std::vector<pairforge::Json> gold;
  for (const auto& judgment : run.gold) gold.push_back(judgment.to_json());
  pairforge::write_jsonl(out / "gold.jsonl", gold);
  pairforge::save_scores(out / "scores_with_ref_a.jsonl", run.with_ref_a);
  pairforge::save_scores(out / "scores_with_ref_b.jsonl", run.with_ref_b);
  pairforge::save_scores(out / "scores_no_ref_a.jsonl", run.no_ref_a);
  pairforge::save_scores(out / "scores_no_ref_b.jsonl", run.no_ref_b);

  pairforge::Json report_json = pairforge::Json::array();
  std::vector<std::pair<std::string, pairforge::AgreementReport>> rows;
  for (const auto& [label, n_prime, report] : run.reports) {
    pairforge::Json entry;
    entry["configuration"] = label;
    entry["n"] = n_prime;
    entry["report"] = report.to_json();
    report_json.push_back(std::move(entry));
    rows.emplace_back(label + " N=" + std::to_string(n_prime), report);
  }
  pairforge::atomic_write_file(out / "reports.json",
                               report_json.dump(2) + "\n");
  std::string table = pairforge::agreement_report_table(rows);
  pairforge::atomic_write_file(out / "report.txt", table);
  std::cout << table;
  return kExitOk;
}

int cmd_score_dist(const std::string& scores_path, const std::string& out_csv,
                   int n) {
  auto scores = pairforge::load_scores(scores_path);
  pairforge::ScoreHistogram histogram = pairforge::score_distribution(scores, n);
  pairforge::atomic_write_file(out_csv, pairforge::histogram_to_csv(histogram));
  std::cout << "bins: " << histogram.bins.size() << "  mean: " << histogram.mean
            << "  variance: " << histogram.variance << "\n"
            << "csv: " << out_csv << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "pairforge: turn an unlabeled text corpus into preference-pair "
      "datasets via quality screening, instruction synthesis, relevance "
      "filtering, response sampling and reference-conditioned reward "
      "scoring"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("-c,--config", config_path, "pipeline config (JSON)")
      ->required();
  std::string workspace_override;
  app.add_option("--workspace", workspace_override,
                 "override the workspace directory");
  std::optional<std::uint64_t> seed_override;
  app.add_option("--seed", seed_override, "override the root seed");
  bool dry_run = false;
  app.add_flag("--dry-run", dry_run, "report what would run, change nothing");

  auto* validate_cmd =
      app.add_subcommand("validate-config", "check the config and exit");
  auto* quality_cmd = app.add_subcommand(
      "score-quality", "ingest the corpus, score UGC quality, select");
  auto* gen_cmd =
      app.add_subcommand("gen-instructions", "generate reader instructions");
  auto* filter_cmd =
      app.add_subcommand("filter", "relevance-filter the instructions");
  auto* sample_cmd =
      app.add_subcommand("sample", "sample K responses per instruction");
  auto* reward_cmd = app.add_subcommand(
      "reward", "score responses with the reference-conditioned judge");
  auto* pairs_cmd =
      app.add_subcommand("build-pairs", "build and export preference pairs");
  auto* run_all_cmd =
      app.add_subcommand("run-all", "run the whole pipeline in order");

  auto* iterate_cmd = app.add_subcommand(
      "iterate", "split instructions and run the sampling tail per iteration");
  int iterate_m = 0;
  iterate_cmd->add_option("-m,--iterations", iterate_m,
                          "number of iterations (default: config)");
  bool iterate_yes = false;
  iterate_cmd->add_flag("-y,--yes", iterate_yes,
                        "do not pause between iterations");

  auto* eval_cmd = app.add_subcommand(
      "eval-agreement",
      "gold-judge response pairs and measure reward agreement");
  std::string eval_items;
  eval_cmd->add_option("--items", eval_items, "eval items (JSONL)")->required();
  std::string eval_out = "eval";
  eval_cmd->add_option("--out", eval_out, "output directory");

  auto* dist_cmd = app.add_subcommand(
      "score-dist", "histogram of aggregate reward values (CSV)");
  std::string dist_scores;
  dist_cmd->add_option("--scores", dist_scores,
                       "score table (default: workspace reward output)");
  std::string dist_out = "score_distribution.csv";
  dist_cmd->add_option("--out", dist_out, "output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    pairforge::PipelineConfig config = pairforge::PipelineConfig::load(config_path);
    if (!workspace_override.empty()) {
      config.workspace = workspace_override;
    }
    if (seed_override) {
      config.seed = *seed_override;
    }

    if (validate_cmd->parsed()) {
      config.validate(true);
      std::cout << "config ok\n";
      return kExitOk;
    }

    pairforge::Pipeline pipeline(std::move(config));

    if (quality_cmd->parsed()) {
      pipeline.config().validate(true);
      return run_stages(pipeline, {"corpus", "quality", "select"}, dry_run);
    }
    if (gen_cmd->parsed()) {
      return run_stages(pipeline, {"instructions"}, dry_run);
    }
    if (filter_cmd->parsed()) {
      return run_stages(pipeline, {"filter"}, dry_run);
    }
    if (sample_cmd->parsed()) {
      return run_stages(pipeline, {"sample"}, dry_run);
    }
    if (reward_cmd->parsed()) {
      return run_stages(pipeline, {"reward"}, dry_run);
    }
    if (pairs_cmd->parsed()) {
      return run_stages(pipeline, {"pairs"}, dry_run);
    }
    if (run_all_cmd->parsed()) {
      return cmd_run_all(pipeline, dry_run);
    }
    if (iterate_cmd->parsed()) {
      int m = iterate_m > 0 ? iterate_m : pipeline.config().iterations;
      if (dry_run) {
        std::cout << "would run " << m << " iterations\n";
        return kExitOk;
      }
      return cmd_iterate(pipeline, m, iterate_yes);
    }
    if (eval_cmd->parsed()) {
      if (dry_run) {
        pairforge::load_eval_items(eval_items);
        std::cout << "items ok\n";
        return kExitOk;
      }
      return cmd_eval_agreement(pipeline, eval_items, eval_out);
    }
    if (dist_cmd->parsed()) {
      std::string scores = dist_scores.empty()
                               ? pipeline.stage_output("reward", "scores").string()
                               : dist_scores;
      return cmd_score_dist(scores, dist_out, pipeline.config().n_judge);
    }
    return kExitConfig;
  } catch (const pairforge::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitStage;
  }
}
