// bridgegen: config-driven latent Schrodinger-bridge diffusion pipeline.
//
// Subcommands mirror the pipeline stages; every stage reads the same
// config file and is a no-op when its outputs are already up to date.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bridge/config.hpp"
#include "bridge/pipeline.hpp"

namespace {

void report(const bridge::StageOutcome& outcome) {
  if (outcome.skipped) {
    std::printf("[%s] up to date, skipped\n", outcome.stage.c_str());
  } else {
    std::printf("[%s] done in %.2fs\n", outcome.stage.c_str(), outcome.seconds);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bridgegen: latent Schrodinger-bridge diffusion pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  bool force = false;
  bool oracle_score = false;
  std::optional<std::uint64_t> seed_override;
  std::string generated_path;
  std::string reference_path;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Run configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_flag("--force", force, "Re-run even when stage outputs are up to date");
    cmd->add_option("--seed", seed_override, "Override the config seed");
  };

  CLI::App* pretrain = app.add_subcommand("pretrain", "Train the encoder-decoder pair");
  add_common(pretrain);

  CLI::App* train_score =
      app.add_subcommand("train-score", "Encode target samples and fit the score network");
  add_common(train_score);
  train_score->add_flag("--oracle-score", oracle_score,
                        "Register the analytic mixture score instead of training");

  CLI::App* sample = app.add_subcommand("sample", "Run EM chains, truncate, decode");
  add_common(sample);
  sample->add_flag("--oracle-score", oracle_score, "Sample with the analytic mixture score");

  CLI::App* eval = app.add_subcommand("eval", "Wasserstein metrics for a generated batch");
  add_common(eval);
  eval->add_option("--generated", generated_path, "Generated batch CSV (default: <output_dir>/generated.csv)");
  eval->add_option("--reference", reference_path, "Reference batch CSV (default: <output_dir>/reference.csv)");

  CLI::App* pipeline = app.add_subcommand("pipeline", "Run all stages end to end");
  add_common(pipeline);
  pipeline->add_flag("--oracle-score", oracle_score, "Use the analytic mixture score throughout");

  CLI11_PARSE(app, argc, argv);

  std::string stage_tag = "config";
  try {
    bridge::RunConfig config = bridge::RunConfig::load(config_path);
    if (seed_override) config.seed = *seed_override;
    config.validate();

    if (pretrain->parsed()) {
      stage_tag = "pretrain";
      report(bridge::cmd_pretrain(config, force));
    } else if (train_score->parsed()) {
      stage_tag = "train-score";
      report(bridge::cmd_train_score(config, oracle_score, force));
    } else if (sample->parsed()) {
      stage_tag = "sample";
      report(bridge::cmd_sample(config, oracle_score, force));
    } else if (eval->parsed()) {
      stage_tag = "eval";
      const std::filesystem::path dir(config.output_dir);
      const std::filesystem::path gen =
          generated_path.empty() ? dir / "generated.csv" : std::filesystem::path(generated_path);
      const std::filesystem::path ref =
          reference_path.empty() ? dir / "reference.csv" : std::filesystem::path(reference_path);
      report(bridge::cmd_eval(config, gen, ref, force));
    } else if (pipeline->parsed()) {
      stage_tag = "pipeline";
      const bridge::PipelineResult result = bridge::cmd_pipeline(config, oracle_score, force);
      for (const auto& stage : result.stages) report(stage);
      std::printf("run %s complete: %s\n", result.run_id.c_str(), result.dir.string().c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error [%s]: %s\n", stage_tag.c_str(), e.what());
    return 1;
  }
  return 0;
}
