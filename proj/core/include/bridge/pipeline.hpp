#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bridge/config.hpp"

namespace bridge {

struct StageOutcome {
  std::string stage;
  bool skipped = false;  // completed earlier with matching hashes
  std::vector<std::filesystem::path> artifacts;
  double seconds = 0.0;
};

struct PipelineResult {
  std::string run_id;
  std::filesystem::path dir;
  std::vector<StageOutcome> stages;
};

// Stage artifact layout inside config.output_dir:
//   pair/{encoder,decoder,pair}.json   pretrain
//   pretrain_loss.csv                  pretrain
//   latent.csv, score.json,            train-score
//   score_manifest.json
//   generated.csv, sample_manifest.json  sample
//   reference.csv, metrics.csv         eval / pipeline
//   plot_w2_vs_T.csv, run_manifest.json  pipeline
// Completed stages are recorded in stage_<name>.json and skipped on
// rerun when the run id and artifact hashes still match (unless force).

StageOutcome cmd_pretrain(const RunConfig& config, bool force = false);

StageOutcome cmd_train_score(const RunConfig& config, bool oracle_score = false,
                             bool force = false);

StageOutcome cmd_sample(const RunConfig& config, bool oracle_score = false,
                        bool force = false);

/// Writes w2_exact (equal sizes under the cap), w2_sliced and summary
/// diagnostics to the ledger. A non-empty label suffixes the stage and
/// metric names (the pipeline uses "init" for the decoded q(sigma, .)
/// initialization batch).
StageOutcome cmd_eval(const RunConfig& config, const std::filesystem::path& generated,
                      const std::filesystem::path& reference, bool force = false,
                      const std::string& label = "");

/// pretrain -> train-score -> sample -> eval, plus the W2-vs-T sweep
/// when [sweep] T_values is configured. Writes run_manifest.json.
PipelineResult cmd_pipeline(const RunConfig& config, bool oracle_score = false,
                            bool force = false);

}  // namespace bridge
