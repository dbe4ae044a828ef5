#include "bridge/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "bridge/hash.hpp"
#include "bridge/metrics.hpp"
#include "bridge/pretrain.hpp"
#include "bridge/sampler.hpp"
#include "bridge/score.hpp"

namespace bridge {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Stream indices fanning the run seed out to the independent
// randomness consumers of each stage.
constexpr std::uint64_t kStreamTarget = 10;
constexpr std::uint64_t kStreamPretrain = 11;
constexpr std::uint64_t kStreamReference = 12;
constexpr std::uint64_t kStreamScoreEval = 13;
constexpr std::uint64_t kStreamChains = 14;
constexpr std::uint64_t kStreamSliced = 15;
constexpr std::uint64_t kStreamHeldout = 16;
constexpr std::uint64_t kStreamSweep = 20;

constexpr int kEvalTimeGrid = 32;
constexpr int kEvalPointsPerTime = 64;
constexpr int kSlicedProjections = 128;

class StageTimer {
 public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

fs::path stage_state_path(const fs::path& dir, const std::string& stage) {
  return dir / ("stage_" + stage + ".json");
}

fs::path resolve(const fs::path& dir, const std::string& stored) {
  const fs::path p(stored);
  return p.is_absolute() ? p : dir / p;
}

bool stage_done(const fs::path& dir, const std::string& stage, const std::string& run_id,
                const std::string& variant = "") {
  const fs::path state = stage_state_path(dir, stage);
  if (!fs::exists(state)) return false;
  try {
    std::ifstream in(state);
    const json doc = json::parse(in);
    if (doc.at("run_id").get<std::string>() != run_id) return false;
    if (doc.value("variant", "") != variant) return false;
    for (const auto& [path, hash] : doc.at("artifacts").items()) {
      const fs::path full = resolve(dir, path);
      if (!fs::exists(full) || file_hash(full) != hash.get<std::string>()) return false;
    }
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

void record_stage(const fs::path& dir, const std::string& stage, const std::string& run_id,
                  const std::vector<fs::path>& artifacts, const std::string& variant = "") {
  json doc;
  doc["run_id"] = run_id;
  if (!variant.empty()) doc["variant"] = variant;
  json entries = json::object();
  for (const auto& p : artifacts) {
    const fs::path full = resolve(dir, p.string());
    entries[p.string()] = file_hash(full);
  }
  doc["artifacts"] = entries;
  std::ofstream out(stage_state_path(dir, stage));
  if (!out) throw IoError("cannot write stage state for " + stage);
  out << doc.dump(2) << "\n";
}

StageOutcome skipped_outcome(const std::string& stage, const fs::path& dir,
                             const std::vector<fs::path>& artifacts) {
  StageOutcome out;
  out.stage = stage;
  out.skipped = true;
  for (const auto& p : artifacts) out.artifacts.push_back(resolve(dir, p.string()));
  return out;
}

fs::path prepare_dir(const RunConfig& config) {
  const fs::path dir(config.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output_dir " + dir.string() + ": " + ec.message());
  return dir;
}

void write_loss_history(const EncoderDecoderPair& pair, const fs::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw IoError("cannot write " + path.string());
  std::fputs("epoch,loss\n", f);
  for (const auto& [epoch, loss] : pair.loss_history) {
    std::fprintf(f, "%d,%.17g\n", epoch, loss);
  }
  std::fclose(f);
}

EncoderDecoderPair load_matching_pair(const RunConfig& config, const fs::path& dir) {
  const EncoderDecoderPair pair = load_pair(dir / "pair");
  if (pair.ambient_dim() != config.d || pair.latent_dim() != config.d_star) {
    throw ValidationError("stored pair dims do not match config (d=" +
                          std::to_string(pair.ambient_dim()) +
                          ", d_star=" + std::to_string(pair.latent_dim()) + ")");
  }
  return pair;
}

json read_score_manifest(const fs::path& dir) {
  std::ifstream in(dir / "score_manifest.json");
  if (!in) throw IoError("missing score_manifest.json; run train-score first");
  return json::parse(in);
}

// Score callable plus its content identity for the sample manifest.
std::pair<ScoreFn, std::string> load_score_fn(const RunConfig& config, const fs::path& dir,
                                              bool oracle_score,
                                              const Eigen::MatrixXd& latent_points) {
  if (oracle_score) {
    return {oracle_score_fn(ConvolutionDensity{latent_points, config.sigma}), "oracle"};
  }
  const json manifest = read_score_manifest(dir);
  if (manifest.at("mode").get<std::string>() == "oracle") {
    return {oracle_score_fn(ConvolutionDensity{latent_points, config.sigma}), "oracle"};
  }
  ScoreModel model;
  model.net = load_mlp(dir / "score.json");
  model.sigma = manifest.at("sigma").get<double>();
  model.horizon = manifest.at("T").get<double>();
  model.n = latent_points.rows();
  model.validate();
  return {model.fn(), file_hash(dir / "score.json")};
}

ScoreFn zero_score_fn(int d_star) {
  return [d_star](double, const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(d_star); };
}

std::string format_t(double t) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

}  // namespace

StageOutcome cmd_pretrain(const RunConfig& config, bool force) {
  config.validate();
  const StageTimer timer;
  const fs::path dir = prepare_dir(config);
  const std::string run_id = config.run_id();
  const std::vector<fs::path> artifacts = {"pair/encoder.json", "pair/decoder.json",
                                           "pair/pair.json", "pretrain_loss.csv"};
  if (!force && stage_done(dir, "pretrain", run_id)) {
    return skipped_outcome("pretrain", dir, artifacts);
  }

  const TargetSpec spec = config.target_spec();
  const SampleBatch data = sample_pretrain(spec, ShiftSpec{config.shift}, config.pretrain_m,
                                           derive_seed(config.seed, kStreamPretrain));
  PretrainOptions options;
  options.epochs = config.epochs;
  options.batch_size = config.pretrain_batch;
  options.adam.lr = config.pretrain_lr;
  options.seed = config.seed;
  const EncoderDecoderPair pair =
      pretrain(config.encoder_dims(), config.decoder_dims(), data, options);

  save_pair(pair, dir / "pair");
  write_loss_history(pair, dir / "pretrain_loss.csv");

  MetricsLedger ledger(dir / "metrics.csv");
  ledger.append(run_id, "pretrain", "final_reconstruction_loss", pair.final_loss(),
                config.pretrain_m, config.seed);
  ledger.append(run_id, "pretrain", "gamma_E_hat", pair.gamma_e_hat, config.pretrain_m,
                config.seed);
  ledger.append(run_id, "pretrain", "gamma_D_hat", pair.gamma_d_hat, config.pretrain_m,
                config.seed);
  ledger.append(run_id, "pretrain", "latent_violation_fraction",
                latent_support_violation_fraction(pair, data), config.pretrain_m, config.seed);

  record_stage(dir, "pretrain", run_id, artifacts);
  StageOutcome out;
  out.stage = "pretrain";
  for (const auto& p : artifacts) out.artifacts.push_back(dir / p);
  out.seconds = timer.seconds();
  return out;
}

StageOutcome cmd_train_score(const RunConfig& config, bool oracle_score, bool force) {
  config.validate();
  const StageTimer timer;
  const fs::path dir = prepare_dir(config);
  const std::string run_id = config.run_id();
  const std::string variant = oracle_score ? "oracle" : "model";
  std::vector<fs::path> artifacts = {"latent.csv", "score_manifest.json"};
  if (!oracle_score) artifacts.emplace_back("score.json");
  if (!force && stage_done(dir, "train_score", run_id, variant)) {
    return skipped_outcome("train_score", dir, artifacts);
  }

  const EncoderDecoderPair pair = load_matching_pair(config, dir);
  const TargetSpec spec = config.target_spec();
  const SampleBatch target =
      sample_target(spec, config.n, derive_seed(config.seed, kStreamTarget));
  const SampleBatch latent = encode_batch(pair, target);
  export_csv(latent, dir / "latent.csv");

  const double T = config.stop_time();
  const ConvolutionDensity cd{latent.points, config.sigma};
  MetricsLedger ledger(dir / "metrics.csv");

  json manifest;
  manifest["sigma"] = config.sigma;
  manifest["T"] = T;
  manifest["n"] = config.n;
  manifest["seed"] = config.seed;

  if (oracle_score) {
    manifest["mode"] = "oracle";
    manifest["final_dsm_loss"] = 0.0;
    // The analytic oracle is the exact score of q; its L2 error is 0 by
    // definition, no Monte-Carlo needed.
    ledger.append(run_id, "train_score", "score_l2_error", 0.0, config.n, config.seed);
  } else {
    ScoreTrainOptions options;
    options.steps = config.score_steps;
    options.time_batch = config.time_batch;
    options.point_batch = config.point_batch;
    options.adam.lr = config.score_lr;
    options.seed = config.seed;
    const ScoreModel model = train_score(latent, config.score_dims(), config.sigma, T, options);
    save_mlp(model.net, dir / "score.json");
    manifest["mode"] = "model";
    manifest["final_dsm_loss"] = model.final_dsm_loss;
    manifest["time_convention"] = ScoreModel::kTimeConvention;
    manifest["sparsity"] = parameter_sparsity(model.net);
    manifest["weight_bound"] = weight_bound(model.net);

    const std::vector<double> grid = uniform_time_grid(T, kEvalTimeGrid);
    const std::uint64_t eval_seed = derive_seed(config.seed, kStreamScoreEval);
    const double err = score_l2_error(model.fn(), cd, grid, kEvalPointsPerTime, eval_seed);
    const double err_zero =
        score_l2_error(zero_score_fn(config.d_star), cd, grid, kEvalPointsPerTime, eval_seed);
    ledger.append(run_id, "train_score", "score_l2_error", err, config.n, config.seed);
    ledger.append(run_id, "train_score", "score_l2_error_zero", err_zero, config.n, config.seed);
    ledger.append(run_id, "train_score", "final_dsm_loss", model.final_dsm_loss, config.n,
                  config.seed);
  }

  std::ofstream mout(dir / "score_manifest.json");
  if (!mout) throw IoError("cannot write score_manifest.json");
  mout << manifest.dump(2) << "\n";
  mout.close();

  record_stage(dir, "train_score", run_id, artifacts, variant);
  StageOutcome out;
  out.stage = "train_score";
  for (const auto& p : artifacts) out.artifacts.push_back(dir / p);
  out.seconds = timer.seconds();
  return out;
}

StageOutcome cmd_sample(const RunConfig& config, bool oracle_score, bool force) {
  config.validate();
  const StageTimer timer;
  const fs::path dir = prepare_dir(config);
  const std::string run_id = config.run_id();
  const std::string variant = oracle_score ? "oracle" : "model";
  const std::vector<fs::path> artifacts = {"generated.csv", "init_decoded.csv",
                                           "sample_manifest.json"};
  if (!force && stage_done(dir, "sample", run_id, variant)) {
    return skipped_outcome("sample", dir, artifacts);
  }

  const EncoderDecoderPair pair = load_matching_pair(config, dir);
  const SampleBatch latent = import_csv(dir / "latent.csv");
  if (latent.dim_tag != DimTag::Latent || latent.dim() != config.d_star) {
    throw ValidationError("latent.csv does not match config dims");
  }
  auto [score, model_hash] = load_score_fn(config, dir, oracle_score, latent.points);
  const DiffusionSchedule schedule = config.make_schedule();
  if (schedule.step_warning) {
    std::fprintf(stderr,
                 "warning [sample]: step size T/K = %.3g exceeds the derived target %.3g\n",
                 schedule.dt(), schedule.step_size_target);
  }

  // Chains start from the training latent points unless the held-out
  // memorization diagnostic is requested; the score stays tied to the
  // training set either way.
  Eigen::MatrixXd init_points = latent.points;
  if (config.init_from_heldout) {
    const SampleBatch heldout = sample_target(config.target_spec(), config.n,
                                              derive_seed(config.seed, kStreamHeldout));
    init_points = encode_batch(pair, heldout).points;
  }
  const std::uint64_t chain_seed = derive_seed(config.seed, kStreamChains);
  const SampleBatch generated =
      generate(pair, init_points, score, schedule, config.chains, chain_seed);
  export_csv(generated, dir / "generated.csv");

  // Decoded q(sigma, .) draws from the same chain streams, the baseline
  // the bridge is supposed to improve on.
  SampleBatch init_decoded =
      initialization_batch(init_points, schedule.sigma, config.chains, chain_seed);
  init_decoded.points =
      forward_batch(pair.decoder, init_decoded.points.transpose()).transpose();
  init_decoded.dim_tag = DimTag::Ambient;
  export_csv(init_decoded, dir / "init_decoded.csv");

  json manifest;
  manifest["sigma"] = schedule.sigma;
  manifest["K"] = schedule.steps;
  manifest["T"] = schedule.stop_time;
  manifest["L"] = schedule.truncation;
  manifest["R"] = schedule.resolution;
  manifest["C_T"] = schedule.c_t;
  manifest["beta"] = schedule.beta;
  manifest["step_size_target"] = schedule.step_size_target;
  manifest["step_warning"] = schedule.step_warning;
  manifest["noise_scale"] = schedule.noise_scale == NoiseScale::Em ? "em" : "algorithm1";
  manifest["init_from"] = config.init_from_heldout ? "heldout" : "training";
  manifest["seed"] = config.seed;
  manifest["count"] = config.chains;
  manifest["model_hash"] = model_hash;
  std::ofstream mout(dir / "sample_manifest.json");
  if (!mout) throw IoError("cannot write sample_manifest.json");
  mout << manifest.dump(2) << "\n";
  mout.close();

  record_stage(dir, "sample", run_id, artifacts, variant);
  StageOutcome out;
  out.stage = "sample";
  for (const auto& p : artifacts) out.artifacts.push_back(dir / p);
  out.seconds = timer.seconds();
  return out;
}

StageOutcome cmd_eval(const RunConfig& config, const std::filesystem::path& generated,
                      const std::filesystem::path& reference, bool force,
                      const std::string& label) {
  config.validate();
  const StageTimer timer;
  const fs::path dir = prepare_dir(config);
  const std::string run_id = config.run_id();
  const std::string stage = label.empty() ? "eval" : "eval_" + label;
  const std::string suffix = label.empty() ? "" : "_" + label;
  // Input paths are stored absolute so stage-state resolution does not
  // re-anchor them to the output directory.
  const std::vector<fs::path> inputs = {fs::absolute(generated), fs::absolute(reference)};
  if (!force && stage_done(dir, stage, run_id)) {
    return skipped_outcome(stage, dir, inputs);
  }

  const SampleBatch gen = import_csv(generated);
  const SampleBatch ref = import_csv(reference);
  if (gen.dim() != ref.dim()) {
    throw ValidationError("eval: generated and reference dimensions differ");
  }
  if (gen.rows() == 0 || ref.rows() == 0) throw ValidationError("eval: empty batch");

  // Exact W2 needs equal sizes; compare the leading min(nA, nB) rows
  // (rows are exchangeable draws in both files).
  const Eigen::Index k = std::min(gen.rows(), ref.rows());
  const Eigen::MatrixXd a = gen.points.topRows(k);
  const Eigen::MatrixXd b = ref.points.topRows(k);

  MetricsLedger ledger(dir / "metrics.csv");
  if (k <= kW2ExactCap) {
    ledger.append(run_id, stage, "w2_exact" + suffix, w2_exact(a, b), k, config.seed);
  }
  ledger.append(run_id, stage, "w2_sliced" + suffix,
                w2_sliced(a, b, kSlicedProjections, derive_seed(config.seed, kStreamSliced)), k,
                config.seed);
  const BatchSummary gen_summary = summary(gen);
  ledger.append(run_id, stage, "gen_max_inf_norm" + suffix, gen_summary.max_inf_norm,
                gen.rows(), config.seed);
  ledger.append(run_id, stage, "gen_support_violations" + suffix,
                static_cast<double>(gen_summary.support_violations), gen.rows(), config.seed);

  record_stage(dir, stage, run_id, inputs);
  StageOutcome out;
  out.stage = stage;
  for (const auto& p : inputs) out.artifacts.push_back(resolve(dir, p.string()));
  out.seconds = timer.seconds();
  return out;
}

PipelineResult cmd_pipeline(const RunConfig& config, bool oracle_score, bool force) {
  config.validate();
  const fs::path dir = prepare_dir(config);
  PipelineResult result;
  result.run_id = config.run_id();
  result.dir = dir;

  result.stages.push_back(cmd_pretrain(config, force));
  result.stages.push_back(cmd_train_score(config, oracle_score, force));
  result.stages.push_back(cmd_sample(config, oracle_score, force));

  if (config.eval_count >= 1 && config.chains >= 1) {
    const SampleBatch reference =
        sample_target(config.target_spec(), config.eval_count,
                      derive_seed(config.seed, kStreamReference));
    export_csv(reference, dir / "reference.csv");
    result.stages.push_back(cmd_eval(config, dir / "generated.csv", dir / "reference.csv", force));
    result.stages.push_back(cmd_eval(config, dir / "init_decoded.csv", dir / "reference.csv",
                                     force, "init"));
  }

  if (!config.sweep_stop_times.empty()) {
    const StageTimer timer;
    const SampleBatch latent = import_csv(dir / "latent.csv");
    auto [score, model_hash] = load_score_fn(config, dir, oracle_score, latent.points);
    MetricsLedger ledger(dir / "metrics.csv");

    std::FILE* plot = std::fopen((dir / "plot_w2_vs_T.csv").string().c_str(), "w");
    if (!plot) throw IoError("cannot write plot_w2_vs_T.csv");
    std::fputs("T,w2,chains,seed\n", plot);
    for (std::size_t i = 0; i < config.sweep_stop_times.size(); ++i) {
      const double t_stop = config.sweep_stop_times[i];
      DiffusionSchedule schedule = config.make_schedule();
      schedule.stop_time = t_stop;
      const std::uint64_t sweep_seed = derive_seed(config.seed, kStreamSweep + i);
      SampleBatch endpoints =
          run_chains(latent.points, score, schedule, config.chains, sweep_seed);
      for (Eigen::Index c = 0; c < endpoints.rows(); ++c) {
        endpoints.points.row(c) =
            truncate(endpoints.points.row(c), schedule.truncation).transpose();
      }
      const Eigen::Index k = std::min(endpoints.rows(), latent.rows());
      const double w2 = k <= kW2ExactCap
                            ? w2_exact(endpoints.points.topRows(k), latent.points.topRows(k))
                            : w2_sliced(endpoints.points.topRows(k), latent.points.topRows(k),
                                        kSlicedProjections,
                                        derive_seed(config.seed, kStreamSliced));
      std::fprintf(plot, "%.17g,%.17g,%td,%llu\n", t_stop, w2,
                   static_cast<std::ptrdiff_t>(config.chains),
                   static_cast<unsigned long long>(sweep_seed));
      ledger.append(result.run_id, "sweep", "w2_T=" + format_t(t_stop), w2, config.chains,
                    config.seed);
    }
    std::fclose(plot);

    StageOutcome sweep_stage;
    sweep_stage.stage = "sweep";
    sweep_stage.artifacts.push_back(dir / "plot_w2_vs_T.csv");
    sweep_stage.seconds = timer.seconds();
    result.stages.push_back(sweep_stage);
  }

  json manifest;
  manifest["run_id"] = result.run_id;
  manifest["config"] = config.canonical();
  json stages = json::array();
  for (const auto& st : result.stages) {
    json entry;
    entry["stage"] = st.stage;
    entry["skipped"] = st.skipped;
    entry["seconds"] = st.seconds;
    json arts = json::object();
    for (const auto& p : st.artifacts) {
      if (fs::exists(p)) arts[p.string()] = file_hash(p);
    }
    entry["artifacts"] = arts;
    stages.push_back(entry);
  }
  manifest["stages"] = stages;
  std::ofstream mout(dir / "run_manifest.json");
  if (!mout) throw IoError("cannot write run_manifest.json");
  mout << manifest.dump(2) << "\n";
  return result;
}

}  // namespace bridge
