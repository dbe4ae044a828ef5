#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bridge/datagen.hpp"
#include "bridge/sampler.hpp"

namespace bridge {

/// Experiment-level configuration: one place for every pipeline knob.
/// Parsed strictly from a flat key=value file with [section] headers;
/// unknown sections or keys are errors.
struct RunConfig {
  // [run]
  std::uint64_t seed = 0;
  std::string output_dir = "out";

  // [target]
  TargetKind kind = TargetKind::UniformCube;
  int d = 2;
  int d_star = 2;
  Eigen::MatrixXd centers;  // k x d_star, empty for none
  double std_dev = 0.25;
  double shift = 0.0;
  std::uint64_t embedding_seed = 1;

  // [sizes]
  Eigen::Index n = 256;          // diffusion training sample size
  Eigen::Index pretrain_m = 256;  // pretraining sample size (M)
  Eigen::Index eval_count = 256;
  Eigen::Index chains = 256;

  // [pretrain]
  std::vector<int> encoder_hidden = {32};
  std::vector<int> decoder_hidden = {32};
  int epochs = 100;
  double pretrain_lr = 1e-3;
  int pretrain_batch = 32;

  // [score]
  std::vector<int> score_hidden = {64, 64};
  int score_steps = 1000;
  int time_batch = 16;
  int point_batch = 32;
  double score_lr = 1e-3;
  std::optional<double> stop_time_override;  // T

  // [schedule]
  double sigma = 1.0;
  int schedule_steps = 500;  // K
  std::optional<double> truncation;  // L, defaults to 4 (1 + sigma)
  double beta = 1.0;
  bool use_derived_schedule = false;
  NoiseScale noise_scale = NoiseScale::Em;
  // Chains start from the training latent points (the algorithm's
  // prescription); held-out initialization is a memorization diagnostic.
  bool init_from_heldout = false;

  // [sweep]
  std::vector<double> sweep_stop_times;

  static RunConfig parse(const std::string& text);

  /// Reads the file and applies the BRIDGEGEN_OUT environment override.
  static RunConfig load(const std::filesystem::path& path);

  void validate() const;

  TargetSpec target_spec() const;

  /// Schedule for sampling: derived from (n, d_star, beta) when
  /// use_derived_schedule is set, manual otherwise. An explicit T
  /// override always wins; manual schedules require one.
  DiffusionSchedule make_schedule() const;

  /// Training horizon T: the schedule's stop time.
  double stop_time() const;

  std::vector<int> encoder_dims() const;
  std::vector<int> decoder_dims() const;
  std::vector<int> score_dims() const;

  /// Fixed-order dump of every field; two configs are the same run iff
  /// their canonical forms match.
  std::string canonical() const;

  /// Content-addressed run identity: hash of the canonical form.
  std::string run_id() const;
};

}  // namespace bridge
