#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "bridge/pretrain.hpp"
#include "bridge/rng.hpp"
#include "bridge/score.hpp"

namespace bridge {

/// Brownian-increment convention for the EM update.
///
/// Em uses sigma * sqrt(dt) * eps, the consistent discretization of
/// sigma dw_t. Algorithm1 uses sigma / K * eps, which makes the noise
/// vanish at rate 1/K; it is kept behind this flag for comparison runs.
enum class NoiseScale { Em, Algorithm1 };

/// Integration window [0, T] with K uniform steps plus the derived
/// resolution quantities when the schedule comes from the n/beta rule.
struct DiffusionSchedule {
  double sigma = 1.0;
  int steps = 1;  // K
  double stop_time = 0.5;  // T in (0,1)
  double truncation = 8.0;  // L

  // Derived-schedule quantities (zero when manually constructed).
  int resolution = 0;       // R
  double c_t = 0.0;         // C_T = 2 beta
  double beta = 0.0;
  int d_star = 0;
  long long n = 0;
  double theoretical_m = 0.0;     // n^{(d* + 8 beta)/(d* + 2 beta)}
  double step_size_target = 0.0;  // n^{-6 beta/(d* + 2 beta)}
  bool step_warning = false;      // true iff T/K exceeds the target

  NoiseScale noise_scale = NoiseScale::Em;

  double dt() const { return stop_time / steps; }
  void validate() const;
};

/// Theorem-style schedule: R = floor(n^{1/(d*+2 beta)}) + 1, C_T = 2 beta,
/// T = 1 - R^{-C_T}. K and L stay user-chosen; the step-size target is
/// recorded and flagged (never enforced) when T/K exceeds it.
DiffusionSchedule derive_schedule(long long n, int d_star, double beta, double sigma,
                                  int K, double L);

/// Schedule with explicit T; derived fields stay zero.
DiffusionSchedule manual_schedule(double sigma, int K, double T, double L);

/// Default truncation level 4 * (1 + sigma), above the high-probability
/// envelope of the chain at desk scales.
double default_truncation_level(double sigma);

/// One Euler-Maruyama chain. The RNG stream is part of the state so a
/// chain is a pure function of (latent, schedule, seed).
struct ChainState {
  Eigen::VectorXd x;
  int step_index = 0;
  SplitMix64 rng;
};

/// x0 = y + sigma * eps with y drawn uniformly from the latent rows and
/// eps ~ N(0, I); exactly one draw from q(sigma, .) for the empirical
/// latent distribution.
ChainState init_chain(const Eigen::MatrixXd& latent, double sigma, std::uint64_t seed);

/// x_{i+1} = x_i + sigma^2 dt s(1 - t_i, x_i) + noise, t_i = i T / K.
void em_step(ChainState& state, const ScoreFn& score, const DiffusionSchedule& schedule);

/// init_chain followed by K em_steps; returns the pre-truncation endpoint.
Eigen::VectorXd run_chain(const Eigen::MatrixXd& latent, const ScoreFn& score,
                          const DiffusionSchedule& schedule, std::uint64_t seed);

/// Indicator truncation: x itself when |x|_inf <= L (boundary included),
/// the zero vector otherwise. Not coordinate clipping.
Eigen::VectorXd truncate(const Eigen::VectorXd& x, double L);

/// `count` independent chains (streams derived from seed and chain
/// index), pre-truncation latent endpoints.
SampleBatch run_chains(const Eigen::MatrixXd& latent, const ScoreFn& score,
                       const DiffusionSchedule& schedule, Eigen::Index count,
                       std::uint64_t seed);

/// Draws of x0 ~ q(sigma, .) using the same per-chain streams as
/// run_chains, for initialization-vs-generated comparisons.
SampleBatch initialization_batch(const Eigen::MatrixXd& latent, double sigma,
                                 Eigen::Index count, std::uint64_t seed);

/// Full sampling procedure: chains, truncation, then the decoder;
/// returns an ambient batch of `count` rows.
SampleBatch generate(const EncoderDecoderPair& pair, const Eigen::MatrixXd& latent,
                     const ScoreFn& score, const DiffusionSchedule& schedule,
                     Eigen::Index count, std::uint64_t seed);

}  // namespace bridge
