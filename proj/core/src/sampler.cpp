#include "bridge/sampler.hpp"

#include <cmath>
#include <string>

namespace bridge {

void DiffusionSchedule::validate() const {
  if (!(sigma > 0.0)) throw ValidationError("schedule: sigma must be > 0");
  if (steps < 0) throw ValidationError("schedule: K must be >= 0");
  if (!(stop_time > 0.0 && stop_time < 1.0)) {
    throw ValidationError("schedule: T must lie in (0,1)");
  }
  if (!(truncation > 0.0)) throw ValidationError("schedule: L must be > 0");
}

DiffusionSchedule derive_schedule(long long n, int d_star, double beta, double sigma,
                                  int K, double L) {
  if (n < 1) throw ValidationError("derive_schedule: n must be >= 1");
  if (d_star < 1) throw ValidationError("derive_schedule: d_star must be >= 1");
  if (!(beta > 0.0)) throw ValidationError("derive_schedule: beta must be > 0");
  if (!(sigma > 0.0)) throw ValidationError("derive_schedule: sigma must be > 0");
  if (K < 1) throw ValidationError("derive_schedule: K must be >= 1");
  if (!(L > 0.0)) throw ValidationError("derive_schedule: L must be > 0");

  DiffusionSchedule s;
  s.sigma = sigma;
  s.steps = K;
  s.truncation = L;
  s.beta = beta;
  s.d_star = d_star;
  s.n = n;

  const double nd = static_cast<double>(n);
  const double denom = static_cast<double>(d_star) + 2.0 * beta;
  s.resolution = static_cast<int>(std::floor(std::pow(nd, 1.0 / denom))) + 1;
  s.c_t = 2.0 * beta;
  s.stop_time = 1.0 - std::pow(static_cast<double>(s.resolution), -s.c_t);
  s.theoretical_m = std::pow(nd, (static_cast<double>(d_star) + 8.0 * beta) / denom);
  s.step_size_target = std::pow(nd, -6.0 * beta / denom);
  s.step_warning = s.dt() > s.step_size_target;
  s.validate();
  return s;
}

DiffusionSchedule manual_schedule(double sigma, int K, double T, double L) {
  DiffusionSchedule s;
  s.sigma = sigma;
  s.steps = K;
  s.stop_time = T;
  s.truncation = L;
  s.validate();
  return s;
}

double default_truncation_level(double sigma) { return 4.0 * (1.0 + sigma); }

ChainState init_chain(const Eigen::MatrixXd& latent, double sigma, std::uint64_t seed) {
  if (latent.rows() == 0) throw ValidationError("init_chain: empty latent set");
  ChainState state{Eigen::VectorXd(latent.cols()), 0, SplitMix64(seed)};
  const auto row = static_cast<Eigen::Index>(
      state.rng.next_index(static_cast<std::uint64_t>(latent.rows())));
  state.x = latent.row(row);
  for (Eigen::Index j = 0; j < state.x.size(); ++j) {
    state.x[j] += sigma * state.rng.next_normal();
  }
  return state;
}

void em_step(ChainState& state, const ScoreFn& score, const DiffusionSchedule& schedule) {
  if (state.step_index >= schedule.steps) {
    throw ValidationError("em_step: chain already at the stopping time");
  }
  const double dt = schedule.dt();
  const double t_i = state.step_index * dt;
  const double drift_coef = schedule.sigma * schedule.sigma * dt;
  const double noise_coef = schedule.noise_scale == NoiseScale::Em
                                ? schedule.sigma * std::sqrt(dt)
                                : schedule.sigma / schedule.steps;

  state.x += drift_coef * score(1.0 - t_i, state.x);
  for (Eigen::Index j = 0; j < state.x.size(); ++j) {
    state.x[j] += noise_coef * state.rng.next_normal();
  }
  ++state.step_index;
  if (!state.x.allFinite()) {
    throw NumericError("em_step: non-finite chain state at step " +
                       std::to_string(state.step_index));
  }
}

Eigen::VectorXd run_chain(const Eigen::MatrixXd& latent, const ScoreFn& score,
                          const DiffusionSchedule& schedule, std::uint64_t seed) {
  schedule.validate();
  ChainState state = init_chain(latent, schedule.sigma, seed);
  for (int i = 0; i < schedule.steps; ++i) em_step(state, score, schedule);
  return state.x;
}

Eigen::VectorXd truncate(const Eigen::VectorXd& x, double L) {
  if (!(L > 0.0)) throw ValidationError("truncate: L must be > 0");
  if (x.lpNorm<Eigen::Infinity>() <= L) return x;
  return Eigen::VectorXd::Zero(x.size());
}

SampleBatch run_chains(const Eigen::MatrixXd& latent, const ScoreFn& score,
                       const DiffusionSchedule& schedule, Eigen::Index count,
                       std::uint64_t seed) {
  if (count < 0) throw ValidationError("run_chains: count must be >= 0");
  SampleBatch batch;
  batch.dim_tag = DimTag::Latent;
  batch.seed = seed;
  batch.points.resize(count, latent.cols());
  for (Eigen::Index c = 0; c < count; ++c) {
    batch.points.row(c) =
        run_chain(latent, score, schedule, derive_seed(seed, static_cast<std::uint64_t>(c)))
            .transpose();
  }
  return batch;
}

SampleBatch initialization_batch(const Eigen::MatrixXd& latent, double sigma,
                                 Eigen::Index count, std::uint64_t seed) {
  if (count < 0) throw ValidationError("initialization_batch: count must be >= 0");
  SampleBatch batch;
  batch.dim_tag = DimTag::Latent;
  batch.seed = seed;
  batch.points.resize(count, latent.cols());
  for (Eigen::Index c = 0; c < count; ++c) {
    batch.points.row(c) =
        init_chain(latent, sigma, derive_seed(seed, static_cast<std::uint64_t>(c))).x.transpose();
  }
  return batch;
}

SampleBatch generate(const EncoderDecoderPair& pair, const Eigen::MatrixXd& latent,
                     const ScoreFn& score, const DiffusionSchedule& schedule,
                     Eigen::Index count, std::uint64_t seed) {
  if (pair.latent_dim() != latent.cols()) {
    throw ShapeError("generate: decoder input dim != latent dim");
  }
  SampleBatch chains = run_chains(latent, score, schedule, count, seed);
  SampleBatch batch;
  batch.dim_tag = DimTag::Ambient;
  batch.seed = seed;
  batch.points.resize(count, pair.ambient_dim());
  for (Eigen::Index c = 0; c < count; ++c) {
    const Eigen::VectorXd kept = truncate(chains.points.row(c), schedule.truncation);
    batch.points.row(c) = forward(pair.decoder, kept).transpose();
  }
  return batch;
}

}  // namespace bridge
