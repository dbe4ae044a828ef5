#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "bridge/datagen.hpp"
#include "bridge/nn.hpp"

namespace bridge {

/// Gaussian convolution of an empirical latent distribution: at time
/// t in (0,1] the density is the uniform mixture of N(x_i, sigma_t^2 I)
/// with sigma_t = sqrt(t) * sigma.
struct ConvolutionDensity {
  Eigen::MatrixXd latent_points;  // n x d_star
  double sigma = 1.0;

  void validate() const;
  Eigen::Index n() const { return latent_points.rows(); }
  int dim() const { return static_cast<int>(latent_points.cols()); }
  double sigma_t(double t) const { return std::sqrt(t) * sigma; }
};

/// log q_t(x) via log-sum-exp over the mixture components.
double log_density(const ConvolutionDensity& cd, double t, const Eigen::VectorXd& x);

/// grad_x log q_t(x) = sum_i w_i(x) (x_i - x) / sigma_t^2 with softmax
/// weights w_i over -|x - x_i|^2 / (2 sigma_t^2); the exact gradient of
/// log_density.
Eigen::VectorXd oracle_score(const ConvolutionDensity& cd, double t, const Eigen::VectorXd& x);

/// Score callable s(u, x) where u is the time argument the network is
/// trained on (u = 1 - t inside the DSM loss).
using ScoreFn = std::function<Eigen::VectorXd(double, const Eigen::VectorXd&)>;

ScoreFn oracle_score_fn(ConvolutionDensity cd);

/// Time-conditioned score network; the input layout is [u; x] with the
/// raw scalar u as the first coordinate.
struct ScoreModel {
  // The network's time argument is u = 1 - t, the argument the DSM loss
  // trains it on; the associated noise level sigma_u = sqrt(u) sigma is
  // documentation, never an input.
  static constexpr const char* kTimeConvention = "u = 1 - t";

  MlpNetwork net;  // input dim 1 + d_star, output dim d_star
  double sigma = 1.0;
  double horizon = 0.5;  // T
  Eigen::Index n = 0;
  std::uint64_t seed = 0;
  double final_dsm_loss = 0.0;

  void validate() const;
  int latent_dim() const { return net.output_dim(); }
  Eigen::VectorXd eval(double u, const Eigen::VectorXd& x) const;
  ScoreFn fn() const;
};

/// One denoising draw: time t ~ U[0,T], noise z ~ N(0, I), and the
/// latent row it is paired with in minibatch training (the reference
/// loss crosses every sample with every latent point and ignores it).
struct DsmSample {
  double t = 0.0;
  Eigen::VectorXd z;
  Eigen::Index x_index = 0;
};

std::vector<DsmSample> draw_dsm_samples(int m, double T, int d_star, Eigen::Index n,
                                        std::uint64_t seed);

/// Reference denoising score-matching objective, the full m x n double
/// average of |s(1-t_j, x_i + sigma sqrt(1-t_j) z_j) + z_j/(sigma sqrt(1-t_j))|^2.
double dsm_loss(const ScoreFn& s, const Eigen::MatrixXd& latent,
                const std::vector<DsmSample>& samples, double sigma, double T);

/// Number of times 1-t was clamped at the 1e-12 floor inside the DSM
/// target since the last reset.
std::uint64_t dsm_clamp_count();
void reset_dsm_clamp_count();

struct ScoreTrainOptions {
  int steps = 2000;
  int time_batch = 16;   // fresh (t, z) draws per step
  int point_batch = 32;  // latent rows per step
  AdamHyper adam{};
  std::uint64_t seed = 0;
};

/// Minibatch DSM training with fresh (t, z) draws every step.
/// Deterministic given seed. dims must map 1 + d_star -> d_star.
ScoreModel train_score(const SampleBatch& latent, const std::vector<int>& dims,
                       double sigma, double T, const ScoreTrainOptions& options);

/// Midpoint grid on (0, T] for time-averaged evaluations.
std::vector<double> uniform_time_grid(double T, int count);

/// Monte-Carlo estimate of the time-averaged squared score error
/// (1/T) int_0^T E |s(1-t, x_t) - grad log q_{1-t}(x_t)|^2 dt with
/// x_t ~ q_{1-t} sampled by mixture draw + Gaussian noise.
double score_l2_error(const ScoreFn& model, const ConvolutionDensity& cd,
                      const std::vector<double>& t_grid, int eval_points,
                      std::uint64_t seed);

}  // namespace bridge
