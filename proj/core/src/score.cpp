#include "bridge/score.hpp"

#include <atomic>
#include <cmath>
#include <numbers>

#include "bridge/rng.hpp"

namespace bridge {

namespace {

std::atomic<std::uint64_t> g_clamp_count{0};

constexpr double kOneMinusTFloor = 1e-12;

double clamped_u(double t) {
  const double u = 1.0 - t;
  if (u < kOneMinusTFloor) {
    g_clamp_count.fetch_add(1, std::memory_order_relaxed);
    return kOneMinusTFloor;
  }
  return u;
}

void check_time(double t) {
  if (!(t > 0.0) || !(t <= 1.0)) {
    throw std::domain_error("time argument must lie in (0,1], got " + std::to_string(t));
  }
}

}  // namespace

void ConvolutionDensity::validate() const {
  if (latent_points.rows() < 1) throw ValidationError("convolution density needs n >= 1 points");
  if (!(sigma > 0.0)) throw ValidationError("sigma must be > 0");
  if (!latent_points.allFinite()) throw NumericError("latent points contain NaN/Inf");
}

double log_density(const ConvolutionDensity& cd, double t, const Eigen::VectorXd& x) {
  check_time(t);
  if (x.size() != cd.latent_points.cols()) throw ShapeError("log_density: x dimension mismatch");
  const double st = cd.sigma_t(t);
  const double inv2 = 1.0 / (2.0 * st * st);
  const Eigen::Index n = cd.n();

  Eigen::VectorXd exponents(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    exponents[i] = -(x.transpose() - cd.latent_points.row(i)).squaredNorm() * inv2;
  }
  const double m = exponents.maxCoeff();
  const double lse = m + std::log((exponents.array() - m).exp().sum());
  const double d = static_cast<double>(x.size());
  return lse - std::log(static_cast<double>(n)) -
         0.5 * d * std::log(2.0 * std::numbers::pi * st * st);
}

Eigen::VectorXd oracle_score(const ConvolutionDensity& cd, double t, const Eigen::VectorXd& x) {
  check_time(t);
  if (x.size() != cd.latent_points.cols()) throw ShapeError("oracle_score: x dimension mismatch");
  const double st = cd.sigma_t(t);
  const double var = st * st;
  const Eigen::Index n = cd.n();

  Eigen::VectorXd exponents(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    exponents[i] = -(x.transpose() - cd.latent_points.row(i)).squaredNorm() / (2.0 * var);
  }
  const double m = exponents.maxCoeff();
  Eigen::VectorXd w = (exponents.array() - m).exp();
  w /= w.sum();
  Eigen::VectorXd score = Eigen::VectorXd::Zero(x.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    score += w[i] * (cd.latent_points.row(i).transpose() - x);
  }
  // Final division (not multiplication by a reciprocal) keeps the n = 1
  // case bit-identical to the closed form (x_1 - x)/sigma_t^2.
  return score / var;
}

ScoreFn oracle_score_fn(ConvolutionDensity cd) {
  cd.validate();
  return [cd = std::move(cd)](double u, const Eigen::VectorXd& x) {
    return oracle_score(cd, u, x);
  };
}

void ScoreModel::validate() const {
  net.validate();
  if (net.input_dim() != net.output_dim() + 1) {
    throw ShapeError("score network must map 1 + d_star -> d_star");
  }
  if (!(sigma > 0.0)) throw ValidationError("score model sigma must be > 0");
}

Eigen::VectorXd ScoreModel::eval(double u, const Eigen::VectorXd& x) const {
  Eigen::VectorXd input(x.size() + 1);
  input[0] = u;
  input.tail(x.size()) = x;
  return forward(net, input);
}

ScoreFn ScoreModel::fn() const {
  return [model = *this](double u, const Eigen::VectorXd& x) { return model.eval(u, x); };
}

std::vector<DsmSample> draw_dsm_samples(int m, double T, int d_star, Eigen::Index n,
                                        std::uint64_t seed) {
  if (m < 1) throw ValidationError("draw_dsm_samples: m must be >= 1");
  if (!(T > 0.0 && T < 1.0)) throw ValidationError("draw_dsm_samples: T must lie in (0,1)");
  SplitMix64 rng(seed);
  std::vector<DsmSample> samples(static_cast<std::size_t>(m));
  for (auto& s : samples) {
    s.t = rng.next_uniform(0.0, T);
    s.z.resize(d_star);
    for (int j = 0; j < d_star; ++j) s.z[j] = rng.next_normal();
    s.x_index = static_cast<Eigen::Index>(rng.next_index(static_cast<std::uint64_t>(n)));
  }
  return samples;
}

double dsm_loss(const ScoreFn& s, const Eigen::MatrixXd& latent,
                const std::vector<DsmSample>& samples, double sigma, double T) {
  if (!(T > 0.0 && T < 1.0)) throw ValidationError("dsm_loss: T must lie in (0,1)");
  if (latent.rows() == 0) throw ValidationError("dsm_loss: empty latent set");
  if (samples.empty()) throw ValidationError("dsm_loss: empty sample set");
  if (!(sigma > 0.0)) throw ValidationError("dsm_loss: sigma must be > 0");

  double acc = 0.0;
  for (const auto& sample : samples) {
    if (sample.t < 0.0 || sample.t > T) {
      throw ValidationError("dsm_loss: sample time outside [0, T]");
    }
    if (sample.z.size() != latent.cols()) throw ShapeError("dsm_loss: z dimension mismatch");
    const double u = clamped_u(sample.t);
    const double scale = sigma * std::sqrt(u);
    const Eigen::VectorXd target = sample.z / scale;
    for (Eigen::Index i = 0; i < latent.rows(); ++i) {
      const Eigen::VectorXd y = latent.row(i).transpose() + scale * sample.z;
      acc += (s(u, y) + target).squaredNorm();
    }
  }
  return acc / (static_cast<double>(samples.size()) * static_cast<double>(latent.rows()));
}

std::uint64_t dsm_clamp_count() { return g_clamp_count.load(std::memory_order_relaxed); }
void reset_dsm_clamp_count() { g_clamp_count.store(0, std::memory_order_relaxed); }

ScoreModel train_score(const SampleBatch& latent, const std::vector<int>& dims,
                       double sigma, double T, const ScoreTrainOptions& options) {
  if (latent.rows() == 0) throw ValidationError("train_score: empty latent set");
  if (!(T > 0.0 && T < 1.0)) throw ValidationError("train_score: T must lie in (0,1)");
  if (!(sigma > 0.0)) throw ValidationError("train_score: sigma must be > 0");
  if (options.steps < 0) throw ValidationError("train_score: steps must be >= 0");
  if (options.time_batch < 1 || options.point_batch < 1) {
    throw ValidationError("train_score: minibatch sizes must be >= 1");
  }
  const int d_star = static_cast<int>(latent.dim());
  if (dims.size() < 2 || dims.front() != d_star + 1 || dims.back() != d_star) {
    throw ShapeError("train_score: network dims must map 1 + d_star -> d_star");
  }

  ScoreModel model;
  model.net = make_mlp(dims, derive_seed(options.seed, 0));
  model.sigma = sigma;
  model.horizon = T;
  model.n = latent.rows();
  model.seed = options.seed;

  AdamState state = make_adam_state(model.net);
  SplitMix64 rng(derive_seed(options.seed, 1));
  const auto n = static_cast<std::uint64_t>(latent.rows());
  const double inv = 1.0 / (static_cast<double>(options.time_batch) *
                            static_cast<double>(options.point_batch));
  const bool frozen = options.adam.lr == 0.0;

  Eigen::VectorXd input(d_star + 1);
  for (int step = 0; step < options.steps; ++step) {
    GradientTape tape = make_zero_tape(model.net);
    double loss = 0.0;
    for (int j = 0; j < options.time_batch; ++j) {
      const double t = rng.next_uniform(0.0, T);
      Eigen::VectorXd z(d_star);
      for (int kk = 0; kk < d_star; ++kk) z[kk] = rng.next_normal();
      const double u = clamped_u(t);
      const double scale = sigma * std::sqrt(u);
      const Eigen::VectorXd target = z / scale;
      for (int b = 0; b < options.point_batch; ++b) {
        const auto i = static_cast<Eigen::Index>(rng.next_index(n));
        input[0] = u;
        input.tail(d_star) = latent.points.row(i).transpose() + scale * z;
        const Eigen::VectorXd out = forward(model.net, input);
        const Eigen::VectorXd residual = out + target;
        loss += residual.squaredNorm() * inv;
        tape.accumulate(backward(model.net, input, 2.0 * inv * residual));
      }
    }
    if (!std::isfinite(loss)) {
      throw NumericError("train_score: non-finite DSM loss at step " + std::to_string(step));
    }
    model.final_dsm_loss = loss;
    if (!frozen) adam_step(model.net, tape, state, options.adam);
  }
  return model;
}

std::vector<double> uniform_time_grid(double T, int count) {
  if (!(T > 0.0)) throw ValidationError("uniform_time_grid: T must be > 0");
  if (count < 1) throw ValidationError("uniform_time_grid: count must be >= 1");
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    grid[static_cast<std::size_t>(k)] = (k + 0.5) * T / count;
  }
  return grid;
}

double score_l2_error(const ScoreFn& model, const ConvolutionDensity& cd,
                      const std::vector<double>& t_grid, int eval_points,
                      std::uint64_t seed) {
  cd.validate();
  if (t_grid.empty()) throw ValidationError("score_l2_error: degenerate (empty) time grid");
  if (eval_points < 1) throw ValidationError("score_l2_error: eval_points must be >= 1");
  for (double t : t_grid) {
    if (!(t >= 0.0) || !(t < 1.0)) {
      throw ValidationError("score_l2_error: grid times must satisfy 0 <= t < 1");
    }
  }
  SplitMix64 rng(seed);
  const int d_star = cd.dim();
  const auto n = static_cast<std::uint64_t>(cd.n());
  double acc = 0.0;
  for (double t : t_grid) {
    const double u = 1.0 - t;  // x_t ~ q_{1-t} = q(sqrt(u) sigma, .)
    const double su = cd.sigma_t(u);
    for (int k = 0; k < eval_points; ++k) {
      const auto i = static_cast<Eigen::Index>(rng.next_index(n));
      Eigen::VectorXd x = cd.latent_points.row(i);
      for (int j = 0; j < d_star; ++j) x[j] += su * rng.next_normal();
      acc += (model(u, x) - oracle_score(cd, u, x)).squaredNorm();
    }
  }
  return acc / (static_cast<double>(t_grid.size()) * static_cast<double>(eval_points));
}

}  // namespace bridge
