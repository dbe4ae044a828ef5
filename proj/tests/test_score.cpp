#include <doctest.h>

#include <cmath>

#include "bridge/rng.hpp"
#include "bridge/score.hpp"
#include "oracles.hpp"

using namespace bridge;

namespace {

ConvolutionDensity random_density(Eigen::Index n, int d_star, double sigma,
                                  std::uint64_t seed) {
  SplitMix64 rng(seed);
  ConvolutionDensity cd;
  cd.sigma = sigma;
  cd.latent_points.resize(n, d_star);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < d_star; ++j) cd.latent_points(i, j) = rng.next_uniform(-1.0, 1.0);
  }
  return cd;
}

Eigen::VectorXd random_vec(int n, std::uint64_t seed, double scale = 1.0) {
  SplitMix64 rng(seed);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = scale * rng.next_normal();
  return v;
}

}  // namespace

TEST_CASE("single standard gaussian at its mode") {
  ConvolutionDensity cd;
  cd.latent_points = Eigen::MatrixXd::Zero(1, 1);
  cd.sigma = 1.0;
  CHECK(log_density(cd, 1.0, Eigen::VectorXd::Zero(1)) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-12));
}

TEST_CASE("log density is translation equivariant") {
  ConvolutionDensity cd = random_density(5, 2, 0.8, 1);
  const Eigen::VectorXd x = random_vec(2, 2);
  const double base = log_density(cd, 0.7, x);
  Eigen::VectorXd shift(2);
  shift << 0.3, -0.2;
  ConvolutionDensity moved = cd;
  moved.latent_points.rowwise() += shift.transpose();
  CHECK(log_density(moved, 0.7, x + shift) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("two-point 1-D density matches the naive two-term sum") {
  ConvolutionDensity cd;
  cd.latent_points.resize(2, 1);
  cd.latent_points << -1.0, 1.0;
  cd.sigma = 0.5;  // t = 1 gives sigma_t = 0.5
  Eigen::VectorXd x(1);
  x << 0.3;
  const double st = 0.5;
  auto normal_pdf = [&](double mean) {
    return std::exp(-(x[0] - mean) * (x[0] - mean) / (2 * st * st)) /
           (st * std::sqrt(2 * std::numbers::pi));
  };
  const double naive = std::log(0.5 * (normal_pdf(-1.0) + normal_pdf(1.0)));
  CHECK(log_density(cd, 1.0, x) == doctest::Approx(naive).epsilon(1e-12));
}

TEST_CASE("time arguments outside (0,1] are rejected") {
  const ConvolutionDensity cd = random_density(3, 2, 1.0, 3);
  const Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(log_density(cd, 0.0, x), std::domain_error);
  CHECK_THROWS_AS(log_density(cd, -0.5, x), std::domain_error);
  CHECK_THROWS_AS(oracle_score(cd, 0.0, x), std::domain_error);
}

TEST_CASE("single-point score is the exact gaussian score") {
  ConvolutionDensity cd;
  cd.latent_points.resize(1, 2);
  cd.latent_points << 0.4, -0.3;
  cd.sigma = 0.9;
  const double t = 0.6;
  const Eigen::VectorXd x = random_vec(2, 5);
  const double st2 = cd.sigma_t(t) * cd.sigma_t(t);
  const Eigen::VectorXd expected = (cd.latent_points.row(0).transpose() - x) / st2;
  const Eigen::VectorXd got = oracle_score(cd, t, x);
  CHECK((got - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("symmetric two-point score vanishes at the midpoint") {
  ConvolutionDensity cd;
  cd.latent_points.resize(2, 1);
  cd.latent_points << -0.7, 0.7;
  cd.sigma = 1.0;
  CHECK(oracle_score(cd, 0.5, Eigen::VectorXd::Zero(1))[0] == 0.0);
}

TEST_CASE("oracle score is the gradient of log density") {
  for (std::uint64_t trial = 0; trial < 20; ++trial) {
    SplitMix64 rng(100 + trial);
    const int d_star = 1 + static_cast<int>(rng.next_index(3));
    const auto n = static_cast<Eigen::Index>(1 + rng.next_index(6));
    const ConvolutionDensity cd =
        random_density(n, d_star, rng.next_uniform(0.3, 1.5), rng.next_u64());
    const double t = rng.next_uniform(0.1, 1.0);
    const Eigen::VectorXd x = random_vec(d_star, rng.next_u64(), 1.2);
    const Eigen::VectorXd analytic = oracle_score(cd, t, x);
    const Eigen::VectorXd fd = bridge::testing::fd_log_density_gradient(cd, t, x);
    const double scale = std::max({analytic.norm(), fd.norm(), 1e-8});
    CHECK((analytic - fd).norm() / scale < 1e-6);
  }
}

TEST_CASE("log density decays monotonically along rays and stays bounded inside") {
  const ConvolutionDensity cd = random_density(20, 2, 0.8, 7);
  // Bounded below on the data cube.
  SplitMix64 rng(8);
  for (int k = 0; k < 50; ++k) {
    Eigen::VectorXd x(2);
    x << rng.next_uniform(-1.0, 1.0), rng.next_uniform(-1.0, 1.0);
    CHECK(log_density(cd, 1.0, x) > -50.0);
  }
  // Monotone decrease along rays far outside the support.
  Eigen::VectorXd dir(2);
  dir << 1.0, 0.6;
  dir.normalize();
  double prev = log_density(cd, 1.0, 2.0 * dir);
  for (double r = 3.0; r < 12.0; r += 1.0) {
    const double cur = log_density(cd, 1.0, r * dir);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("dsm loss at the oracle is identically zero for n = 1") {
  ConvolutionDensity cd;
  cd.latent_points = random_vec(2, 9, 0.5).transpose();
  cd.sigma = 0.7;
  const auto samples = draw_dsm_samples(40, 0.9, 2, 1, 10);
  const double loss = dsm_loss(oracle_score_fn(cd), cd.latent_points, samples, 0.7, 0.9);
  CHECK(loss < 1e-20);
}

TEST_CASE("dsm loss of the zero model is the plug-in noise norm") {
  const Eigen::MatrixXd latent = random_density(3, 2, 1.0, 11).latent_points;
  const auto samples = draw_dsm_samples(25, 0.8, 2, 3, 12);
  const ScoreFn zero = [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Zero(x.size()).eval();
  };
  const double sigma = 0.6;
  double expected = 0.0;
  for (const auto& s : samples) {
    expected += s.z.squaredNorm() / (sigma * sigma * (1.0 - s.t));
  }
  expected /= static_cast<double>(samples.size());
  CHECK(dsm_loss(zero, latent, samples, sigma, 0.8) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("dsm loss matches a naive nested-loop recomputation") {
  const Eigen::MatrixXd latent = random_density(2, 2, 1.0, 13).latent_points;
  const auto samples = draw_dsm_samples(3, 0.85, 2, 2, 14);
  ScoreModel model;
  model.net = make_mlp({3, 8, 2}, 15);
  const double got = dsm_loss(model.fn(), latent, samples, 0.9, 0.85);
  const double naive = bridge::testing::naive_dsm_loss(model.fn(), latent, samples, 0.9);
  CHECK(got == doctest::Approx(naive).epsilon(1e-12));
}

TEST_CASE("dsm loss validates its sample set") {
  const Eigen::MatrixXd latent = random_density(2, 2, 1.0, 16).latent_points;
  auto samples = draw_dsm_samples(4, 0.5, 2, 2, 17);
  const ScoreFn zero = [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Zero(x.size()).eval();
  };
  samples[1].t = 0.7;  // beyond T = 0.5
  CHECK_THROWS_AS(dsm_loss(zero, latent, samples, 1.0, 0.5), ValidationError);
  CHECK_THROWS_AS(dsm_loss(zero, latent, {}, 1.0, 0.5), ValidationError);
}

TEST_CASE("no model undercuts the oracle on a fixed single-point sample set") {
  ConvolutionDensity cd;
  cd.latent_points = random_vec(2, 18, 0.4).transpose();
  cd.sigma = 0.8;
  const auto samples = draw_dsm_samples(30, 0.9, 2, 1, 19);
  const double oracle_loss =
      dsm_loss(oracle_score_fn(cd), cd.latent_points, samples, 0.8, 0.9);
  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    ScoreModel model;
    model.net = make_mlp({3, 8, 2}, 20 + trial);
    CHECK(dsm_loss(model.fn(), cd.latent_points, samples, 0.8, 0.9) >= oracle_loss);
  }
}

TEST_CASE("dsm loss is continuous under tiny parameter perturbations") {
  const Eigen::MatrixXd latent = random_density(4, 2, 1.0, 21).latent_points;
  const auto samples = draw_dsm_samples(10, 0.8, 2, 4, 22);
  ScoreModel model;
  model.net = make_mlp({3, 8, 2}, 23);
  const double base = dsm_loss(model.fn(), latent, samples, 1.0, 0.8);
  for (const double eps : {1e-6, -1e-6}) {
    ScoreModel nudged = model;
    for (auto& w : nudged.net.weights) w.array() += eps;
    const double shifted = dsm_loss(nudged.fn(), latent, samples, 1.0, 0.8);
    CHECK(std::isfinite(shifted));
    CHECK(std::abs(shifted - base) < 1e-2);
  }
}

TEST_CASE("train_score with zero steps returns the initialization") {
  SampleBatch latent;
  latent.points = random_density(8, 2, 1.0, 24).latent_points;
  ScoreTrainOptions options;
  options.steps = 0;
  options.seed = 25;
  const ScoreModel model = train_score(latent, {3, 8, 2}, 1.0, 0.8, options);
  const MlpNetwork init = make_mlp({3, 8, 2}, derive_seed(25, 0));
  CHECK((model.net.weights[0] - init.weights[0]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("train_score is bit-deterministic in the seed") {
  SampleBatch latent;
  latent.points = random_density(8, 2, 1.0, 26).latent_points;
  ScoreTrainOptions options;
  options.steps = 20;
  options.time_batch = 4;
  options.point_batch = 4;
  options.seed = 27;
  const ScoreModel a = train_score(latent, {3, 8, 2}, 1.0, 0.8, options);
  const ScoreModel b = train_score(latent, {3, 8, 2}, 1.0, 0.8, options);
  for (std::size_t i = 0; i < a.net.weights.size(); ++i) {
    CHECK((a.net.weights[i] - b.net.weights[i]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(a.final_dsm_loss == b.final_dsm_loss);
}

TEST_CASE("a short training run already beats the zero model") {
  SampleBatch latent;
  latent.points = random_density(16, 1, 1.0, 28).latent_points;
  ScoreTrainOptions options;
  options.steps = 400;
  options.time_batch = 8;
  options.point_batch = 8;
  options.seed = 29;
  const double T = 0.8;
  const ScoreModel model = train_score(latent, {2, 32, 1}, 1.0, T, options);
  const ConvolutionDensity cd{latent.points, 1.0};
  const auto grid = uniform_time_grid(T, 16);
  const ScoreFn zero = [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Zero(x.size()).eval();
  };
  const double trained_err = score_l2_error(model.fn(), cd, grid, 200, 30);
  const double zero_err = score_l2_error(zero, cd, grid, 200, 30);
  CHECK(trained_err < zero_err);
}

TEST_CASE("score_l2_error vanishes when the model is the oracle") {
  const ConvolutionDensity cd = random_density(6, 2, 0.9, 31);
  const auto grid = uniform_time_grid(0.9, 8);
  CHECK(score_l2_error(oracle_score_fn(cd), cd, grid, 50, 32) == 0.0);
}

TEST_CASE("zero-model error matches the single-gaussian closed form") {
  ConvolutionDensity cd;
  cd.latent_points = Eigen::MatrixXd::Zero(1, 2);
  cd.sigma = 0.8;
  const double T = 0.9;
  const ScoreFn zero = [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Zero(x.size()).eval();
  };
  const double estimate = score_l2_error(zero, cd, uniform_time_grid(T, 256), 2000, 33);
  const double d_star = 2.0;
  const double closed_form =
      d_star / (cd.sigma * cd.sigma * T) * std::log(1.0 / (1.0 - T));
  CHECK(estimate == doctest::Approx(closed_form).epsilon(0.03));
}

TEST_CASE("score_l2_error is permutation-invariant up to monte-carlo noise") {
  const ConvolutionDensity cd = random_density(8, 2, 1.0, 34);
  ConvolutionDensity permuted = cd;
  permuted.latent_points.row(0).swap(permuted.latent_points.row(7));
  permuted.latent_points.row(2).swap(permuted.latent_points.row(5));
  const ScoreFn zero = [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Zero(x.size()).eval();
  };
  const auto grid = uniform_time_grid(0.8, 16);
  const double a = score_l2_error(zero, cd, grid, 4000, 35);
  const double b = score_l2_error(zero, permuted, grid, 4000, 35);
  // Same mixture, so the estimates agree up to resampling noise.
  CHECK(a == doctest::Approx(b).epsilon(0.1));
}

TEST_CASE("the 1 - t floor is counted when user configs push t toward 1") {
  const Eigen::MatrixXd latent = random_density(2, 1, 1.0, 38).latent_points;
  const double T = 1.0 - 1e-13;  // valid but vanishing noise scale
  std::vector<DsmSample> samples(1);
  samples[0].t = T;
  samples[0].z = Eigen::VectorXd::Ones(1);
  const ScoreFn zero = [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Zero(x.size()).eval();
  };
  reset_dsm_clamp_count();
  const double loss = dsm_loss(zero, latent, samples, 1.0, T);
  CHECK(std::isfinite(loss));
  CHECK(dsm_clamp_count() == 1);
  reset_dsm_clamp_count();
}

TEST_CASE("degenerate evaluation grids are rejected") {
  const ConvolutionDensity cd = random_density(4, 2, 1.0, 36);
  const ScoreFn zero = [](double, const Eigen::VectorXd& x) {
    return Eigen::VectorXd::Zero(x.size()).eval();
  };
  CHECK_THROWS_AS(score_l2_error(zero, cd, {}, 10, 37), ValidationError);
  CHECK_THROWS_AS(score_l2_error(zero, cd, {1.0}, 10, 37), ValidationError);
}
