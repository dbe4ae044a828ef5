#include <doctest.h>

#include <filesystem>

#include "bridge/nn.hpp"
#include "bridge/rng.hpp"
#include "oracles.hpp"

using namespace bridge;

namespace {

MlpNetwork random_net(const std::vector<int>& dims, std::uint64_t seed) {
  return make_mlp(dims, seed);
}

Eigen::VectorXd random_vec(int n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.next_normal();
  return v;
}

}  // namespace

TEST_CASE("zero-weight network returns the final bias") {
  MlpNetwork net;
  net.layer_dims = {3, 4, 2};
  net.weights = {Eigen::MatrixXd::Zero(4, 3), Eigen::MatrixXd::Zero(2, 4)};
  net.biases = {Eigen::VectorXd::Zero(4), Eigen::VectorXd(2)};
  net.biases[1] << 0.5, -0.5;
  const Eigen::VectorXd out = forward(net, random_vec(3, 1));
  CHECK(out[0] == 0.5);
  CHECK(out[1] == -0.5);
}

TEST_CASE("identity affine map applies no output activation") {
  MlpNetwork net;
  net.layer_dims = {2, 2};
  net.weights = {Eigen::MatrixXd::Identity(2, 2)};
  net.biases = {Eigen::VectorXd::Zero(2)};
  Eigen::VectorXd in(2);
  in << 1.0, -2.0;
  const Eigen::VectorXd out = forward(net, in);
  CHECK(out[0] == 1.0);
  CHECK(out[1] == -2.0);  // negative coordinate survives
}

TEST_CASE("two-layer forward matches hand arithmetic") {
  MlpNetwork net;
  net.layer_dims = {2, 2, 1};
  net.weights = {Eigen::MatrixXd(2, 2), Eigen::MatrixXd(1, 2)};
  net.weights[0] << 1.0, 2.0, -1.0, 0.5;
  net.weights[1] << 1.0, -1.0;
  net.biases = {Eigen::VectorXd(2), Eigen::VectorXd(1)};
  net.biases[0] << 0.5, -1.0;
  net.biases[1] << 0.25;
  Eigen::VectorXd in(2);
  in << 1.0, 1.0;
  // pre1 = (3.5, -1.5), relu -> (3.5, 0), out = 3.5 - 0 + 0.25
  CHECK(forward(net, in)[0] == doctest::Approx(3.75).epsilon(1e-15));
}

TEST_CASE("forward rejects dimension mismatches") {
  const MlpNetwork net = random_net({3, 5, 2}, 2);
  CHECK_THROWS_AS(forward(net, random_vec(4, 3)), ShapeError);
  CHECK_THROWS_AS(backward(net, random_vec(3, 4), random_vec(3, 5)), ShapeError);
}

TEST_CASE("zero upstream gives a zero tape") {
  const MlpNetwork net = random_net({3, 4, 2}, 5);
  const GradientTape tape = backward(net, random_vec(3, 6), Eigen::VectorXd::Zero(2));
  for (const auto& g : tape.dweights) CHECK(g.isZero(0.0));
  for (const auto& g : tape.dbiases) CHECK(g.isZero(0.0));
}

TEST_CASE("single affine layer has closed-form gradients") {
  const MlpNetwork net = random_net({3, 2}, 7);
  const Eigen::VectorXd x = random_vec(3, 8);
  const Eigen::VectorXd u = random_vec(2, 9);
  const GradientTape tape = backward(net, x, u);
  CHECK((tape.dweights[0] - u * x.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((tape.dbiases[0] - u).cwiseAbs().maxCoeff() == 0.0);
  CHECK((tape.input_grad - net.weights[0].transpose() * u).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("analytic gradients match central finite differences") {
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    SplitMix64 rng(1000 + trial);
    const int hidden = 2 + static_cast<int>(rng.next_index(14));
    const int inputs = 1 + static_cast<int>(rng.next_index(6));
    const int outputs = 1 + static_cast<int>(rng.next_index(4));
    const MlpNetwork net = random_net({inputs, hidden, outputs}, rng.next_u64());
    const Eigen::VectorXd x = random_vec(inputs, rng.next_u64());
    const Eigen::VectorXd u = random_vec(outputs, rng.next_u64());
    const GradientTape analytic = backward(net, x, u);
    const GradientTape fd = bridge::testing::fd_gradient_tape(net, x, u);
    CHECK(bridge::testing::max_relative_gap(analytic, fd) < 1e-4);
  }
}

TEST_CASE("forward is positively homogeneous in the weights") {
  MlpNetwork net = random_net({3, 8, 8, 2}, 21);
  for (auto& b : net.biases) b.setZero();
  const Eigen::VectorXd x = random_vec(3, 22);
  const Eigen::VectorXd base = forward(net, x);
  MlpNetwork scaled = net;
  for (auto& w : scaled.weights) w *= 2.0;
  const Eigen::VectorXd out = forward(scaled, x);
  // 3 affine maps, so the factor is 2^3 = 8, and scaling by a power of
  // two is exact in floating point.
  CHECK((out - 8.0 * base).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sgd arithmetic") {
  MlpNetwork net;
  net.layer_dims = {1, 1};
  net.weights = {Eigen::MatrixXd::Constant(1, 1, 1.0)};
  net.biases = {Eigen::VectorXd::Zero(1)};
  GradientTape tape = make_zero_tape(net);

  SUBCASE("zero tape leaves parameters untouched") {
    sgd_step(net, tape, 0.1);
    CHECK(net.weights[0](0, 0) == 1.0);
  }
  SUBCASE("w=1, g=2, lr=0.1 gives 0.8") {
    tape.dweights[0](0, 0) = 2.0;
    sgd_step(net, tape, 0.1);
    CHECK(net.weights[0](0, 0) == doctest::Approx(0.8).epsilon(1e-15));
  }
  SUBCASE("two steps with fixed g equal one step with doubled g") {
    tape.dweights[0](0, 0) = 2.0;  // power-of-two values keep this exact
    MlpNetwork twice = net;
    sgd_step(twice, tape, 0.125);
    sgd_step(twice, tape, 0.125);
    GradientTape doubled = make_zero_tape(net);
    doubled.dweights[0](0, 0) = 4.0;
    sgd_step(net, doubled, 0.125);
    CHECK(net.weights[0](0, 0) == twice.weights[0](0, 0));
  }
  SUBCASE("non-finite gradients are rejected") {
    tape.dweights[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(sgd_step(net, tape, 0.1), NumericError);
  }
}

TEST_CASE("adam first step follows the hand-computed update") {
  MlpNetwork net = random_net({2, 3, 2}, 31);
  const MlpNetwork before = net;
  GradientTape tape = backward(net, random_vec(2, 32), random_vec(2, 33));
  AdamState state = make_adam_state(net);
  AdamHyper hyper;
  adam_step(net, tape, state, hyper);
  // After bias correction the first step is -lr * g / (|g| + eps).
  for (std::size_t layer = 0; layer < net.weights.size(); ++layer) {
    for (Eigen::Index r = 0; r < net.weights[layer].rows(); ++r) {
      for (Eigen::Index c = 0; c < net.weights[layer].cols(); ++c) {
        const double g = tape.dweights[layer](r, c);
        const double expected =
            before.weights[layer](r, c) - hyper.lr * g / (std::abs(g) + hyper.eps);
        CHECK(net.weights[layer](r, c) == doctest::Approx(expected).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("adam is inert on zero tapes and decays its moments") {
  MlpNetwork net = random_net({2, 4, 1}, 41);
  const MlpNetwork before = net;
  AdamState state = make_adam_state(net);
  AdamHyper hyper;

  GradientTape tape = backward(net, random_vec(2, 42), random_vec(1, 43));
  adam_step(net, tape, state, hyper);
  const double m_after_one = state.m_weights[0].cwiseAbs().maxCoeff();

  const GradientTape zero = make_zero_tape(net);
  for (int i = 0; i < 50; ++i) adam_step(net, zero, state, hyper);
  CHECK(state.m_weights[0].cwiseAbs().maxCoeff() < m_after_one * 1e-2);

  MlpNetwork fresh = before;
  AdamState fresh_state = make_adam_state(fresh);
  adam_step(fresh, make_zero_tape(fresh), fresh_state, hyper);
  for (std::size_t layer = 0; layer < fresh.weights.size(); ++layer) {
    CHECK((fresh.weights[layer] - before.weights[layer]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("optimizer steps are bit-deterministic") {
  const MlpNetwork base = random_net({3, 6, 2}, 51);
  const GradientTape tape = backward(base, random_vec(3, 52), random_vec(2, 53));
  MlpNetwork a = base, b = base;
  AdamState sa = make_adam_state(a), sb = make_adam_state(b);
  for (int i = 0; i < 10; ++i) {
    adam_step(a, tape, sa, {});
    adam_step(b, tape, sb, {});
  }
  for (std::size_t layer = 0; layer < a.weights.size(); ++layer) {
    CHECK((a.weights[layer] - b.weights[layer]).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.biases[layer] - b.biases[layer]).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("capacity metadata counts nonzeros and the max magnitude") {
  MlpNetwork net;
  net.layer_dims = {2, 2};
  net.weights = {Eigen::MatrixXd::Zero(2, 2)};
  net.biases = {Eigen::VectorXd::Zero(2)};
  net.weights[0](0, 1) = -3.5;
  net.biases[0][1] = 0.25;
  CHECK(parameter_sparsity(net) == 2);
  CHECK(weight_bound(net) == 3.5);
}

TEST_CASE("json round-trip is value-exact") {
  const MlpNetwork net = random_net({4, 7, 3}, 61);
  const MlpNetwork back = mlp_from_json(mlp_to_json(net));
  REQUIRE(back.layer_dims == net.layer_dims);
  for (std::size_t layer = 0; layer < net.weights.size(); ++layer) {
    for (Eigen::Index r = 0; r < net.weights[layer].rows(); ++r) {
      for (Eigen::Index c = 0; c < net.weights[layer].cols(); ++c) {
        CHECK(back.weights[layer](r, c) == net.weights[layer](r, c));
      }
    }
    for (Eigen::Index r = 0; r < net.biases[layer].size(); ++r) {
      CHECK(back.biases[layer][r] == net.biases[layer][r]);
    }
  }

  const auto path = std::filesystem::temp_directory_path() / "bridge_nn_roundtrip.json";
  save_mlp(net, path);
  const MlpNetwork loaded = load_mlp(path);
  CHECK(loaded.layer_dims == net.layer_dims);
  CHECK((loaded.weights[0] - net.weights[0]).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove(path);
}
