#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bridge/errors.hpp"

namespace bridge {

/// Dense feedforward ReLU network: affine maps W_i x + b_i with ReLU
/// between them and no activation after the final map. Parameters are
/// plain values; training mutates them only through the explicit step
/// functions below, so a network shared read-only is safe to evaluate
/// concurrently.
struct MlpNetwork {
  std::vector<int> layer_dims;           // d_0 .. d_L
  std::vector<Eigen::MatrixXd> weights;  // W_i is d_{i+1} x d_i
  std::vector<Eigen::VectorXd> biases;   // b_i is d_{i+1}

  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  int depth() const { return static_cast<int>(weights.size()); }

  // Throws ShapeError on inconsistent dims, NumericError on NaN/Inf.
  void validate() const;
};

/// Gradients of a scalar with respect to every network parameter.
/// Shapes mirror MlpNetwork exactly. input_grad is the gradient with
/// respect to the network input, needed when chaining networks.
struct GradientTape {
  std::vector<Eigen::MatrixXd> dweights;
  std::vector<Eigen::VectorXd> dbiases;
  Eigen::VectorXd input_grad;
  double loss = 0.0;

  void scale(double c);
  void accumulate(const GradientTape& other);
};

/// He-style initialization: weights uniform in +-sqrt(6/d_in), biases 0.
MlpNetwork make_mlp(const std::vector<int>& layer_dims, std::uint64_t seed);

// Capacity metadata in the sense of sparse network classes: the number
// of nonzero parameters and the largest parameter magnitude. Reported
// only; training never projects onto a sparsity level or weight bound.
std::int64_t parameter_sparsity(const MlpNetwork& net);
double weight_bound(const MlpNetwork& net);

GradientTape make_zero_tape(const MlpNetwork& net);

Eigen::VectorXd forward(const MlpNetwork& net, const Eigen::VectorXd& input);

/// Column-wise forward over a d_0 x B matrix of inputs.
Eigen::MatrixXd forward_batch(const MlpNetwork& net, const Eigen::MatrixXd& inputs);

/// Exact reverse-mode gradients of <upstream, forward(net, input)>.
/// The ReLU subgradient at 0 is taken to be 0.
GradientTape backward(const MlpNetwork& net, const Eigen::VectorXd& input,
                      const Eigen::VectorXd& upstream);

/// theta <- theta - lr * g. Throws NumericError on non-finite gradients.
void sgd_step(MlpNetwork& net, const GradientTape& tape, double lr);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Eigen::MatrixXd> m_weights, v_weights;
  std::vector<Eigen::VectorXd> m_biases, v_biases;
  std::int64_t step = 0;
};

AdamState make_adam_state(const MlpNetwork& net);

/// Bias-corrected Adam update: theta -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(MlpNetwork& net, const GradientTape& tape, AdamState& state,
               const AdamHyper& hyper);

/// JSON document {format_version, layer_dims, weights (row-major), biases}.
/// Round-trips are value-exact for finite doubles.
std::string mlp_to_json(const MlpNetwork& net);
MlpNetwork mlp_from_json(const std::string& text);

void save_mlp(const MlpNetwork& net, const std::filesystem::path& path);
MlpNetwork load_mlp(const std::filesystem::path& path);

}  // namespace bridge
