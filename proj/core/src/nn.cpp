#include "bridge/nn.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bridge/rng.hpp"

namespace bridge {

namespace {

bool all_finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

void check_tape_shapes(const MlpNetwork& net, const GradientTape& tape) {
  if (tape.dweights.size() != net.weights.size() ||
      tape.dbiases.size() != net.biases.size()) {
    throw ShapeError("gradient tape layer count does not match network");
  }
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    if (tape.dweights[i].rows() != net.weights[i].rows() ||
        tape.dweights[i].cols() != net.weights[i].cols() ||
        tape.dbiases[i].size() != net.biases[i].size()) {
      throw ShapeError("gradient tape shape mismatch at layer " + std::to_string(i));
    }
  }
}

void check_tape_finite(const GradientTape& tape) {
  for (const auto& g : tape.dweights) {
    if (!all_finite(g)) throw NumericError("non-finite weight gradient");
  }
  for (const auto& g : tape.dbiases) {
    if (!g.allFinite()) throw NumericError("non-finite bias gradient");
  }
}

void check_params_finite(const MlpNetwork& net) {
  for (const auto& w : net.weights) {
    if (!all_finite(w)) throw NumericError("non-finite weight after step");
  }
  for (const auto& b : net.biases) {
    if (!b.allFinite()) throw NumericError("non-finite bias after step");
  }
}

}  // namespace

void MlpNetwork::validate() const {
  if (layer_dims.size() < 2) {
    throw ShapeError("network needs at least input and output dims");
  }
  const std::size_t n_layers = layer_dims.size() - 1;
  if (weights.size() != n_layers || biases.size() != n_layers) {
    throw ShapeError("weight/bias count does not match layer_dims");
  }
  for (std::size_t i = 0; i < n_layers; ++i) {
    if (layer_dims[i] <= 0) throw ShapeError("non-positive layer dimension");
    if (weights[i].rows() != layer_dims[i + 1] || weights[i].cols() != layer_dims[i]) {
      throw ShapeError("weight shape mismatch at layer " + std::to_string(i));
    }
    if (biases[i].size() != layer_dims[i + 1]) {
      throw ShapeError("bias shape mismatch at layer " + std::to_string(i));
    }
  }
  check_params_finite(*this);
}

void GradientTape::scale(double c) {
  for (auto& g : dweights) g *= c;
  for (auto& g : dbiases) g *= c;
  if (input_grad.size() > 0) input_grad *= c;
  loss *= c;
}

void GradientTape::accumulate(const GradientTape& other) {
  for (std::size_t i = 0; i < dweights.size(); ++i) {
    dweights[i] += other.dweights[i];
    dbiases[i] += other.dbiases[i];
  }
  if (input_grad.size() > 0 && other.input_grad.size() == input_grad.size()) {
    input_grad += other.input_grad;
  }
  loss += other.loss;
}

MlpNetwork make_mlp(const std::vector<int>& layer_dims, std::uint64_t seed) {
  if (layer_dims.size() < 2) {
    throw ShapeError("network needs at least input and output dims");
  }
  MlpNetwork net;
  net.layer_dims = layer_dims;
  SplitMix64 rng(seed);
  for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
    const int rows = layer_dims[i + 1];
    const int cols = layer_dims[i];
    if (rows <= 0 || cols <= 0) throw ShapeError("non-positive layer dimension");
    const double bound = std::sqrt(6.0 / static_cast<double>(cols));
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        w(r, c) = rng.next_uniform(-bound, bound);
      }
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(rows));
  }
  return net;
}

std::int64_t parameter_sparsity(const MlpNetwork& net) {
  std::int64_t nonzero = 0;
  for (const auto& w : net.weights) nonzero += (w.array() != 0.0).count();
  for (const auto& b : net.biases) nonzero += (b.array() != 0.0).count();
  return nonzero;
}

double weight_bound(const MlpNetwork& net) {
  double bound = 0.0;
  for (const auto& w : net.weights) bound = std::max(bound, w.cwiseAbs().maxCoeff());
  for (const auto& b : net.biases) {
    if (b.size() > 0) bound = std::max(bound, b.cwiseAbs().maxCoeff());
  }
  return bound;
}

GradientTape make_zero_tape(const MlpNetwork& net) {
  GradientTape tape;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    tape.dweights.push_back(Eigen::MatrixXd::Zero(net.weights[i].rows(), net.weights[i].cols()));
    tape.dbiases.push_back(Eigen::VectorXd::Zero(net.biases[i].size()));
  }
  tape.input_grad = Eigen::VectorXd::Zero(net.input_dim());
  return tape;
}

Eigen::VectorXd forward(const MlpNetwork& net, const Eigen::VectorXd& input) {
  if (input.size() != net.input_dim()) {
    throw ShapeError("forward: input length " + std::to_string(input.size()) +
                     " != d_0 " + std::to_string(net.input_dim()));
  }
  Eigen::VectorXd h = input;
  const int L = net.depth();
  for (int i = 0; i < L; ++i) {
    Eigen::VectorXd pre = net.weights[i] * h + net.biases[i];
    h = (i + 1 < L) ? pre.cwiseMax(0.0).eval() : pre;
  }
  return h;
}

Eigen::MatrixXd forward_batch(const MlpNetwork& net, const Eigen::MatrixXd& inputs) {
  if (inputs.rows() != net.input_dim()) {
    throw ShapeError("forward_batch: input rows != d_0");
  }
  Eigen::MatrixXd h = inputs;
  const int L = net.depth();
  for (int i = 0; i < L; ++i) {
    Eigen::MatrixXd pre = (net.weights[i] * h).colwise() + net.biases[i];
    h = (i + 1 < L) ? pre.cwiseMax(0.0).eval() : pre;
  }
  return h;
}

GradientTape backward(const MlpNetwork& net, const Eigen::VectorXd& input,
                      const Eigen::VectorXd& upstream) {
  if (input.size() != net.input_dim()) {
    throw ShapeError("backward: input length != d_0");
  }
  if (upstream.size() != net.output_dim()) {
    throw ShapeError("backward: upstream length " + std::to_string(upstream.size()) +
                     " != d_L " + std::to_string(net.output_dim()));
  }
  const int L = net.depth();
  // Forward pass, keeping every layer input and pre-activation.
  std::vector<Eigen::VectorXd> layer_in(L);  // z_i fed into affine map i
  std::vector<Eigen::VectorXd> pre(L);
  Eigen::VectorXd h = input;
  for (int i = 0; i < L; ++i) {
    layer_in[i] = h;
    pre[i] = net.weights[i] * h + net.biases[i];
    h = (i + 1 < L) ? pre[i].cwiseMax(0.0).eval() : pre[i];
  }

  GradientTape tape;
  tape.dweights.resize(L);
  tape.dbiases.resize(L);
  tape.loss = upstream.dot(h);

  Eigen::VectorXd g = upstream;  // dL/d pre_i
  for (int i = L - 1; i >= 0; --i) {
    tape.dweights[i] = g * layer_in[i].transpose();
    tape.dbiases[i] = g;
    Eigen::VectorXd gin = net.weights[i].transpose() * g;
    if (i > 0) {
      // ReLU mask; derivative at exactly 0 is 0.
      g = (pre[i - 1].array() > 0.0).select(gin, 0.0);
    } else {
      tape.input_grad = gin;
    }
  }
  return tape;
}

void sgd_step(MlpNetwork& net, const GradientTape& tape, double lr) {
  if (!(lr > 0.0)) throw ValidationError("sgd_step: lr must be > 0");
  check_tape_shapes(net, tape);
  check_tape_finite(tape);
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    net.weights[i] -= lr * tape.dweights[i];
    net.biases[i] -= lr * tape.dbiases[i];
  }
  check_params_finite(net);
}

AdamState make_adam_state(const MlpNetwork& net) {
  AdamState st;
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    st.m_weights.push_back(Eigen::MatrixXd::Zero(net.weights[i].rows(), net.weights[i].cols()));
    st.v_weights.push_back(Eigen::MatrixXd::Zero(net.weights[i].rows(), net.weights[i].cols()));
    st.m_biases.push_back(Eigen::VectorXd::Zero(net.biases[i].size()));
    st.v_biases.push_back(Eigen::VectorXd::Zero(net.biases[i].size()));
  }
  return st;
}

void adam_step(MlpNetwork& net, const GradientTape& tape, AdamState& state,
               const AdamHyper& hyper) {
  if (!(hyper.lr > 0.0)) throw ValidationError("adam_step: lr must be > 0");
  check_tape_shapes(net, tape);
  if (state.m_weights.size() != net.weights.size()) {
    throw ShapeError("adam state layer count does not match network");
  }
  check_tape_finite(tape);

  state.step += 1;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < net.weights.size(); ++i) {
    auto& mw = state.m_weights[i];
    auto& vw = state.v_weights[i];
    mw = hyper.beta1 * mw + (1.0 - hyper.beta1) * tape.dweights[i];
    vw = hyper.beta2 * vw + (1.0 - hyper.beta2) * tape.dweights[i].cwiseProduct(tape.dweights[i]);
    net.weights[i].array() -=
        hyper.lr * (mw.array() / c1) / ((vw.array() / c2).sqrt() + hyper.eps);

    auto& mb = state.m_biases[i];
    auto& vb = state.v_biases[i];
    mb = hyper.beta1 * mb + (1.0 - hyper.beta1) * tape.dbiases[i];
    vb = hyper.beta2 * vb + (1.0 - hyper.beta2) * tape.dbiases[i].cwiseProduct(tape.dbiases[i]);
    net.biases[i].array() -=
        hyper.lr * (mb.array() / c1) / ((vb.array() / c2).sqrt() + hyper.eps);
  }
  check_params_finite(net);
}

std::string mlp_to_json(const MlpNetwork& net) {
  nlohmann::json doc;
  doc["format_version"] = 1;
  doc["layer_dims"] = net.layer_dims;
  auto& weights = doc["weights"] = nlohmann::json::array();
  for (const auto& w : net.weights) {
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    }
    weights.push_back(std::move(flat));
  }
  auto& biases = doc["biases"] = nlohmann::json::array();
  for (const auto& b : net.biases) {
    biases.push_back(std::vector<double>(b.data(), b.data() + b.size()));
  }
  return doc.dump();
}

MlpNetwork mlp_from_json(const std::string& text) {
  nlohmann::json doc = nlohmann::json::parse(text);
  if (doc.at("format_version").get<int>() != 1) {
    throw IoError("unsupported model format_version");
  }
  MlpNetwork net;
  net.layer_dims = doc.at("layer_dims").get<std::vector<int>>();
  const auto& weights = doc.at("weights");
  const auto& biases = doc.at("biases");
  for (std::size_t i = 0; i + 1 < net.layer_dims.size(); ++i) {
    const int rows = net.layer_dims[i + 1];
    const int cols = net.layer_dims[i];
    const auto flat = weights.at(i).get<std::vector<double>>();
    if (flat.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
      throw IoError("weight array size mismatch at layer " + std::to_string(i));
    }
    Eigen::MatrixXd w(rows, cols);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) w(r, c) = flat[static_cast<std::size_t>(r) * cols + c];
    }
    net.weights.push_back(std::move(w));
    const auto bv = biases.at(i).get<std::vector<double>>();
    if (bv.size() != static_cast<std::size_t>(rows)) {
      throw IoError("bias array size mismatch at layer " + std::to_string(i));
    }
    net.biases.push_back(Eigen::Map<const Eigen::VectorXd>(bv.data(), rows));
  }
  net.validate();
  return net;
}

void save_mlp(const MlpNetwork& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << mlp_to_json(net) << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

MlpNetwork load_mlp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return mlp_from_json(ss.str());
}

}  // namespace bridge
