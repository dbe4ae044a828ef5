#include "bridge/pretrain.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bridge/rng.hpp"

namespace bridge {

double reconstruction_loss(const EncoderDecoderPair& pair, const SampleBatch& batch) {
  if (batch.rows() == 0) throw ValidationError("reconstruction_loss: empty batch");
  if (batch.dim() != pair.ambient_dim()) {
    throw ShapeError("reconstruction_loss: batch dim != encoder input dim");
  }
  const Eigen::MatrixXd inputs = batch.points.transpose();  // d x n
  const Eigen::MatrixXd recon = forward_batch(pair.decoder, forward_batch(pair.encoder, inputs));
  return (recon - inputs).colwise().squaredNorm().mean();
}

EncoderDecoderPair pretrain(const std::vector<int>& encoder_dims,
                            const std::vector<int>& decoder_dims,
                            const SampleBatch& data, const PretrainOptions& options) {
  if (data.rows() == 0) throw ValidationError("pretrain: empty dataset");
  if (options.epochs < 1) throw ValidationError("pretrain: epochs must be >= 1");
  if (options.batch_size < 1) throw ValidationError("pretrain: batch_size must be >= 1");
  if (encoder_dims.size() < 2 || decoder_dims.size() < 2) {
    throw ShapeError("pretrain: encoder/decoder dims need at least two entries");
  }
  if (encoder_dims.front() != data.dim()) {
    throw ShapeError("pretrain: encoder input dim != data dim");
  }
  if (encoder_dims.back() != decoder_dims.front()) {
    throw ShapeError("pretrain: encoder output dim != decoder input dim");
  }
  if (decoder_dims.back() != data.dim()) {
    throw ShapeError("pretrain: decoder output dim != data dim");
  }

  EncoderDecoderPair pair;
  pair.seed = options.seed;
  pair.encoder = make_mlp(encoder_dims, derive_seed(options.seed, 0));
  pair.decoder = make_mlp(decoder_dims, derive_seed(options.seed, 1));
  AdamState enc_state = make_adam_state(pair.encoder);
  AdamState dec_state = make_adam_state(pair.decoder);
  SplitMix64 shuffle_rng(derive_seed(options.seed, 2));

  const Eigen::Index n = data.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const bool frozen = options.adam.lr == 0.0;

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    // Fisher-Yates on the visiting order.
    for (Eigen::Index i = n - 1; i > 0; --i) {
      const auto j = static_cast<Eigen::Index>(
          shuffle_rng.next_index(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }

    for (Eigen::Index start = 0; start < n; start += options.batch_size) {
      const Eigen::Index stop = std::min<Eigen::Index>(start + options.batch_size, n);
      const double inv = 1.0 / static_cast<double>(stop - start);
      GradientTape enc_tape = make_zero_tape(pair.encoder);
      GradientTape dec_tape = make_zero_tape(pair.decoder);
      for (Eigen::Index k = start; k < stop; ++k) {
        const Eigen::VectorXd y = data.points.row(order[static_cast<std::size_t>(k)]);
        const Eigen::VectorXd z = forward(pair.encoder, y);
        const Eigen::VectorXd recon = forward(pair.decoder, z);
        const Eigen::VectorXd upstream = 2.0 * inv * (recon - y);
        GradientTape dtape = backward(pair.decoder, z, upstream);
        GradientTape etape = backward(pair.encoder, y, dtape.input_grad);
        dec_tape.accumulate(dtape);
        enc_tape.accumulate(etape);
      }
      if (!frozen) {
        adam_step(pair.encoder, enc_tape, enc_state, options.adam);
        adam_step(pair.decoder, dec_tape, dec_state, options.adam);
      }
    }

    const double loss = reconstruction_loss(pair, data);
    if (!std::isfinite(loss)) {
      throw NumericError("pretrain: non-finite reconstruction loss at epoch " +
                         std::to_string(epoch));
    }
    pair.loss_history.emplace_back(epoch, loss);
  }

  pair.gamma_e_hat =
      lipschitz_estimate(pair.encoder, data, options.lipschitz_pairs, derive_seed(options.seed, 3));
  SampleBatch encoded = encode_batch(pair, data);
  pair.gamma_d_hat =
      lipschitz_estimate(pair.decoder, encoded, options.lipschitz_pairs, derive_seed(options.seed, 4));
  return pair;
}

double lipschitz_estimate(const MlpNetwork& net, const SampleBatch& probe, int pairs,
                          std::uint64_t seed) {
  if (probe.rows() == 0) throw ValidationError("lipschitz_estimate: empty probe batch");
  if (pairs < 1) throw ValidationError("lipschitz_estimate: pairs must be >= 1");
  if (probe.dim() != net.input_dim()) {
    throw ShapeError("lipschitz_estimate: probe dim != network input dim");
  }
  SplitMix64 rng(seed);
  const auto n = static_cast<std::uint64_t>(probe.rows());
  double best = 0.0;
  bool any = false;
  for (int k = 0; k < pairs; ++k) {
    const auto i = static_cast<Eigen::Index>(rng.next_index(n));
    const auto j = static_cast<Eigen::Index>(rng.next_index(n));
    const Eigen::VectorXd a = probe.points.row(i);
    const Eigen::VectorXd b = probe.points.row(j);
    const double gap = (a - b).norm();
    if (gap < 1e-12) continue;
    any = true;
    best = std::max(best, (forward(net, a) - forward(net, b)).norm() / gap);
  }
  if (!any) throw ValidationError("lipschitz_estimate: all sampled pairs degenerate");
  return best;
}

SampleBatch encode_batch(const EncoderDecoderPair& pair, const SampleBatch& batch) {
  if (batch.dim() != pair.ambient_dim()) {
    throw ShapeError("encode_batch: batch dim != encoder input dim");
  }
  SampleBatch out;
  out.points = forward_batch(pair.encoder, batch.points.transpose()).transpose();
  out.dim_tag = DimTag::Latent;
  out.seed = batch.seed;
  return out;
}

double latent_support_violation_fraction(const EncoderDecoderPair& pair,
                                         const SampleBatch& batch) {
  const SampleBatch encoded = encode_batch(pair, batch);
  Eigen::Index outside = 0;
  for (Eigen::Index i = 0; i < encoded.rows(); ++i) {
    if ((encoded.points.row(i).array().abs() > 1.0).any()) ++outside;
  }
  return static_cast<double>(outside) / static_cast<double>(encoded.rows());
}

void save_pair(const EncoderDecoderPair& pair, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_mlp(pair.encoder, dir / "encoder.json");
  save_mlp(pair.decoder, dir / "decoder.json");
  nlohmann::json manifest;
  manifest["d"] = pair.ambient_dim();
  manifest["d_star"] = pair.latent_dim();
  manifest["seed"] = pair.seed;
  manifest["final_loss"] = pair.final_loss();
  manifest["gamma_E_hat"] = pair.gamma_e_hat;
  manifest["gamma_D_hat"] = pair.gamma_d_hat;
  // Capacity metadata only; nothing enforces these during training.
  manifest["encoder_sparsity"] = parameter_sparsity(pair.encoder);
  manifest["decoder_sparsity"] = parameter_sparsity(pair.decoder);
  manifest["weight_bound"] = std::max(weight_bound(pair.encoder), weight_bound(pair.decoder));
  std::ofstream out(dir / "pair.json");
  if (!out) throw IoError("cannot write pair manifest in " + dir.string());
  out << manifest.dump(2) << "\n";
}

EncoderDecoderPair load_pair(const std::filesystem::path& dir) {
  EncoderDecoderPair pair;
  pair.encoder = load_mlp(dir / "encoder.json");
  pair.decoder = load_mlp(dir / "decoder.json");
  std::ifstream in(dir / "pair.json");
  if (!in) throw IoError("cannot read pair manifest in " + dir.string());
  nlohmann::json manifest = nlohmann::json::parse(in);
  pair.seed = manifest.at("seed").get<std::uint64_t>();
  pair.gamma_e_hat = manifest.at("gamma_E_hat").get<double>();
  pair.gamma_d_hat = manifest.at("gamma_D_hat").get<double>();
  pair.loss_history.emplace_back(0, manifest.at("final_loss").get<double>());
  if (pair.ambient_dim() != manifest.at("d").get<int>() ||
      pair.latent_dim() != manifest.at("d_star").get<int>()) {
    throw IoError("pair manifest dims do not match stored networks");
  }
  return pair;
}

}  // namespace bridge
