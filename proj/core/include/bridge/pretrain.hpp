#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "bridge/datagen.hpp"
#include "bridge/nn.hpp"

namespace bridge {

/// Encoder-decoder pair trained by reconstruction ERM, with the
/// empirical side quantities the downstream theory cares about.
struct EncoderDecoderPair {
  MlpNetwork encoder;  // d -> d_star
  MlpNetwork decoder;  // d_star -> d
  std::vector<std::pair<int, double>> loss_history;  // (epoch, full-data loss)
  double gamma_e_hat = 0.0;
  double gamma_d_hat = 0.0;
  std::uint64_t seed = 0;

  int ambient_dim() const { return encoder.input_dim(); }
  int latent_dim() const { return encoder.output_dim(); }
  double final_loss() const { return loss_history.empty() ? 0.0 : loss_history.back().second; }
};

/// Mean squared Euclidean reconstruction error over the batch.
double reconstruction_loss(const EncoderDecoderPair& pair, const SampleBatch& batch);

struct PretrainOptions {
  int epochs = 100;
  int batch_size = 32;
  AdamHyper adam{};  // lr == 0 freezes parameters (still records losses)
  std::uint64_t seed = 0;
  int lipschitz_pairs = 2048;
};

/// Minibatch Adam on the reconstruction loss. loss_history records the
/// full-data loss after each epoch; deterministic given seed.
EncoderDecoderPair pretrain(const std::vector<int>& encoder_dims,
                            const std::vector<int>& decoder_dims,
                            const SampleBatch& data, const PretrainOptions& options);

/// Empirical Lipschitz constant: max over sampled point pairs of
/// |f(a)-f(b)| / |a-b| (a lower bound on the true constant).
double lipschitz_estimate(const MlpNetwork& net, const SampleBatch& probe, int pairs,
                          std::uint64_t seed);

SampleBatch encode_batch(const EncoderDecoderPair& pair, const SampleBatch& batch);

/// Fraction of encoded points falling outside [-1,1]^{d_star}. Reported
/// rather than clipped; silent clipping would bias the score target.
double latent_support_violation_fraction(const EncoderDecoderPair& pair,
                                         const SampleBatch& batch);

/// Writes encoder.json, decoder.json and pair.json (manifest with
/// d, d_star, seed, final_loss, gamma_E_hat, gamma_D_hat) into dir.
void save_pair(const EncoderDecoderPair& pair, const std::filesystem::path& dir);
EncoderDecoderPair load_pair(const std::filesystem::path& dir);

}  // namespace bridge
