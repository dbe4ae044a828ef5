#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>

#include "bridge/errors.hpp"

namespace bridge {

enum class DimTag { Ambient, Latent };

/// Matrix of sample points (one row per point) tagged with the space it
/// lives in and the seed that produced it.
struct SampleBatch {
  Eigen::MatrixXd points;  // n x dim
  DimTag dim_tag = DimTag::Ambient;
  std::uint64_t seed = 0;

  // Generating latent coordinates, populated for embedded_manifold
  // batches so oracles can recover the ground truth.
  std::optional<Eigen::MatrixXd> latent;

  Eigen::Index rows() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
};

enum class TargetKind { UniformCube, TruncatedGaussianMixture, EmbeddedManifold };

/// Synthetic target distribution supported on [-1,1]^d.
///
/// uniform_cube: uniform on the cube (d_star must equal d).
/// truncated_gaussian_mixture: isotropic Gaussian mixture rejected
///   against the cube (d_star must equal d, centers are rows of
///   `centers`).
/// embedded_manifold: latent draw on [-1,1]^{d_star} (mixture if centers
///   are given, else uniform) pushed through the linear map `embedding`,
///   whose inf-operator norm must be <= 1 so the ambient support
///   constraint holds.
struct TargetSpec {
  TargetKind kind = TargetKind::UniformCube;
  int d = 1;
  int d_star = 1;
  Eigen::MatrixXd centers;  // k x d_star
  double std_dev = 0.25;
  Eigen::MatrixXd embedding;  // d x d_star

  void validate() const;

  /// Exact Lipschitz constant (spectral norm) of the embedding map.
  double embedding_lipschitz() const;
};

/// Mean translation of magnitude eps_shift applied to the pretrain
/// distribution, followed by re-truncation to the cube. eps_shift is a
/// direct W2 upper bound between shifted and unshifted distributions.
struct ShiftSpec {
  double eps_shift = 0.0;
};

/// Random d x d_star matrix with orthonormal columns, rescaled so the
/// inf-operator norm is <= 1 (valid TargetSpec embedding).
Eigen::MatrixXd make_embedding(int d, int d_star, std::uint64_t seed);

/// n i.i.d. ambient draws from the target; pure function of (spec, n, seed).
SampleBatch sample_target(const TargetSpec& spec, Eigen::Index n, std::uint64_t seed);

/// M i.i.d. draws from the shifted pretrain distribution, re-truncated
/// to the cube by coordinate clipping. eps_shift = 0 reproduces
/// sample_target exactly (same seed, same points).
SampleBatch sample_pretrain(const TargetSpec& spec, const ShiftSpec& shift,
                            Eigen::Index m, std::uint64_t seed);

/// Ground-truth latent coordinates recorded when an embedded_manifold
/// batch was generated.
SampleBatch true_latent(const TargetSpec& spec, const SampleBatch& ambient);

/// CSV with a `# dim_tag=...,seed=...` comment line then one row per
/// point, 17-significant-digit decimals for lossless round-trip.
void export_csv(const SampleBatch& batch, const std::filesystem::path& path);
SampleBatch import_csv(const std::filesystem::path& path);

}  // namespace bridge
