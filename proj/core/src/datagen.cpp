#include "bridge/datagen.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "bridge/rng.hpp"

namespace bridge {

namespace {

constexpr long kRejectionCap = 1'000'000;

// One mixture draw restricted to the cube, rejection with a hard cap.
Eigen::VectorXd sample_mixture_point(const Eigen::MatrixXd& centers, double std_dev,
                                     SplitMix64& rng) {
  const int dim = static_cast<int>(centers.cols());
  for (long attempt = 0; attempt < kRejectionCap; ++attempt) {
    const auto c = static_cast<Eigen::Index>(rng.next_index(static_cast<std::uint64_t>(centers.rows())));
    Eigen::VectorXd x(dim);
    for (int j = 0; j < dim; ++j) {
      x[j] = centers(c, j) + std_dev * rng.next_normal();
    }
    if ((x.array().abs() <= 1.0).all()) return x;
  }
  throw ValidationError("mixture rejection cap exceeded; spec places almost no mass in the cube");
}

Eigen::VectorXd sample_latent_point(const TargetSpec& spec, SplitMix64& rng) {
  if (spec.centers.rows() > 0) {
    return sample_mixture_point(spec.centers, spec.std_dev, rng);
  }
  Eigen::VectorXd z(spec.d_star);
  for (int j = 0; j < spec.d_star; ++j) z[j] = rng.next_uniform(-1.0, 1.0);
  return z;
}

}  // namespace

void TargetSpec::validate() const {
  if (d < 1) throw ValidationError("ambient dim d must be >= 1");
  if (d_star < 1 || d_star > d) throw ValidationError("latent dim d_star must be in [1, d]");
  if (!(std_dev >= 0.0)) throw ValidationError("mixture std must be >= 0");
  if (centers.rows() > 0) {
    if (centers.cols() != d_star) throw ValidationError("mixture centers must have d_star columns");
    if ((centers.array().abs() > 1.0).any()) {
      throw ValidationError("mixture centers must lie in [-1,1]^{d_star}");
    }
  }
  switch (kind) {
    case TargetKind::UniformCube:
      if (d_star != d) throw ValidationError("uniform_cube requires d_star == d");
      break;
    case TargetKind::TruncatedGaussianMixture:
      if (d_star != d) throw ValidationError("truncated_gaussian_mixture requires d_star == d");
      if (centers.rows() == 0) throw ValidationError("mixture requires at least one center");
      break;
    case TargetKind::EmbeddedManifold: {
      if (embedding.rows() != d || embedding.cols() != d_star) {
        throw ValidationError("embedding must be d x d_star");
      }
      // inf-operator norm <= 1 keeps the image inside [-1,1]^d.
      const double row_l1 = embedding.cwiseAbs().rowwise().sum().maxCoeff();
      if (row_l1 > 1.0 + 1e-12) {
        throw ValidationError("embedding inf-operator norm exceeds 1; ambient support would leave the cube");
      }
      break;
    }
  }
}

double TargetSpec::embedding_lipschitz() const {
  if (embedding.size() == 0) return 0.0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(embedding);
  return svd.singularValues()[0];
}

Eigen::MatrixXd make_embedding(int d, int d_star, std::uint64_t seed) {
  if (d_star < 1 || d_star > d) throw ValidationError("make_embedding: need 1 <= d_star <= d");
  SplitMix64 rng(seed);
  Eigen::MatrixXd g(d, d_star);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d_star; ++c) g(r, c) = rng.next_normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d_star);
  const double row_l1 = q.cwiseAbs().rowwise().sum().maxCoeff();
  return q / row_l1;
}

SampleBatch sample_target(const TargetSpec& spec, Eigen::Index n, std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw ValidationError("sample_target: n must be >= 1");

  SampleBatch batch;
  batch.dim_tag = DimTag::Ambient;
  batch.seed = seed;
  batch.points.resize(n, spec.d);
  SplitMix64 rng(seed);

  switch (spec.kind) {
    case TargetKind::UniformCube:
      for (Eigen::Index i = 0; i < n; ++i) {
        for (int j = 0; j < spec.d; ++j) batch.points(i, j) = rng.next_uniform(-1.0, 1.0);
      }
      break;
    case TargetKind::TruncatedGaussianMixture:
      for (Eigen::Index i = 0; i < n; ++i) {
        batch.points.row(i) = sample_mixture_point(spec.centers, spec.std_dev, rng).transpose();
      }
      break;
    case TargetKind::EmbeddedManifold: {
      Eigen::MatrixXd latent(n, spec.d_star);
      for (Eigen::Index i = 0; i < n; ++i) {
        latent.row(i) = sample_latent_point(spec, rng).transpose();
      }
      batch.points = latent * spec.embedding.transpose();
      batch.latent = std::move(latent);
      break;
    }
  }
  return batch;
}

SampleBatch sample_pretrain(const TargetSpec& spec, const ShiftSpec& shift,
                            Eigen::Index m, std::uint64_t seed) {
  if (!(shift.eps_shift >= 0.0)) throw ValidationError("eps_shift must be >= 0");
  SampleBatch batch = sample_target(spec, m, seed);
  if (shift.eps_shift > 0.0) {
    // Translate along the unit diagonal so the pre-truncation W2 equals
    // eps_shift exactly, then clip back to the cube.
    const double per_coord = shift.eps_shift / std::sqrt(static_cast<double>(spec.d));
    batch.points.array() += per_coord;
    batch.points = batch.points.cwiseMin(1.0).cwiseMax(-1.0);
    batch.latent.reset();  // shifted points no longer match the stored latents
  }
  return batch;
}

SampleBatch true_latent(const TargetSpec& spec, const SampleBatch& ambient) {
  if (spec.kind != TargetKind::EmbeddedManifold) {
    throw UnsupportedError("true_latent is only defined for embedded_manifold specs");
  }
  if (!ambient.latent.has_value()) {
    throw ValidationError("batch carries no latent coordinates; was it generated by this spec?");
  }
  if (ambient.latent->cols() != spec.d_star) {
    throw ValidationError("stored latent dimension does not match spec");
  }
  SampleBatch out;
  out.points = *ambient.latent;
  out.dim_tag = DimTag::Latent;
  out.seed = ambient.seed;
  return out;
}

void export_csv(const SampleBatch& batch, const std::filesystem::path& path) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  std::fprintf(f, "# dim_tag=%s,seed=%" PRIu64 "\n",
               batch.dim_tag == DimTag::Ambient ? "ambient" : "latent", batch.seed);
  for (Eigen::Index i = 0; i < batch.points.rows(); ++i) {
    for (Eigen::Index j = 0; j < batch.points.cols(); ++j) {
      std::fprintf(f, j == 0 ? "%.17g" : ",%.17g", batch.points(i, j));
    }
    std::fputc('\n', f);
  }
  if (std::fclose(f) != 0) throw IoError("write failed: " + path.string());
}

SampleBatch import_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("# dim_tag=", 0) != 0) {
    throw IoError("missing dim_tag/seed header: " + path.string());
  }
  SampleBatch batch;
  const auto comma = line.find(",seed=");
  if (comma == std::string::npos) throw IoError("malformed header: " + path.string());
  const std::string tag = line.substr(10, comma - 10);
  if (tag == "ambient") {
    batch.dim_tag = DimTag::Ambient;
  } else if (tag == "latent") {
    batch.dim_tag = DimTag::Latent;
  } else {
    throw IoError("unknown dim_tag '" + tag + "'");
  }
  batch.seed = std::strtoull(line.c_str() + comma + 6, nullptr, 10);

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p < end) {
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc{}) throw IoError("bad number in " + path.string());
      row.push_back(v);
      p = (next < end && *next == ',') ? next + 1 : next;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError("ragged rows in " + path.string());
    }
    rows.push_back(std::move(row));
  }
  batch.points.resize(static_cast<Eigen::Index>(rows.size()),
                      rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      batch.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return batch;
}

}  // namespace bridge
