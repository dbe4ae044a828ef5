#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bridge/datagen.hpp"

namespace bridge {

/// Pairwise squared Euclidean distances, C(i,j) = |a_i - b_j|^2.
Eigen::MatrixXd squared_distance_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Minimum-cost perfect matching on a square cost matrix.
struct Assignment {
  std::vector<int> permutation;  // row i is matched to column permutation[i]
  double total_cost = 0.0;
};

/// Exact O(n^3) Hungarian solver (shortest augmenting paths with
/// potentials).
Assignment solve_assignment(const Eigen::MatrixXd& cost);

inline constexpr Eigen::Index kW2ExactCap = 4096;

/// Exact second-order Wasserstein distance between two equal-size
/// uniform empirical measures: sqrt of the minimal mean squared matched
/// distance over permutations.
double w2_exact(const SampleBatch& a, const SampleBatch& b);
double w2_exact(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Sliced W2 surrogate: sqrt(dim * mean over random unit directions of
/// the squared 1-D W2 of the projected samples). The sqrt(dim) factor
/// calibrates the estimator so isotropic location/scale differences
/// match w2_exact in expectation; in one dimension it reduces to the
/// plain sorted matching. Deterministic given seed.
double w2_sliced(const SampleBatch& a, const SampleBatch& b, int projections,
                 std::uint64_t seed);
double w2_sliced(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int projections,
                 std::uint64_t seed);

/// Sample statistics; std is the population convention (divide by n).
struct BatchSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd std_dev;
  double max_inf_norm = 0.0;
  Eigen::Index support_violations = 0;  // rows leaving [-1,1]^dim
};

BatchSummary summary(const SampleBatch& batch);

/// Append-only CSV ledger: run_id,stage,metric_name,value,n,seed.
class MetricsLedger {
 public:
  explicit MetricsLedger(std::filesystem::path path);

  void append(const std::string& run_id, const std::string& stage,
              const std::string& metric_name, double value, Eigen::Index n,
              std::uint64_t seed);

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace bridge
