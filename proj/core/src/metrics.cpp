#include "bridge/metrics.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <limits>

#include "bridge/rng.hpp"

namespace bridge {

Eigen::MatrixXd squared_distance_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw ValidationError("point sets have different dimension");
  Eigen::MatrixXd cost(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      cost(i, j) = (a.row(i) - b.row(j)).squaredNorm();
    }
  }
  return cost;
}

Assignment solve_assignment(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) throw ValidationError("cost matrix must be square");
  const int n = static_cast<int>(cost.rows());
  if (n == 0) return {};
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // 1-indexed potentials; p[j] is the row matched to column j, column 0
  // is the virtual start of each augmenting path.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), char{0});
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment out;
  out.permutation.assign(n, -1);
  for (int j = 1; j <= n; ++j) out.permutation[p[j] - 1] = j - 1;
  for (int i = 0; i < n; ++i) out.total_cost += cost(i, out.permutation[i]);
  return out;
}

double w2_exact(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols()) throw ValidationError("w2_exact: dimension mismatch");
  if (a.rows() != b.rows()) throw ValidationError("w2_exact: batches must have equal size");
  if (a.rows() == 0) throw ValidationError("w2_exact: empty batches");
  if (a.rows() > kW2ExactCap) {
    throw CapacityError("w2_exact: n > " + std::to_string(kW2ExactCap) +
                        "; use w2_sliced for batches this large");
  }
  const Assignment assignment = solve_assignment(squared_distance_matrix(a, b));
  // Summing the matched costs in sorted order makes the value exactly
  // symmetric in (a, b): either order sums the same multiset.
  std::vector<double> matched(assignment.permutation.size());
  for (std::size_t i = 0; i < matched.size(); ++i) {
    matched[i] = (a.row(static_cast<Eigen::Index>(i)) - b.row(assignment.permutation[i]))
                     .squaredNorm();
  }
  std::sort(matched.begin(), matched.end());
  double total = 0.0;
  for (const double c : matched) total += c;
  return std::sqrt(total / static_cast<double>(a.rows()));
}

double w2_exact(const SampleBatch& a, const SampleBatch& b) {
  return w2_exact(a.points, b.points);
}

double w2_sliced(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, int projections,
                 std::uint64_t seed) {
  if (a.cols() != b.cols()) throw ValidationError("w2_sliced: dimension mismatch");
  if (a.rows() != b.rows()) throw ValidationError("w2_sliced: batches must have equal size");
  if (a.rows() == 0) throw ValidationError("w2_sliced: empty batches");
  if (projections < 1) throw ValidationError("w2_sliced: projections must be >= 1");

  const Eigen::Index n = a.rows();
  const Eigen::Index dim = a.cols();
  SplitMix64 rng(seed);
  std::vector<double> pa(static_cast<std::size_t>(n)), pb(static_cast<std::size_t>(n)),
      sq(static_cast<std::size_t>(n));
  double mean_sq = 0.0;
  for (int s = 0; s < projections; ++s) {
    Eigen::VectorXd dir(dim);
    double norm = 0.0;
    do {
      for (Eigen::Index j = 0; j < dim; ++j) dir[j] = rng.next_normal();
      norm = dir.norm();
    } while (norm < 1e-12);
    dir /= norm;

    for (Eigen::Index i = 0; i < n; ++i) {
      pa[static_cast<std::size_t>(i)] = a.row(i).dot(dir);
      pb[static_cast<std::size_t>(i)] = b.row(i).dot(dir);
    }
    std::sort(pa.begin(), pa.end());
    std::sort(pb.begin(), pb.end());
    for (std::size_t i = 0; i < sq.size(); ++i) {
      const double diff = pa[i] - pb[i];
      sq[i] = diff * diff;
    }
    // Same sorted-order summation as w2_exact, so the two agree exactly
    // in one dimension.
    std::sort(sq.begin(), sq.end());
    double acc = 0.0;
    for (const double v : sq) acc += v;
    mean_sq += acc / static_cast<double>(n);
  }
  // dim factor: E<v,theta>^2 = |v|^2/dim for random unit directions, so
  // this calibration recovers isotropic W2 differences at full scale
  // (and is exactly 1 in one dimension).
  return std::sqrt(static_cast<double>(dim) * mean_sq / projections);
}

double w2_sliced(const SampleBatch& a, const SampleBatch& b, int projections,
                 std::uint64_t seed) {
  return w2_sliced(a.points, b.points, projections, seed);
}

BatchSummary summary(const SampleBatch& batch) {
  if (batch.rows() == 0) throw ValidationError("summary: empty batch");
  BatchSummary s;
  s.mean = batch.points.colwise().mean();
  Eigen::MatrixXd centered = batch.points.rowwise() - s.mean.transpose();
  s.std_dev = (centered.array().square().colwise().mean()).sqrt();
  s.max_inf_norm = batch.points.cwiseAbs().maxCoeff();
  s.support_violations = 0;
  for (Eigen::Index i = 0; i < batch.rows(); ++i) {
    if ((batch.points.row(i).array().abs() > 1.0).any()) ++s.support_violations;
  }
  return s;
}

MetricsLedger::MetricsLedger(std::filesystem::path path) : path_(std::move(path)) {
  if (!std::filesystem::exists(path_)) {
    std::FILE* f = std::fopen(path_.string().c_str(), "w");
    if (!f) throw IoError("cannot create ledger " + path_.string());
    std::fputs("run_id,stage,metric_name,value,n,seed\n", f);
    std::fclose(f);
  }
}

void MetricsLedger::append(const std::string& run_id, const std::string& stage,
                           const std::string& metric_name, double value, Eigen::Index n,
                           std::uint64_t seed) {
  std::FILE* f = std::fopen(path_.string().c_str(), "a");
  if (!f) throw IoError("cannot open ledger " + path_.string());
  std::fprintf(f, "%s,%s,%s,%.17g,%td,%" PRIu64 "\n", run_id.c_str(), stage.c_str(),
               metric_name.c_str(), value, static_cast<std::ptrdiff_t>(n), seed);
  if (std::fclose(f) != 0) throw IoError("ledger write failed");
}

}  // namespace bridge
