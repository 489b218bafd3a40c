#pragma once

// Shared deterministic generators for the test suites. Every generator takes
// an explicit RNG so each TEST_CASE seeds its own reproducible stream.

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "wavesync/partition.hpp"
#include "wavesync/sync_algebra.hpp"

namespace testsupport {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int rows, int cols,
                                     double scale = 1.0) {
  std::uniform_real_distribution<double> unif(-scale, scale);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = unif(rng);
  return m;
}

/// Random partition of N into contiguous groups of size >= 2.
inline wavesync::GroupPartition random_partition(std::mt19937_64& rng, int N) {
  std::vector<int> breaks{0};
  int at = 0;
  std::uniform_int_distribution<int> step(2, 4);
  while (at < N) {
    int s = step(rng);
    if (N - at - s == 1) s += 1;  // never strand a size-1 tail
    if (at + s > N) s = N - at;
    at += s;
    breaks.push_back(at);
  }
  return wavesync::make_partition(breaks);
}

/// Exactly kernel-compatible matrix: rows of X C_p leave the kernel alone
/// and E Gamma E^T acts inside the span of the group indicators.
inline Eigen::MatrixXd compatible_matrix(std::mt19937_64& rng,
                                         const wavesync::GroupPartition& part) {
  const wavesync::SyncMatrix C = wavesync::build_sync_matrix(part);
  const Eigen::MatrixXd E = wavesync::kernel_basis(part).matrix();
  const int N = part.N();
  const int p = part.p();
  const Eigen::MatrixXd X = random_matrix(rng, N, N - p);
  const Eigen::MatrixXd Gamma = random_matrix(rng, p, p);
  return X * C.entries + E * Gamma * E.transpose();
}

/// Symmetric compatible matrix: symmetric pieces acting inside the kernel
/// span and inside its orthogonal complement (the row space of C_p).
inline Eigen::MatrixXd symmetric_compatible_matrix(
    std::mt19937_64& rng, const wavesync::GroupPartition& part) {
  const wavesync::SyncMatrix C = wavesync::build_sync_matrix(part);
  const Eigen::MatrixXd E = wavesync::kernel_basis(part).matrix();
  const int p = part.p();
  const int q = C.rows();
  Eigen::MatrixXd Gs = random_matrix(rng, p, p);
  Gs = 0.5 * (Gs + Gs.transpose()).eval();
  Eigen::MatrixXd Y = random_matrix(rng, q, q);
  Y = 0.5 * (Y + Y.transpose()).eval();
  return E * Gs * E.transpose() + C.entries.transpose() * Y * C.entries;
}

/// Similar-to-symmetric compatible matrix: conjugates a symmetric compatible
/// core by a kernel-preserving, moderately conditioned change of basis.
inline Eigen::MatrixXd simsym_compatible_matrix(
    std::mt19937_64& rng, const wavesync::GroupPartition& part) {
  const wavesync::SyncMatrix C = wavesync::build_sync_matrix(part);
  const Eigen::MatrixXd E = wavesync::kernel_basis(part).matrix();
  const int N = part.N();
  const int p = part.p();
  const Eigen::MatrixXd B_sym = symmetric_compatible_matrix(rng, part);

  Eigen::MatrixXd V(N, N);  // [E | C_p^T]: kernel span then its complement
  V.leftCols(p) = E;
  V.rightCols(N - p) = C.entries.transpose();
  Eigen::MatrixXd block = Eigen::MatrixXd::Zero(N, N);
  block.topLeftCorner(p, p) =
      Eigen::MatrixXd::Identity(p, p) + 0.3 * random_matrix(rng, p, p);
  block.bottomRightCorner(N - p, N - p) =
      Eigen::MatrixXd::Identity(N - p, N - p) +
      0.3 * random_matrix(rng, N - p, N - p);
  const Eigen::MatrixXd Q = V * block * V.inverse();
  return Q * B_sym * Q.inverse();
}

/// Projector-based compatibility oracle, independent of the row-sum path:
/// M is kernel-compatible iff (I - Pi) M e_r vanishes for every indicator,
/// with Pi the orthogonal projector onto the indicator span.
inline bool projector_oracle_compatible(const Eigen::MatrixXd& M,
                                        const wavesync::GroupPartition& part,
                                        double tol) {
  const Eigen::MatrixXd E = wavesync::kernel_basis(part).matrix();
  const Eigen::MatrixXd Pi =
      E * (E.transpose() * E).ldlt().solve(E.transpose());
  const int N = part.N();
  const Eigen::MatrixXd resid =
      (Eigen::MatrixXd::Identity(N, N) - Pi) * M * E;
  return resid.colwise().norm().maxCoeff() <= tol * std::max(M.norm(), 1e-300);
}

}  // namespace testsupport
