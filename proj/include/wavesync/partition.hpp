#pragma once

#include <Eigen/Dense>
#include <vector>

namespace wavesync {

/// Division 0 = n_0 < n_1 < ... < n_p = N of the N components into p
/// contiguous groups. Group r (1-based in the math, 0-based here) covers
/// component indices [breakpoints[r], breakpoints[r+1]).
struct GroupPartition {
  std::vector<int> breakpoints;

  int N() const { return breakpoints.back(); }
  int p() const { return static_cast<int>(breakpoints.size()) - 1; }
  int group_begin(int r) const { return breakpoints[r]; }
  int group_end(int r) const { return breakpoints[r + 1]; }
  int group_size(int r) const { return group_end(r) - group_begin(r); }
};

/// Validating constructor. Blocks of size 1 are rejected unless
/// allow_small_blocks is set; everything downstream works either way.
GroupPartition make_partition(const std::vector<int>& breakpoints,
                              bool allow_small_blocks = false);

/// The (N-p) x N block-diagonal matrix whose blocks take consecutive
/// differences inside each group. Its kernel is exactly the span of the
/// group indicator vectors.
struct SyncMatrix {
  Eigen::MatrixXd entries;  // (N-p) x N
  GroupPartition partition;

  int rows() const { return static_cast<int>(entries.rows()); }
  int cols() const { return static_cast<int>(entries.cols()); }
};

/// Indicator vectors e_1..e_p of the groups; they span Ker(C_p).
struct KernelBasis {
  std::vector<Eigen::VectorXd> vectors;
  GroupPartition partition;

  int p() const { return static_cast<int>(vectors.size()); }
  /// N x p matrix with e_r as columns.
  Eigen::MatrixXd matrix() const;
};

SyncMatrix build_sync_matrix(const GroupPartition& partition);
KernelBasis kernel_basis(const GroupPartition& partition);

}  // namespace wavesync
