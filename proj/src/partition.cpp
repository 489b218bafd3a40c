#include "wavesync/partition.hpp"

#include <sstream>

#include "wavesync/errors.hpp"

namespace wavesync {

GroupPartition make_partition(const std::vector<int>& breakpoints,
                              bool allow_small_blocks) {
  if (breakpoints.size() < 2)
    throw ValidationError("partition needs at least two breakpoints");
  if (breakpoints.front() != 0)
    throw ValidationError("partition must start at 0");
  const int min_block = allow_small_blocks ? 1 : 2;
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    const int size = breakpoints[i] - breakpoints[i - 1];
    if (size <= 0) throw ValidationError("breakpoints must strictly increase");
    if (size < min_block) {
      std::ostringstream msg;
      msg << "group " << i << " has size " << size << " < " << min_block
          << " (pass allow_small_blocks to permit size-1 groups)";
      throw ValidationError(msg.str());
    }
  }
  return GroupPartition{breakpoints};
}

Eigen::MatrixXd KernelBasis::matrix() const {
  const int N = partition.N();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(N, p());
  for (int r = 0; r < p(); ++r) m.col(r) = vectors[r];
  return m;
}

SyncMatrix build_sync_matrix(const GroupPartition& partition) {
  const int N = partition.N();
  const int p = partition.p();
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(N - p, N);
  int row = 0;
  for (int r = 0; r < p; ++r) {
    for (int i = partition.group_begin(r); i + 1 < partition.group_end(r);
         ++i) {
      C(row, i) = 1.0;
      C(row, i + 1) = -1.0;
      ++row;
    }
  }
  return SyncMatrix{std::move(C), partition};
}

KernelBasis kernel_basis(const GroupPartition& partition) {
  const int N = partition.N();
  KernelBasis basis;
  basis.partition = partition;
  basis.vectors.reserve(partition.p());
  for (int r = 0; r < partition.p(); ++r) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(N);
    e.segment(partition.group_begin(r), partition.group_size(r)).setOnes();
    basis.vectors.push_back(std::move(e));
  }
  return basis;
}

}  // namespace wavesync
