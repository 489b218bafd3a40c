#pragma once

#include <Eigen/Dense>

#include "wavesync/partition.hpp"

namespace wavesync {

/// Matrices (A, B, D) of the coupled system: internal coupling, boundary
/// coupling, and the N x M control matrix.
struct CouplingSpec {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd D;

  int N() const { return static_cast<int>(A.rows()); }
  int M() const { return static_cast<int>(D.cols()); }
};

struct CompatibilityReport {
  bool compatible = false;
  Eigen::MatrixXd coefficients;  // p x p, alpha(s,r) = block-row sum of
                                 // group-r columns for rows in group s
  int worst_row_group = -1;
  int worst_col_group = -1;
  double worst_violation = 0.0;
  double matrix_norm = 0.0;  // Frobenius norm used for the relative gate
};

struct ReducedSystem {
  Eigen::MatrixXd A_red;  // (N-p) x (N-p)
  Eigen::MatrixXd B_red;
  Eigen::MatrixXd D_red;  // (N-p) x M, equals C_p * D exactly
};

/// Certificate that B = P * B_hat * P^{-1} with B_hat symmetric.
struct SimilarityCertificate {
  Eigen::MatrixXd P;
  Eigen::MatrixXd B_hat;
  double residual = 0.0;  // ||B - P B_hat P^{-1}||_F achieved
};

/// Vectors E_1..E_p with (E_r, e_s) = delta_rs after Gram normalization.
struct BiorthogonalFamily {
  Eigen::MatrixXd vectors;  // N x p, column r is E_r
  Eigen::MatrixXd source_P; // the P used to build the family

  int p() const { return static_cast<int>(vectors.cols()); }
};

struct RankReport {
  int rank = 0;       // numerical rank of C_p D
  int required = 0;   // N - p
  bool satisfied = false;
};

struct InvarianceReport {
  bool invariant = false;
  Eigen::MatrixXd coefficients;  // p x p, M^T E_r ~= sum_s c(r,s) E_s
  double residual = 0.0;
};

struct TwoGroupKalman {
  Eigen::Matrix2d L;
  Eigen::Matrix2d Lambda;
  Eigen::Matrix2d Lambda_hat;
  Eigen::Vector2d D_hat;
  int rank = 0;
};

/// Numerical-rank cutoff: singular values below rank_tolerance * sigma_max
/// count as zero.
inline constexpr double kRankTolerance = 1e-8;
/// Eigenvector-matrix condition number above which a matrix is treated as
/// defective (not diagonalizable).
inline constexpr double kEigenvectorConditionLimit = 1e8;

/// Block row-sum test: compatible iff every group-pair block of M has equal
/// row sums (within tol * ||M||_F). Equivalent to M mapping the kernel of
/// the sync matrix into itself.
CompatibilityReport check_cp_compatibility(const Eigen::MatrixXd& M,
                                           const GroupPartition& partition,
                                           double tol = 1e-9);

/// M_red = C_p M C_p^T (C_p C_p^T)^{-1}; the unique matrix with
/// C_p M = M_red C_p once compatibility holds. Throws IncompatibleError
/// carrying the worst block pair otherwise.
Eigen::MatrixXd reduce_matrix(const Eigen::MatrixXd& M, const SyncMatrix& C,
                              double tol = 1e-9);

enum class ControlMatrixMode { canonical, from_family };

/// canonical: D = C_p^T. from_family: columns form an orthonormal basis of
/// the orthogonal complement of span{E_r}. Both give
/// rank(D) = rank(C_p D) = N - p.
Eigen::MatrixXd build_control_matrix(const GroupPartition& partition,
                                     ControlMatrixMode mode,
                                     const BiorthogonalFamily* family = nullptr);

RankReport rank_condition(const SyncMatrix& C, const Eigen::MatrixXd& D,
                          double tol = kRankTolerance);

/// Decides "similar to a real symmetric matrix" as "diagonalizable with real
/// spectrum". Canonical construction: P = eigenvectors, B_hat = diag of
/// eigenvalues; symmetric input short-circuits to P = I, B_hat = B.
SimilarityCertificate symmetric_similarity(const Eigen::MatrixXd& B,
                                           double tol = 1e-9);

/// Certificate for the reduced matrix, built from the explicit formula
/// B_red = (C_p P) B_hat (C_p P)^T G^{-1} with G = C_p P P^T C_p^T, which is
/// similar to the symmetric matrix G^{-1/2} (C_p P) B_hat (C_p P)^T G^{-1/2}.
SimilarityCertificate reduced_similarity(const SimilarityCertificate& cert,
                                         const SyncMatrix& C,
                                         double tol = 1e-9);

/// E_r = P^T P e_r mixed by the inverse Gram matrix so (E_r, e_s) = delta_rs.
BiorthogonalFamily biorthogonal_family(const SimilarityCertificate& cert,
                                       const KernelBasis& basis);

/// Least-squares solve of M^T E_r ~= sum_s c(r,s) E_s over the family span;
/// invariant iff the residual is <= tol * ||M||_F.
InvarianceReport invariance_coefficients(const Eigen::MatrixXd& M,
                                         const BiorthogonalFamily& family,
                                         double tol = 1e-9);

/// Two-group objects L_ij = (P e_i, P e_j), Lambda_ij = (B_hat P e_i, P e_j),
/// Lambda_hat = L^{-1/2} Lambda L^{-1/2}, D_hat = L^{-1/2} D2, and the
/// numerical rank of [D_hat | Lambda_hat D_hat].
TwoGroupKalman two_group_kalman(const SimilarityCertificate& cert,
                                const KernelBasis& basis,
                                const Eigen::Vector2d& D2);

/// Reduces A, B, D against the partition in one shot (shared validation).
ReducedSystem reduce_system(const CouplingSpec& coupling,
                            const GroupPartition& partition,
                            double tol = 1e-9);

}  // namespace wavesync
