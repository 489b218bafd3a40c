#include "wavesync/sync_algebra.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <sstream>

#include "wavesync/errors.hpp"

namespace wavesync {

namespace {

void require_square(const Eigen::MatrixXd& M, int N, const char* what) {
  if (M.rows() != N || M.cols() != N) {
    std::ostringstream msg;
    msg << what << ": expected " << N << "x" << N << ", got " << M.rows()
        << "x" << M.cols();
    throw ValidationError(msg.str());
  }
}

int numerical_rank(const Eigen::MatrixXd& M, double tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(M);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > tol * s(0)) ++rank;
  return rank;
}

/// Symmetric inverse square root of an SPD matrix.
Eigen::MatrixXd inv_sqrt_spd(const Eigen::MatrixXd& G, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  if (es.info() != Eigen::Success)
    throw Error(std::string(what) + ": eigensolve failed");
  const Eigen::VectorXd& ev = es.eigenvalues();
  if (ev.minCoeff() <= 0.0)
    throw Error(std::string(what) + ": matrix not positive definite");
  Eigen::VectorXd inv_sqrt = ev.array().rsqrt();
  return es.eigenvectors() * inv_sqrt.asDiagonal() *
         es.eigenvectors().transpose();
}

}  // namespace

CompatibilityReport check_cp_compatibility(const Eigen::MatrixXd& M,
                                           const GroupPartition& partition,
                                           double tol) {
  const int N = partition.N();
  const int p = partition.p();
  require_square(M, N, "check_cp_compatibility");

  CompatibilityReport report;
  report.matrix_norm = M.norm();
  report.coefficients = Eigen::MatrixXd::Zero(p, p);
  report.worst_violation = 0.0;

  for (int s = 0; s < p; ++s) {
    for (int r = 0; r < p; ++r) {
      // Row sums of the (s, r) block; compatibility means they all agree.
      const auto block = M.block(partition.group_begin(s),
                                 partition.group_begin(r),
                                 partition.group_size(s),
                                 partition.group_size(r));
      const Eigen::VectorXd sums = block.rowwise().sum();
      const double mean = sums.mean();
      const double violation =
          (sums.array() - mean).abs().maxCoeff();
      report.coefficients(s, r) = mean;
      if (violation > report.worst_violation) {
        report.worst_violation = violation;
        report.worst_row_group = s;
        report.worst_col_group = r;
      }
    }
  }
  report.compatible = report.worst_violation <= tol * report.matrix_norm;
  return report;
}

Eigen::MatrixXd reduce_matrix(const Eigen::MatrixXd& M, const SyncMatrix& C,
                              double tol) {
  const CompatibilityReport report =
      check_cp_compatibility(M, C.partition, tol);
  if (!report.compatible) {
    std::ostringstream msg;
    msg << "matrix is not kernel-compatible: block (" << report.worst_row_group
        << "," << report.worst_col_group << ") row sums deviate by "
        << report.worst_violation;
    throw IncompatibleError(msg.str(), report.worst_row_group,
                            report.worst_col_group, report.worst_violation);
  }
  const Eigen::MatrixXd& Cp = C.entries;
  const Eigen::MatrixXd G = Cp * Cp.transpose();
  const Eigen::MatrixXd CMCt = Cp * M * Cp.transpose();
  // M_red = CMCt * G^{-1}; G is SPD (C_p has full row rank).
  return G.llt().solve(CMCt.transpose()).transpose();
}

Eigen::MatrixXd build_control_matrix(const GroupPartition& partition,
                                     ControlMatrixMode mode,
                                     const BiorthogonalFamily* family) {
  const int N = partition.N();
  const int p = partition.p();
  if (mode == ControlMatrixMode::canonical) {
    return build_sync_matrix(partition).entries.transpose();
  }
  if (family == nullptr)
    throw ValidationError("from_family mode requires a biorthogonal family");
  if (family->p() != p || family->vectors.rows() != N)
    throw ValidationError("family dimensions do not match the partition");
  // Columns: orthonormal basis of the orthogonal complement of span{E_r}.
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(family->vectors,
                                        Eigen::ComputeFullU);
  const auto& s = svd.singularValues();
  if (s(s.size() - 1) <= kRankTolerance * s(0))
    throw DegenerateFamilyError("family span has dimension below p");
  return svd.matrixU().rightCols(N - p);
}

RankReport rank_condition(const SyncMatrix& C, const Eigen::MatrixXd& D,
                          double tol) {
  if (D.rows() != C.cols())
    throw ValidationError("control matrix row count does not match N");
  RankReport report;
  report.rank = numerical_rank(C.entries * D, tol);
  report.required = C.rows();
  report.satisfied = (report.rank == report.required);
  return report;
}

SimilarityCertificate symmetric_similarity(const Eigen::MatrixXd& B,
                                           double tol) {
  if (B.rows() != B.cols())
    throw ValidationError("symmetric_similarity expects a square matrix");
  const int N = static_cast<int>(B.rows());
  const double scale = std::max(B.norm(), 1e-300);

  SimilarityCertificate cert;
  if ((B - B.transpose()).norm() <= tol * scale) {
    cert.P = Eigen::MatrixXd::Identity(N, N);
    cert.B_hat = 0.5 * (B + B.transpose());
    cert.residual = (B - cert.B_hat).norm();
    return cert;
  }

  Eigen::EigenSolver<Eigen::MatrixXd> es(B);
  if (es.info() != Eigen::Success)
    throw Error("symmetric_similarity: eigensolve failed");
  const Eigen::VectorXcd ev = es.eigenvalues();
  const double imag_max = ev.imag().cwiseAbs().maxCoeff();
  if (imag_max > tol * scale) {
    std::ostringstream msg;
    msg << "spectrum is not real: max |Im| = " << imag_max;
    throw NotRealSpectrumError(msg.str());
  }

  // Real spectrum: real parts of the eigenvectors diagonalize B (any
  // residual imaginary parts are within the tolerance just checked).
  Eigen::MatrixXd P = es.eigenvectors().real();
  for (int j = 0; j < N; ++j) {
    const double n = P.col(j).norm();
    if (n > 0) P.col(j) /= n;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(P);
  const auto& s = svd.singularValues();
  const double cond =
      s(s.size() - 1) > 0 ? s(0) / s(s.size() - 1)
                          : std::numeric_limits<double>::infinity();
  if (cond > kEigenvectorConditionLimit) {
    std::ostringstream msg;
    msg << "eigenvector matrix condition " << cond
        << " exceeds the diagonalizability threshold";
    throw NotDiagonalizableError(msg.str());
  }

  cert.P = P;
  cert.B_hat = Eigen::MatrixXd(ev.real().asDiagonal());
  cert.residual =
      (B - P * cert.B_hat * P.partialPivLu().solve(
                                Eigen::MatrixXd::Identity(N, N)))
          .norm();
  return cert;
}

SimilarityCertificate reduced_similarity(const SimilarityCertificate& cert,
                                         const SyncMatrix& C, double tol) {
  const int N = C.cols();
  if (cert.P.rows() != N)
    throw ValidationError("certificate size does not match the partition");
  // Reconstruct B and let reduce_matrix's compatibility gate decide.
  const Eigen::MatrixXd B =
      cert.P * cert.B_hat *
      cert.P.partialPivLu().solve(Eigen::MatrixXd::Identity(N, N));
  const Eigen::MatrixXd B_red_direct = reduce_matrix(B, C, tol);

  const Eigen::MatrixXd CP = C.entries * cert.P;
  const Eigen::MatrixXd S = CP * cert.B_hat * CP.transpose();  // symmetric
  const Eigen::MatrixXd G = CP * CP.transpose();               // SPD
  const Eigen::MatrixXd B_red = G.ldlt().solve(S.transpose()).transpose();

  const double cross = (B_red - B_red_direct).norm();
  const double gate = std::max(tol, 1e-9) *
                      std::max(1.0, B_red_direct.norm());
  if (cross > gate) {
    std::ostringstream msg;
    msg << "reduced-matrix construction paths disagree by " << cross;
    throw Error(msg.str());
  }

  // G^{1/2} conjugates B_red to the symmetric G^{-1/2} S G^{-1/2}.
  const Eigen::MatrixXd G_inv_sqrt = inv_sqrt_spd(G, "reduced_similarity");
  SimilarityCertificate red;
  red.B_hat = G_inv_sqrt * S * G_inv_sqrt;
  red.B_hat = 0.5 * (red.B_hat + red.B_hat.transpose());
  red.P = G_inv_sqrt.ldlt().solve(
      Eigen::MatrixXd::Identity(G.rows(), G.rows()));  // = G^{1/2}
  red.residual = (B_red - red.P * red.B_hat * G_inv_sqrt).norm();
  return red;
}

BiorthogonalFamily biorthogonal_family(const SimilarityCertificate& cert,
                                       const KernelBasis& basis) {
  const int N = basis.partition.N();
  const int p = basis.p();
  if (cert.P.rows() != N)
    throw ValidationError("certificate size does not match the kernel basis");

  const Eigen::MatrixXd Eb = basis.matrix();            // N x p
  const Eigen::MatrixXd E0 = cert.P.transpose() * (cert.P * Eb);
  const Eigen::MatrixXd G = E0.transpose() * Eb;        // p x p Gram

  Eigen::FullPivLU<Eigen::MatrixXd> lu(G);
  lu.setThreshold(kRankTolerance);
  if (lu.rank() < p)
    throw DegenerateFamilyError(
        "Gram matrix (E_r, e_s) is singular; certificate is unusable");

  BiorthogonalFamily family;
  family.vectors = E0 * lu.inverse();
  family.source_P = cert.P;
  return family;
}

InvarianceReport invariance_coefficients(const Eigen::MatrixXd& M,
                                         const BiorthogonalFamily& family,
                                         double tol) {
  const int N = static_cast<int>(family.vectors.rows());
  require_square(M, N, "invariance_coefficients");

  const Eigen::MatrixXd& E = family.vectors;           // N x p
  const Eigen::MatrixXd rhs = M.transpose() * E;       // N x p
  // Least squares E * X ~= rhs; coefficients c(r, s) = X(s, r).
  const Eigen::MatrixXd X =
      (E.transpose() * E).ldlt().solve(E.transpose() * rhs);
  InvarianceReport report;
  report.coefficients = X.transpose();
  report.residual = (rhs - E * X).norm();
  report.invariant = report.residual <= tol * std::max(M.norm(), 1e-300);
  return report;
}

TwoGroupKalman two_group_kalman(const SimilarityCertificate& cert,
                                const KernelBasis& basis,
                                const Eigen::Vector2d& D2) {
  if (basis.p() != 2)
    throw ValidationError("two_group_kalman requires exactly two groups");
  if (D2.norm() == 0.0)
    throw ValidationError("two_group_kalman requires D2 != 0");
  const Eigen::MatrixXd Pe = cert.P * basis.matrix();  // N x 2

  TwoGroupKalman k;
  k.L = Pe.transpose() * Pe;
  k.Lambda = Pe.transpose() * cert.B_hat.transpose() * Pe;
  // Lambda_ij = (B_hat P e_i, P e_j) = e_i^T P^T B_hat^T P e_j.
  const Eigen::MatrixXd L_inv_sqrt = inv_sqrt_spd(k.L, "two_group_kalman");
  k.Lambda_hat = L_inv_sqrt * k.Lambda * L_inv_sqrt;
  k.D_hat = L_inv_sqrt * D2;

  Eigen::Matrix2d kalman;
  kalman.col(0) = k.D_hat;
  kalman.col(1) = k.Lambda_hat * k.D_hat;
  k.rank = numerical_rank(kalman, kRankTolerance);
  return k;
}

ReducedSystem reduce_system(const CouplingSpec& coupling,
                            const GroupPartition& partition, double tol) {
  const SyncMatrix C = build_sync_matrix(partition);
  ReducedSystem red;
  red.A_red = reduce_matrix(coupling.A, C, tol);
  red.B_red = reduce_matrix(coupling.B, C, tol);
  red.D_red = C.entries * coupling.D;
  return red;
}

}  // namespace wavesync
