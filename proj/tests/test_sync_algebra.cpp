#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "test_support.hpp"
#include "wavesync/errors.hpp"
#include "wavesync/partition.hpp"
#include "wavesync/sync_algebra.hpp"

using namespace wavesync;
using testsupport::compatible_matrix;
using testsupport::projector_oracle_compatible;
using testsupport::random_matrix;
using testsupport::random_partition;
using testsupport::simsym_compatible_matrix;
using testsupport::symmetric_compatible_matrix;

namespace {

Eigen::MatrixXd mat(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd m(rows.size(), rows.begin()->size());
  int i = 0;
  for (const auto& row : rows) {
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("partition validation") {
  CHECK_THROWS_AS(make_partition({1, 3}), ValidationError);      // not from 0
  CHECK_THROWS_AS(make_partition({0, 2, 2}), ValidationError);   // not increasing
  CHECK_THROWS_AS(make_partition({0, 1, 3}), ValidationError);   // size-1 group
  CHECK_NOTHROW(make_partition({0, 1, 3}, true));
  const GroupPartition part = make_partition({0, 2, 5});
  CHECK(part.N() == 5);
  CHECK(part.p() == 2);
  CHECK(part.group_size(0) == 2);
  CHECK(part.group_size(1) == 3);
}

TEST_CASE("sync matrix: frozen small cases") {
  const SyncMatrix c22 = build_sync_matrix(make_partition({0, 2, 4}));
  CHECK((c22.entries - mat({{1, -1, 0, 0}, {0, 0, 1, -1}})).norm() == 0.0);

  const SyncMatrix c2 = build_sync_matrix(make_partition({0, 2}));
  CHECK((c2.entries - mat({{1, -1}})).norm() == 0.0);

  const SyncMatrix c33 = build_sync_matrix(make_partition({0, 3, 6}));
  CHECK(c33.rows() == 4);
  CHECK(c33.cols() == 6);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(c33.entries);
  CHECK(svd.singularValues()(3) > 1e-12);  // full row rank 4
}

TEST_CASE("kernel basis spans exactly the kernel") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const GroupPartition part = random_partition(rng, 4 + trial % 7);
    const SyncMatrix C = build_sync_matrix(part);
    const KernelBasis basis = kernel_basis(part);
    CHECK(basis.p() == part.p());
    for (const auto& e : basis.vectors)
      CHECK((C.entries * e).norm() == doctest::Approx(0.0).epsilon(1e-15));
    // dim Ker = p: rank C = N - p
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C.entries);
    CHECK(svd.singularValues()(C.rows() - 1) > 1e-12);
  }
}

TEST_CASE("compatibility: frozen worked example") {
  const GroupPartition part = make_partition({0, 2, 4});
  const Eigen::MatrixXd M =
      mat({{1, 2, 0, 0}, {2, 1, 0, 0}, {0, 0, 1, 1}, {0, 0, 1, 1}});
  const CompatibilityReport rep = check_cp_compatibility(M, part);
  CHECK(rep.compatible);
  CHECK((rep.coefficients - mat({{3, 0}, {0, 2}})).norm() == 0.0);

  const Eigen::MatrixXd M_red = reduce_matrix(M, build_sync_matrix(part));
  CHECK((M_red - mat({{-1, 0}, {0, 0}})).norm() < 1e-12);
}

TEST_CASE("compatibility: frozen negative example") {
  const GroupPartition part = make_partition({0, 2, 4});
  Eigen::VectorXd d(4);
  d << 1, 2, 1, 1;
  const CompatibilityReport rep =
      check_cp_compatibility(Eigen::MatrixXd(d.asDiagonal()), part);
  CHECK_FALSE(rep.compatible);
  CHECK(rep.worst_row_group == 0);
  CHECK(rep.worst_col_group == 0);
  CHECK_THROWS_AS(
      reduce_matrix(Eigen::MatrixXd(d.asDiagonal()), build_sync_matrix(part)),
      IncompatibleError);
}

TEST_CASE("compatibility agrees with the projector oracle") {
  std::mt19937_64 rng(202);
  int seen_compatible = 0;
  int seen_incompatible = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const GroupPartition part = random_partition(rng, 6);
    const Eigen::MatrixXd M = (trial % 2 == 0)
                                  ? compatible_matrix(rng, part)
                                  : random_matrix(rng, 6, 6);
    const bool mine = check_cp_compatibility(M, part).compatible;
    const bool oracle = projector_oracle_compatible(M, part, 1e-9);
    CHECK(mine == oracle);
    (mine ? seen_compatible : seen_incompatible) += 1;
  }
  CHECK(seen_compatible > 100);
  CHECK(seen_incompatible > 100);
}

TEST_CASE("reduction: intertwining identity and least-squares oracle") {
  std::mt19937_64 rng(303);
  for (int trial = 0; trial < 50; ++trial) {
    const GroupPartition part = random_partition(rng, 4 + trial % 6);
    const SyncMatrix C = build_sync_matrix(part);
    const Eigen::MatrixXd M = compatible_matrix(rng, part);
    const Eigen::MatrixXd M_red = reduce_matrix(M, C);

    // Defining identity C_p M = M_red C_p.
    CHECK((C.entries * M - M_red * C.entries).norm() <= 1e-10 * M.norm());

    // Independent oracle: least-squares solve of X C_p = C_p M through a QR
    // factorization (different algorithm and path than the implementation).
    const Eigen::MatrixXd Xt = C.entries.transpose()
                                   .colPivHouseholderQr()
                                   .solve((C.entries * M).transpose());
    CHECK((M_red - Xt.transpose()).norm() <= 1e-9 * std::max(1.0, M.norm()));
  }
}

TEST_CASE("control matrix: canonical and family modes") {
  const GroupPartition part = make_partition({0, 2, 4});
  const SyncMatrix C = build_sync_matrix(part);

  const Eigen::MatrixXd D_can =
      build_control_matrix(part, ControlMatrixMode::canonical);
  CHECK((D_can - C.entries.transpose()).norm() == 0.0);
  const RankReport r_can = rank_condition(C, D_can);
  CHECK(r_can.satisfied);
  CHECK(r_can.rank == 2);
  CHECK(r_can.required == 2);

  SimilarityCertificate id;
  id.P = Eigen::MatrixXd::Identity(4, 4);
  id.B_hat = Eigen::MatrixXd::Zero(4, 4);
  const BiorthogonalFamily family = biorthogonal_family(id, kernel_basis(part));
  const Eigen::MatrixXd D_fam =
      build_control_matrix(part, ControlMatrixMode::from_family, &family);
  CHECK(D_fam.cols() == 2);
  CHECK((D_fam.transpose() * D_fam - Eigen::MatrixXd::Identity(2, 2)).norm() <
        1e-12);  // orthonormal columns
  CHECK((D_fam.transpose() * family.vectors).norm() < 1e-12);  // ker(D^T) = V
  CHECK(rank_condition(C, D_fam).satisfied);

  // Control aimed inside the kernel span cannot steer the difference state.
  Eigen::MatrixXd D_bad(4, 1);
  D_bad << 1, 1, 0, 0;
  CHECK_FALSE(rank_condition(C, D_bad).satisfied);
}

TEST_CASE("similarity: frozen small cases") {
  CHECK_THROWS_AS(symmetric_similarity(mat({{0, 1}, {0, 0}})),
                  NotDiagonalizableError);
  CHECK_THROWS_AS(symmetric_similarity(mat({{0, -1}, {1, 0}})),
                  NotRealSpectrumError);

  const Eigen::MatrixXd B = mat({{2, 1}, {3, 4}});
  const SimilarityCertificate cert = symmetric_similarity(B);
  std::vector<double> ev{cert.B_hat(0, 0), cert.B_hat(1, 1)};
  std::sort(ev.begin(), ev.end());
  CHECK(ev[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ev[1] == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(cert.residual <= 1e-12 * B.norm());
  // Eigen-equation oracle: B P = P B_hat column by column.
  CHECK((B * cert.P - cert.P * cert.B_hat).norm() <= 1e-12 * B.norm());

  const Eigen::MatrixXd S = mat({{2, 1}, {1, 5}});
  const SimilarityCertificate sym = symmetric_similarity(S);
  CHECK((sym.P - Eigen::MatrixXd::Identity(2, 2)).norm() == 0.0);
  CHECK((sym.B_hat - S).norm() == 0.0);
}

TEST_CASE("similarity certificate on random diagonalizable matrices") {
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 50; ++trial) {
    const int N = 3 + trial % 5;
    // Build from a known real eigensystem with moderate conditioning.
    Eigen::MatrixXd Q =
        Eigen::MatrixXd::Identity(N, N) + 0.4 * random_matrix(rng, N, N);
    Eigen::VectorXd lam = random_matrix(rng, N, 1).col(0) * 3.0;
    const Eigen::MatrixXd B = Q * lam.asDiagonal() * Q.inverse();
    const SimilarityCertificate cert = symmetric_similarity(B);
    CHECK((B * cert.P - cert.P * cert.B_hat).norm() <=
          1e-8 * std::max(1.0, B.norm()));
    CHECK((cert.B_hat - cert.B_hat.transpose()).norm() <= 1e-12);
  }
}

TEST_CASE("biorthogonal family: identity transform and random certificates") {
  const GroupPartition part = make_partition({0, 2, 4});
  SimilarityCertificate id;
  id.P = Eigen::MatrixXd::Identity(4, 4);
  id.B_hat = Eigen::MatrixXd::Zero(4, 4);
  const KernelBasis basis = kernel_basis(part);
  const BiorthogonalFamily fam = biorthogonal_family(id, basis);
  // E_r = e_r / |e_r|^2 for P = I.
  Eigen::MatrixXd expect = basis.matrix();
  expect.col(0) /= 2.0;
  expect.col(1) /= 2.0;
  CHECK((fam.vectors - expect).norm() < 1e-14);

  std::mt19937_64 rng(505);
  for (int trial = 0; trial < 30; ++trial) {
    const GroupPartition pr = random_partition(rng, 4 + trial % 6);
    SimilarityCertificate cert;
    cert.P = Eigen::MatrixXd::Identity(pr.N(), pr.N()) +
             0.4 * random_matrix(rng, pr.N(), pr.N());
    cert.B_hat = Eigen::MatrixXd::Zero(pr.N(), pr.N());
    const KernelBasis kb = kernel_basis(pr);
    const BiorthogonalFamily f = biorthogonal_family(cert, kb);
    // Biorthogonality (E_r, e_s) = delta_rs.
    const Eigen::MatrixXd G = f.vectors.transpose() * kb.matrix();
    CHECK((G - Eigen::MatrixXd::Identity(pr.p(), pr.p())).norm() < 1e-9);
  }
}

TEST_CASE("invariance coefficients: frozen example and random invariant maps") {
  // Two singleton groups: family = standard basis; M^T maps E_1 -> E_1 + E_2
  // and E_2 -> E_2, so the coefficient rows are (1,1) and (0,1).
  const GroupPartition part = make_partition({0, 1, 2}, true);
  SimilarityCertificate id;
  id.P = Eigen::MatrixXd::Identity(2, 2);
  id.B_hat = Eigen::MatrixXd::Zero(2, 2);
  const BiorthogonalFamily fam = biorthogonal_family(id, kernel_basis(part));
  const Eigen::MatrixXd M = mat({{1, 1}, {0, 1}});
  const InvarianceReport rep = invariance_coefficients(M, fam);
  CHECK(rep.invariant);
  CHECK((rep.coefficients - mat({{1, 1}, {0, 1}})).norm() < 1e-12);

  // Random invariant construction: M^T = E X E^+ + (I - Pi) R (I - Pi).
  std::mt19937_64 rng(606);
  for (int trial = 0; trial < 30; ++trial) {
    const GroupPartition pr = random_partition(rng, 4 + trial % 5);
    SimilarityCertificate c2;
    c2.P = Eigen::MatrixXd::Identity(pr.N(), pr.N()) +
           0.3 * random_matrix(rng, pr.N(), pr.N());
    c2.B_hat = Eigen::MatrixXd::Zero(pr.N(), pr.N());
    const BiorthogonalFamily f = biorthogonal_family(c2, kernel_basis(pr));
    const Eigen::MatrixXd E = f.vectors;
    const int N = pr.N();
    const Eigen::MatrixXd X = random_matrix(rng, pr.p(), pr.p());
    const Eigen::MatrixXd Pi =
        E * (E.transpose() * E).ldlt().solve(E.transpose());
    const Eigen::MatrixXd R = random_matrix(rng, N, N);
    const Eigen::MatrixXd Mt =
        E * X * (E.transpose() * E).ldlt().solve(E.transpose()) +
        (Eigen::MatrixXd::Identity(N, N) - Pi) * R *
            (Eigen::MatrixXd::Identity(N, N) - Pi);
    const InvarianceReport r2 = invariance_coefficients(Mt.transpose(), f);
    CHECK(r2.invariant);
    // Coefficients reproduce M^T E_r = sum_s c(r,s) E_s.
    CHECK((Mt * E - E * r2.coefficients.transpose()).norm() <=
          1e-9 * std::max(1.0, Mt.norm()));

    // Breaking invariance with a transverse rank-one bump must be detected.
    Eigen::MatrixXd Mt_bad = Mt;
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(N);
    dir(pr.group_begin(0)) = 1.0;
    dir(pr.group_begin(0) + 1) = -1.0;  // inside a group -> transverse
    Mt_bad += dir * E.col(0).transpose();
    CHECK_FALSE(
        invariance_coefficients(Mt_bad.transpose(), f).invariant);
  }
}

TEST_CASE("two-group objects: frozen examples") {
  const GroupPartition part = make_partition({0, 2, 4});
  const KernelBasis basis = kernel_basis(part);

  SimilarityCertificate cert;
  cert.P = Eigen::MatrixXd::Identity(4, 4);
  cert.B_hat = Eigen::MatrixXd::Identity(4, 4);
  const TwoGroupKalman k1 =
      two_group_kalman(cert, basis, Eigen::Vector2d(1, 1));
  CHECK((k1.L - 2.0 * Eigen::Matrix2d::Identity()).norm() < 1e-14);
  CHECK((k1.Lambda - 2.0 * Eigen::Matrix2d::Identity()).norm() < 1e-14);
  CHECK((k1.Lambda_hat - Eigen::Matrix2d::Identity()).norm() < 1e-14);
  CHECK(k1.rank == 1);  // [D | D] has rank 1

  Eigen::VectorXd diag(4);
  diag << 1, 1, 2, 2;
  cert.B_hat = diag.asDiagonal();
  const TwoGroupKalman k2 =
      two_group_kalman(cert, basis, Eigen::Vector2d(1, 1));
  CHECK((k2.Lambda_hat - Eigen::Vector2d(1, 2).asDiagonal().toDenseMatrix())
            .norm() < 1e-14);
  CHECK(k2.rank == 2);

  CHECK_THROWS_AS(
      two_group_kalman(cert, kernel_basis(make_partition({0, 2, 4, 6})),
                       Eigen::Vector2d(1, 1)),
      ValidationError);
}

TEST_CASE("reduced similarity certificate matches direct reduction") {
  std::mt19937_64 rng(707);
  for (int trial = 0; trial < 40; ++trial) {
    const GroupPartition part = random_partition(rng, 4 + trial % 6);
    const SyncMatrix C = build_sync_matrix(part);
    const Eigen::MatrixXd B = simsym_compatible_matrix(rng, part);
    const SimilarityCertificate cert = symmetric_similarity(B);
    const SimilarityCertificate red = reduced_similarity(cert, C);

    const Eigen::MatrixXd B_red = reduce_matrix(B, C);
    // red certifies B_red: B_red = P_red B_hat_red P_red^{-1}.
    const Eigen::MatrixXd recon =
        red.P * red.B_hat * red.P.inverse();
    CHECK((recon - B_red).norm() <= 1e-8 * std::max(1.0, B_red.norm()));
    CHECK((red.B_hat - red.B_hat.transpose()).norm() <= 1e-10);
  }
}

TEST_CASE("reduce_system bundles the three reductions") {
  std::mt19937_64 rng(808);
  const GroupPartition part = make_partition({0, 2, 4});
  const SyncMatrix C = build_sync_matrix(part);
  CouplingSpec spec;
  spec.A = compatible_matrix(rng, part);
  spec.B = symmetric_compatible_matrix(rng, part);
  spec.D = build_control_matrix(part, ControlMatrixMode::canonical);
  const ReducedSystem red = reduce_system(spec, part);
  CHECK((C.entries * spec.A - red.A_red * C.entries).norm() <=
        1e-10 * spec.A.norm());
  CHECK((C.entries * spec.B - red.B_red * C.entries).norm() <=
        1e-10 * spec.B.norm());
  CHECK((red.D_red - C.entries * spec.D).norm() == 0.0);
}
