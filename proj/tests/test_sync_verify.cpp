#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "test_support.hpp"
#include "wavesync/errors.hpp"
#include "wavesync/partition.hpp"
#include "wavesync/sync_algebra.hpp"
#include "wavesync/sync_verify.hpp"

using namespace wavesync;

namespace {

Eigen::VectorXd cosine(const BoxDomain& dom, int mode) {
  const int n = dom.grid_nodes[0];
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i)
    v(i) = std::cos(mode * M_PI * i * dom.dx(0) / dom.lengths[0]);
  return v;
}

/// Two components, one group: symmetric couplings whose common row sum is
/// zero, controlled through the difference channel.
SystemInstance pair_system(int nodes) {
  CouplingSpec c;
  c.A.setZero(2, 2);
  c.A << 0.5, -0.5, -0.5, 0.5;
  c.B = c.A;
  c.D.resize(2, 1);
  c.D << 1, -1;
  return make_system(c, make_box(1, {1.0}, {nodes}));
}

BiorthogonalFamily family_of(const SystemInstance& sys,
                             const GroupPartition& part) {
  const SimilarityCertificate cert = symmetric_similarity(sys.coupling.B, 1e-9);
  return biorthogonal_family(cert, kernel_basis(part));
}

}  // namespace

TEST_CASE("extraction returns the common profile of synchronized states") {
  const SystemInstance sys = pair_system(31);
  const GroupPartition part = make_partition({0, 2});
  const BiorthogonalFamily fam = family_of(sys, part);
  REQUIRE(fam.vectors.cols() == 1);

  SimulationTrace trace;
  trace.domain = sys.domain;
  trace.ncomp = 2;
  const Eigen::VectorXd profile = cosine(sys.domain, 1);
  State synced = zero_state(sys);
  synced.u = profile * Eigen::RowVector2d(1.0, 1.0);
  State transverse = zero_state(sys);
  transverse.u = profile * Eigen::RowVector2d(1.0, -1.0);
  trace.states = {synced, transverse};
  trace.times = {0.0, 1.0};

  const std::vector<Eigen::MatrixXd> ext = extract_sync_state(trace, fam);
  REQUIRE(ext.size() == 2);
  CHECK((ext[0].col(0) - profile).norm() <= 1e-12 * profile.norm());
  CHECK(ext[1].norm() <= 1e-12 * profile.norm());
}

TEST_CASE("decoupled profile systems reproduce scalar free runs") {
  const BoxDomain dom = make_box(1, {1.0}, {41});
  State init;
  init.u = cosine(dom, 1);
  init.v = Eigen::VectorXd::Zero(41);

  // alpha = beta = 0: plain Neumann wave.
  const SimulationTrace dec = solve_decoupled_states(
      Eigen::MatrixXd::Zero(1, 1), Eigen::MatrixXd::Zero(1, 1), dom, init, 0.9);
  CouplingSpec plain;
  plain.A = Eigen::MatrixXd::Zero(1, 1);
  plain.B = Eigen::MatrixXd::Zero(1, 1);
  plain.D = Eigen::MatrixXd::Identity(1, 1);
  const SystemInstance scalar_sys = make_system(plain, dom);
  const SimulationTrace ref =
      simulate(scalar_sys, init, ControlSignal(), 0.9);
  CHECK((dec.final_state().u - ref.final_state().u).norm() == 0.0);

  // Diagonal coefficients: the two profiles evolve independently.
  Eigen::MatrixXd alpha = Eigen::Vector2d(1.0, 3.0).asDiagonal();
  Eigen::MatrixXd beta = Eigen::Vector2d(0.5, 2.0).asDiagonal();
  State init2;
  init2.u = Eigen::MatrixXd::Zero(41, 2);
  init2.u.col(0) = cosine(dom, 1);
  init2.u.col(1) = cosine(dom, 2);
  init2.v = Eigen::MatrixXd::Zero(41, 2);
  const SimulationTrace joint =
      solve_decoupled_states(alpha, beta, dom, init2, 0.9);
  for (int k = 0; k < 2; ++k) {
    State si;
    si.u = init2.u.col(k);
    si.v = Eigen::VectorXd::Zero(41);
    const SimulationTrace solo = solve_decoupled_states(
        Eigen::MatrixXd::Constant(1, 1, alpha(k, k)),
        Eigen::MatrixXd::Constant(1, 1, beta(k, k)), dom, si, 0.9);
    CHECK((joint.final_state().u.col(k) - solo.final_state().u.col(0)).norm() <
          1e-13);
  }
}

TEST_CASE("projections of synchronized data follow the closed profile system") {
  // Row sums of both couplings vanish, so the profile coefficients are zero
  // and the projected run must match the free profile run to roundoff.
  CouplingSpec c;
  c.A.resize(3, 3);
  c.A << 1.0, -0.5, -0.5, -0.5, 1.0, -0.5, -0.5, -0.5, 1.0;
  c.B = c.A;
  c.D.resize(3, 2);
  c.D << 1, 0, -1, 1, 0, -1;
  const SystemInstance sys = make_system(c, make_box(1, {1.0}, {41}));
  const GroupPartition part = make_partition({0, 3});
  const BiorthogonalFamily fam = family_of(sys, part);

  const CompatibilityReport ca = check_cp_compatibility(c.A, part);
  const CompatibilityReport cb = check_cp_compatibility(c.B, part);
  REQUIRE(ca.compatible);
  REQUIRE(cb.compatible);
  CHECK(ca.coefficients.norm() <= 1e-12);

  State init = zero_state(sys);
  const Eigen::VectorXd f = cosine(sys.domain, 1);
  const Eigen::VectorXd g = cosine(sys.domain, 2);
  init.u = f * Eigen::RowVector3d::Ones();
  init.v = 0.3 * g * Eigen::RowVector3d::Ones();

  const double T = 1.1;
  const SimulationTrace full = simulate(sys, init, ControlSignal(), T);
  State proj0;
  proj0.u = init.u * fam.vectors;
  proj0.v = init.v * fam.vectors;
  const SimulationTrace dec = solve_decoupled_states(
      ca.coefficients, cb.coefficients, sys.domain, proj0, T);

  const Eigen::MatrixXd got = full.final_state().u * fam.vectors;
  CHECK((got - dec.final_state().u).norm() <= 1e-11 * proj0.u.norm());
}

TEST_CASE("already synchronized data verifies with the scale denominator") {
  const SystemInstance sys = pair_system(41);
  const GroupPartition part = make_partition({0, 2});
  State init = zero_state(sys);
  init.u = cosine(sys.domain, 1) * Eigen::RowVector2d(1.0, 1.0);

  SynthesisResult no_control;  // empty control signal
  const VerificationReport rep =
      verify_synchronization(sys, part, init, no_control, 1.0, 1.5);
  CHECK_FALSE(rep.denominator_relative);
  CHECK(rep.sync_error <= 1e-10);
  CHECK(rep.pass.at("synchronized"));
  REQUIRE(!rep.series_t.empty());
  CHECK(rep.series_t.front() == 0.0);
  CHECK(rep.series_t.back() == doctest::Approx(1.5).epsilon(1e-12));
  REQUIRE(rep.state_traces.size() == rep.series_t.size());
  CHECK(rep.state_traces.front().rows() == 41);
  CHECK(rep.state_traces.front().cols() == 1);
  // The extracted profile starts at the common initial profile.
  CHECK((rep.state_traces.front().col(0) - cosine(sys.domain, 1)).norm() <=
        1e-12);
}

TEST_CASE("synthesized control passes verification and its negation fails") {
  const SystemInstance sys = pair_system(51);
  const GroupPartition part = make_partition({0, 2});
  State init = zero_state(sys);
  init.u.col(0) = cosine(sys.domain, 1);
  init.u.col(1) = 0.5 * cosine(sys.domain, 2);

  const double T = 4.0;
  SynthesisOptions sopt;
  sopt.time_knots = 128;
  sopt.eps = 1e-8;
  const SynthesisResult res = synthesize_sync_control(sys, part, init, T, sopt);
  REQUIRE(res.residual_final <= 1e-2 * res.free_norm);

  const VerificationReport rep =
      verify_synchronization(sys, part, init, res, T, 1.5 * T);
  CHECK(rep.denominator_relative);
  CHECK(rep.sync_error <= 1e-3);
  CHECK(rep.pass.at("synchronized"));
  CHECK(rep.comparison_errors.at("control_residual") ==
        doctest::Approx(res.residual_final));

  SynthesisResult wrong = res;
  for (Eigen::MatrixXd& s : wrong.control.samples) s = -s;
  const VerificationReport bad =
      verify_synchronization(sys, part, init, wrong, T, 1.5 * T);
  CHECK(bad.sync_error >= 1e-1);
  CHECK_FALSE(bad.pass.at("synchronized"));

  // A stricter threshold flips the pass flag without changing the numbers.
  VerifyOptions strict;
  strict.sync_threshold = 1e-12;
  const VerificationReport hard =
      verify_synchronization(sys, part, init, res, T, 1.5 * T, strict);
  CHECK(hard.sync_error == doctest::Approx(rep.sync_error).epsilon(1e-12));
  CHECK_FALSE(hard.pass.at("synchronized"));
}

TEST_CASE("projections are control independent exactly when the span is invariant") {
  const GroupPartition part = make_partition({0, 2});
  State init;

  // Invariant case: symmetric couplings, control in the kernel of E^T D.
  const SystemInstance good = pair_system(41);
  init = zero_state(good);
  init.u.col(0) = cosine(good.domain, 1);
  init.u.col(1) = 0.4 * cosine(good.domain, 2);
  SynthesisConfigPair configs;
  configs.first.time_knots = 24;
  configs.first.eps = 1e-6;
  configs.second.time_knots = 48;
  configs.second.eps = 1e-9;
  const BiorthogonalFamily fam = family_of(good, part);
  const IndependenceReport inv = compare_state_independence(
      good, part, fam, init, 3.0, 4.0, configs);
  CHECK(inv.invariant_A);
  CHECK(inv.invariant_B);
  CHECK(inv.certifiable);
  CHECK(inv.discrepancy <= 1e-9);

  // Non-invariant case: same B (and family), triangular A whose transpose
  // moves the family span.
  CouplingSpec skew;
  skew.A.resize(2, 2);
  skew.A << 1, 1, 0, 2;  // constant row sums, A^T e != multiple of e
  skew.B.setZero(2, 2);
  skew.B << 0.5, -0.5, -0.5, 0.5;
  skew.D.resize(2, 1);
  skew.D << 1, -1;
  const SystemInstance bad = make_system(skew, make_box(1, {1.0}, {41}));
  init = zero_state(bad);
  init.u.col(0) = cosine(bad.domain, 1);
  init.u.col(1) = 0.4 * cosine(bad.domain, 2);
  const BiorthogonalFamily fam2 = family_of(bad, part);
  const IndependenceReport dep = compare_state_independence(
      bad, part, fam2, init, 3.0, 4.0, configs);
  CHECK(dep.invariant_B);
  CHECK_FALSE(dep.invariant_A);
  CHECK_FALSE(dep.certifiable);
  CHECK(dep.discrepancy > 1e3 * inv.discrepancy);
  CHECK(dep.discrepancy > 1e-8);
}

TEST_CASE("estimate ladder scales linearly in the transverse amplitude") {
  // Triangular coupling: compatible (constant row sums) but its transpose
  // moves the family span, so the profile mismatch is a genuine multiple of
  // the transverse amplitude rather than pure roundoff.
  CouplingSpec c;
  c.A.resize(2, 2);
  c.A << 1, 1, 0, 2;
  c.B = Eigen::MatrixXd::Zero(2, 2);
  c.D.resize(2, 1);
  c.D << 1, -1;
  const SystemInstance sys = make_system(c, make_box(1, {1.0}, {41}));
  const GroupPartition part = make_partition({0, 2});
  const BiorthogonalFamily fam = family_of(sys, part);

  State init_sync = zero_state(sys);
  init_sync.u = cosine(sys.domain, 1) * Eigen::RowVector2d(1.0, 1.0);
  init_sync.v = 0.2 * cosine(sys.domain, 2) * Eigen::RowVector2d(1.0, 1.0);
  State init_trans = zero_state(sys);
  init_trans.u = cosine(sys.domain, 2) * Eigen::RowVector2d(1.0, -1.0);

  SynthesisOptions sopt;
  sopt.time_knots = 48;
  sopt.eps = 1e-8;
  const std::vector<double> ladder{0.01, 0.02, 0.04, 0.08};
  const EstimateReport rep = estimate_check(sys, part, fam, init_sync,
                                            init_trans, 3.0, ladder, sopt);
  REQUIRE(rep.rows.size() == 4);

  // With no transverse part the two sides coincide up to solver roundoff.
  const double scale = init_sync.u.norm();
  CHECK(rep.lhs_at_zero <= 1e-9 * scale);

  // The data norm doubles with s; the mismatch stays proportional, so the
  // ratios across the ladder stay within a tight band.
  for (std::size_t k = 1; k < rep.rows.size(); ++k) {
    CHECK(rep.rows[k].rhs / rep.rows[k - 1].rhs ==
          doctest::Approx(2.0).epsilon(1e-9));
  }
  double rmin = rep.rows.front().ratio;
  double rmax = rmin;
  for (const EstimateRow& r : rep.rows) {
    CHECK(r.lhs > 0.0);
    CHECK(r.rhs > 0.0);
    rmin = std::min(rmin, r.ratio);
    rmax = std::max(rmax, r.ratio);
  }
  CHECK(rmax == doctest::Approx(rep.c_max));
  CHECK(rmax / rmin <= 10.0);
}

TEST_CASE("estimate check rejects incompatible couplings") {
  CouplingSpec c;
  c.A = Eigen::Vector2d(1.0, 2.0).asDiagonal();  // unequal row sums
  c.B = Eigen::MatrixXd::Zero(2, 2);
  c.D = Eigen::MatrixXd::Identity(2, 2);
  const SystemInstance sys = make_system(c, make_box(1, {1.0}, {21}));
  const GroupPartition part = make_partition({0, 2});
  SimilarityCertificate id;
  id.P = Eigen::MatrixXd::Identity(2, 2);
  id.B_hat = Eigen::MatrixXd::Zero(2, 2);
  const BiorthogonalFamily fam = biorthogonal_family(id, kernel_basis(part));
  const State z{Eigen::MatrixXd::Zero(21, 2), Eigen::MatrixXd::Zero(21, 2)};
  CHECK_THROWS_AS(
      estimate_check(sys, part, fam, z, z, 1.0, {0.5}, SynthesisOptions{}),
      IncompatibleError);
}

TEST_CASE("probe reports zero authority when there is no control") {
  CouplingSpec c;
  c.A = Eigen::MatrixXd::Zero(1, 1);
  c.B = Eigen::MatrixXd::Zero(1, 1);
  c.D = Eigen::MatrixXd::Zero(1, 0);
  const BoxDomain base = make_box(1, {1.0}, {21});
  ProbeOptions popt;
  popt.T = 2.0;
  const ProbeReport rep = noncontrollability_probe(c, base, {21, 41}, popt);
  REQUIRE(rep.levels.size() == 2);
  CHECK(rep.null_direction.size() == 1);
  for (const ProbeLevel& lv : rep.levels) {
    CHECK(lv.K == 0);
    CHECK(lv.sigma_min == 0.0);
    CHECK(lv.residual_rel == 1.0);
    CHECK(lv.free_norm > 0.0);
  }
}

TEST_CASE("probe separates deficient from fully controlled couplings") {
  const BoxDomain base = make_box(1, {1.0}, {21});

  CouplingSpec deficient;
  deficient.A.resize(2, 2);
  deficient.A << 2, -1, -1, 2;
  deficient.B = Eigen::MatrixXd::Zero(2, 2);
  deficient.D.resize(2, 1);
  deficient.D << 1, 0;
  const ProbeReport weak = noncontrollability_probe(deficient, base, {21, 41});
  REQUIRE(weak.levels.size() == 2);
  // The data direction is the one the single channel cannot reach.
  CHECK(std::abs(weak.null_direction(1)) == doctest::Approx(1.0));
  CHECK(weak.levels[0].sigma_min > 0.0);
  CHECK(weak.levels[1].sigma_min < weak.levels[0].sigma_min / 1.3);
  CHECK(weak.levels[1].K > 0);

  CouplingSpec full = deficient;
  full.D = Eigen::MatrixXd::Identity(2, 2);
  const ProbeReport strong = noncontrollability_probe(full, base, {21, 41});
  REQUIRE(strong.levels.size() == 2);
  CHECK(strong.levels[1].sigma_min > strong.levels[0].sigma_min * 0.4);
  CHECK(strong.levels[1].residual_rel < 0.5);
}
