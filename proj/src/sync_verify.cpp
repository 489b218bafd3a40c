#include "wavesync/sync_verify.hpp"

#include <cmath>
#include <limits>

#include "wavesync/errors.hpp"
#include "wavesync/partition.hpp"

namespace wavesync {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw ValidationError(msg);
}

double weighted_norm(const Eigen::MatrixXd& field, const Eigen::VectorXd& w) {
  return std::sqrt((w.asDiagonal() * field).cwiseProduct(field).sum());
}

/// Controlled run on [0, T] followed by a free run on [T, T_obs]; snapshots
/// every step, with the duplicate seam snapshot dropped.
struct CombinedRun {
  std::vector<double> times;
  std::vector<State> states;
};

CombinedRun run_controlled_then_free(const SystemInstance& sys,
                                     const State& init,
                                     const ControlSignal& control, double T,
                                     double T_obs, SimOptions sim) {
  require(T_obs >= T, "observation window must reach past T");
  sim.snapshot_every = 1;
  CombinedRun run;
  const SimulationTrace leg1 = simulate(sys, init, control, T, sim);
  run.times = leg1.times;
  run.states = leg1.states;
  if (T_obs > T * (1.0 + 1e-12)) {
    const SimulationTrace leg2 =
        simulate(sys, leg1.final_state(), ControlSignal(), T_obs - T, sim);
    for (std::size_t k = 1; k < leg2.times.size(); ++k) {
      run.times.push_back(leg2.times[k]);
      run.states.push_back(leg2.states[k]);
    }
  }
  return run;
}

/// Family induced by B's similarity certificate when available; otherwise
/// the normalized indicators (the identity-transform family).
BiorthogonalFamily projection_family(const SystemInstance& sys,
                                     const GroupPartition& partition) {
  const KernelBasis basis = kernel_basis(partition);
  try {
    const SimilarityCertificate cert =
        symmetric_similarity(sys.coupling.B, 1e-9);
    return biorthogonal_family(cert, basis);
  } catch (const Error&) {
    SimilarityCertificate id;
    id.P = Eigen::MatrixXd::Identity(sys.N(), sys.N());
    id.B_hat = Eigen::MatrixXd::Zero(sys.N(), sys.N());
    id.residual = 0.0;
    return biorthogonal_family(id, basis);
  }
}

}  // namespace

std::vector<Eigen::MatrixXd> extract_sync_state(
    const SimulationTrace& trace, const BiorthogonalFamily& family) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(trace.states.size());
  for (const State& s : trace.states) out.push_back(s.u * family.vectors);
  return out;
}

SimulationTrace solve_decoupled_states(const Eigen::MatrixXd& alpha,
                                       const Eigen::MatrixXd& beta,
                                       const BoxDomain& domain,
                                       const State& init_proj, double T_obs,
                                       const SimOptions& opt) {
  const int p = static_cast<int>(alpha.rows());
  require(alpha.cols() == p && beta.rows() == p && beta.cols() == p,
          "coefficient matrices must be square and same size");
  CouplingSpec spec;
  spec.A = alpha;
  spec.B = beta;
  spec.D = Eigen::MatrixXd::Zero(p, 0);
  const SystemInstance sys = make_system(spec, domain);
  return simulate(sys, init_proj, ControlSignal(), T_obs, opt);
}

VerificationReport verify_synchronization(const SystemInstance& full_sys,
                                          const GroupPartition& partition,
                                          const State& init,
                                          const SynthesisResult& result,
                                          double T, double T_obs,
                                          const VerifyOptions& opt) {
  require(partition.N() == full_sys.N(),
          "partition size does not match the system");
  const SyncMatrix C = build_sync_matrix(partition);
  const Grid grid = build_grid(full_sys.domain);
  const Eigen::MatrixXd Ct = C.entries.transpose();

  const CombinedRun run = run_controlled_then_free(
      full_sys, init, result.control, T, T_obs, opt.sim);

  VerificationReport report;
  report.series_t = run.times;
  report.series_value.reserve(run.states.size());
  for (const State& s : run.states)
    report.series_value.push_back(weighted_norm(s.u * Ct, grid.w));

  const double d0 = report.series_value.front();
  const double scale =
      std::sqrt(weighted_norm(init.u, grid.w) * weighted_norm(init.u, grid.w) +
                weighted_norm(init.v, grid.w) * weighted_norm(init.v, grid.w));
  if (d0 >= 1e-9 * scale && d0 > 0.0) {
    report.sync_denominator = d0;
    report.denominator_relative = true;
  } else {
    report.sync_denominator = scale > 0.0 ? scale : 1.0;
    report.denominator_relative = false;
  }

  double sup = 0.0;
  const double t_from = T * (1.0 - 1e-9) - 1e-12;
  for (std::size_t k = 0; k < run.times.size(); ++k) {
    if (run.times[k] < t_from) continue;
    sup = std::max(sup, report.series_value[k] / report.sync_denominator);
  }
  report.sync_error = sup;

  const BiorthogonalFamily family = projection_family(full_sys, partition);
  report.state_traces.reserve(run.states.size());
  for (const State& s : run.states)
    report.state_traces.push_back(s.u * family.vectors);

  report.comparison_errors["sync_error"] = report.sync_error;
  report.comparison_errors["control_residual"] = result.residual_final;
  report.comparison_errors["control_norm"] = result.control_norm;
  report.pass["synchronized"] = report.sync_error <= opt.sync_threshold;
  return report;
}

IndependenceReport compare_state_independence(
    const SystemInstance& full_sys, const GroupPartition& partition,
    const BiorthogonalFamily& family, const State& init, double T,
    double T_obs, const SynthesisConfigPair& configs,
    const VerifyOptions& opt) {
  IndependenceReport report;
  const InvarianceReport inv_a =
      invariance_coefficients(full_sys.coupling.A, family, 1e-9);
  const InvarianceReport inv_b =
      invariance_coefficients(full_sys.coupling.B, family, 1e-9);
  report.invariant_A = inv_a.invariant;
  report.invariant_B = inv_b.invariant;
  report.certifiable = inv_a.invariant && inv_b.invariant;

  const SynthesisResult r1 =
      synthesize_sync_control(full_sys, partition, init, T, configs.first);
  const SynthesisResult r2 =
      synthesize_sync_control(full_sys, partition, init, T, configs.second);

  const CombinedRun run1 = run_controlled_then_free(
      full_sys, init, r1.control, T, T_obs, opt.sim);
  const CombinedRun run2 = run_controlled_then_free(
      full_sys, init, r2.control, T, T_obs, opt.sim);
  require(run1.times.size() == run2.times.size(),
          "runs produced different snapshot counts");

  const Grid grid = build_grid(full_sys.domain);
  double max_diff = 0.0;
  double max_scale = 0.0;
  for (std::size_t k = 0; k < run1.states.size(); ++k) {
    const Eigen::MatrixXd p1 = run1.states[k].u * family.vectors;
    const Eigen::MatrixXd p2 = run2.states[k].u * family.vectors;
    max_diff = std::max(max_diff, weighted_norm(p1 - p2, grid.w));
    max_scale = std::max({max_scale, weighted_norm(p1, grid.w),
                          weighted_norm(p2, grid.w)});
  }
  report.scale = max_scale;
  report.discrepancy = max_diff / std::max(max_scale, 1e-300);
  return report;
}

EstimateReport estimate_check(const SystemInstance& full_sys,
                              const GroupPartition& partition,
                              const BiorthogonalFamily& family,
                              const State& init_sync, const State& init_trans,
                              double T, const std::vector<double>& ladder,
                              const SynthesisOptions& opt) {
  const CompatibilityReport ca =
      check_cp_compatibility(full_sys.coupling.A, partition, opt.tol);
  const CompatibilityReport cb =
      check_cp_compatibility(full_sys.coupling.B, partition, opt.tol);
  if (!ca.compatible)
    throw IncompatibleError("A is not compatible with the partition",
                            ca.worst_row_group, ca.worst_col_group,
                            ca.worst_violation);
  if (!cb.compatible)
    throw IncompatibleError("B is not compatible with the partition",
                            cb.worst_row_group, cb.worst_col_group,
                            cb.worst_violation);

  const SyncMatrix C = build_sync_matrix(partition);
  const Eigen::MatrixXd Ct = C.entries.transpose();
  const Grid grid = build_grid(full_sys.domain);
  SimOptions sim = opt.assemble.sim;
  sim.snapshot_every = std::numeric_limits<int>::max();

  auto one_case = [&](double s) {
    State init;
    init.u = init_sync.u + s * init_trans.u;
    init.v = init_sync.v + s * init_trans.v;

    const SynthesisResult res =
        synthesize_sync_control(full_sys, partition, init, T, opt);
    const SimulationTrace full = simulate(full_sys, init, res.control, T, sim);

    State proj0;
    proj0.u = init.u * family.vectors;
    proj0.v = init.v * family.vectors;
    const SimulationTrace dec = solve_decoupled_states(
        ca.coefficients, cb.coefficients, full_sys.domain, proj0, T, sim);

    const Eigen::MatrixXd du =
        full.final_state().u * family.vectors - dec.final_state().u;
    const Eigen::MatrixXd dv =
        full.final_state().v * family.vectors - dec.final_state().v;
    EstimateRow row;
    row.s = s;
    row.lhs = std::sqrt(std::pow(weighted_norm(du, grid.w), 2) +
                        std::pow(weighted_norm(dv, grid.w), 2));
    row.rhs = std::sqrt(std::pow(weighted_norm(init.u * Ct, grid.w), 2) +
                        std::pow(weighted_norm(init.v * Ct, grid.w), 2));
    row.ratio = row.rhs > 0.0 ? row.lhs / row.rhs : 0.0;
    return row;
  };

  EstimateReport report;
  report.lhs_at_zero = one_case(0.0).lhs;
  for (double s : ladder) {
    report.rows.push_back(one_case(s));
    report.c_max = std::max(report.c_max, report.rows.back().ratio);
  }
  return report;
}

namespace {

/// Fraction of the per-axis Laplacian spectrum kept when measuring the
/// control map's smallest singular value. Near-Nyquist grid modes have
/// vanishing group velocity on any fixed grid, so they are unreachable from
/// the boundary regardless of the coupling; without this filter the smallest
/// singular value measures that discretization artifact instead of the
/// coupling's control authority.
constexpr double kProbeFilterFraction = 0.5;

struct AxisModes {
  Eigen::MatrixXd vectors;  // n x n, sqrt(w)-scaled, l2-orthonormal columns
  Eigen::VectorXd lambda;   // Neumann Laplacian eigenvalues, ascending
};

AxisModes axis_neumann_modes(int n, double dx) {
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, dx);
  w(0) = w(n - 1) = dx / 2;
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    if (i == 0) {
      L(0, 0) = 2.0 / (dx * dx);
      L(0, 1) = -2.0 / (dx * dx);
    } else if (i == n - 1) {
      L(i, i) = 2.0 / (dx * dx);
      L(i, i - 1) = -2.0 / (dx * dx);
    } else {
      L(i, i) = 2.0 / (dx * dx);
      L(i, i - 1) = L(i, i + 1) = -1.0 / (dx * dx);
    }
  }
  const Eigen::VectorXd rw = w.cwiseSqrt();
  Eigen::MatrixXd sym = rw.asDiagonal() * L * rw.cwiseInverse().asDiagonal();
  sym = 0.5 * (sym + sym.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  return {es.eigenvectors(), es.eigenvalues()};
}

/// Projects the stacked control operator onto the filtered Laplacian modes
/// and expresses it in the energy metric of boundary control (H^1 for the
/// displacement block, L^2 for the velocity block). Rows come back mode-wise
/// per component; the smallest singular value of the result is the
/// surjectivity margin of the control map on the filtered band.
Eigen::MatrixXd filtered_energy_operator(const Eigen::MatrixXd& mat,
                                         const BoxDomain& domain, int ncomp) {
  AxisModes mx = axis_neumann_modes(domain.grid_nodes[0], domain.dx(0));
  Eigen::MatrixXd modes;
  Eigen::VectorXd lambda;
  if (domain.dim == 1) {
    const int m = std::max(
        1, static_cast<int>(std::floor(kProbeFilterFraction *
                                       domain.grid_nodes[0])));
    modes = mx.vectors.leftCols(m);
    lambda = mx.lambda.head(m);
  } else {
    const AxisModes my = axis_neumann_modes(domain.grid_nodes[1], domain.dx(1));
    const int mxk = std::max(
        1, static_cast<int>(std::floor(kProbeFilterFraction *
                                       domain.grid_nodes[0])));
    const int myk = std::max(
        1, static_cast<int>(std::floor(kProbeFilterFraction *
                                       domain.grid_nodes[1])));
    modes.resize(domain.node_count(), mxk * myk);
    lambda.resize(mxk * myk);
    const int nx = domain.grid_nodes[0];
    for (int b = 0; b < myk; ++b)
      for (int a = 0; a < mxk; ++a) {
        // x-fastest grid ordering: mode(i + j*nx) = X(i, a) * Y(j, b)
        for (int j = 0; j < domain.grid_nodes[1]; ++j)
          modes.block(j * nx, b * mxk + a, nx, 1) =
              mx.vectors.col(a) * my.vectors(j, b);
        lambda(b * mxk + a) = mx.lambda(a) + my.lambda(b);
      }
  }
  const int n = domain.node_count();
  const int m = static_cast<int>(modes.cols());
  const Eigen::VectorXd h1_weight = (lambda.array() + 1.0).sqrt();
  Eigen::MatrixXd out(2 * ncomp * m, mat.cols());
  for (int comp = 0; comp < ncomp; ++comp) {
    out.middleRows(comp * m, m) =
        h1_weight.asDiagonal() * (modes.transpose() *
                                  mat.middleRows(comp * n, n));
    out.middleRows((ncomp + comp) * m, m) =
        modes.transpose() * mat.middleRows((ncomp + comp) * n, n);
  }
  return out;
}

}  // namespace

ProbeReport noncontrollability_probe(const CouplingSpec& coupling,
                                     const BoxDomain& base_domain,
                                     const std::vector<int>& levels,
                                     const ProbeOptions& opt) {
  const int N = coupling.N();
  const int M = coupling.M();
  ProbeReport report;

  // Direction the control cannot see: unit null vector of D^T when M < N
  // (the least-visible right singular direction when control is full).
  if (M == 0) {
    report.null_direction = Eigen::VectorXd::Unit(N, 0);
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(coupling.D.transpose(),
                                          Eigen::ComputeFullV);
    report.null_direction = svd.matrixV().col(N - 1);
  }

  for (int nodes : levels) {
    std::vector<double> lengths(base_domain.dim);
    std::vector<int> counts(base_domain.dim, nodes);
    for (int a = 0; a < base_domain.dim; ++a)
      lengths[a] = base_domain.lengths[a];
    const BoxDomain domain = make_box(base_domain.dim, lengths, counts);
    const SystemInstance sys = make_system(coupling, domain);
    const Grid grid = build_grid(domain);
    const double T =
        opt.T > 0.0 ? opt.T : 4.0 * domain.diameter();

    SimOptions sim;
    sim.cfl_factor = opt.cfl_factor;
    sim.snapshot_every = std::numeric_limits<int>::max();

    // theta: centered smooth bump, product of sin^2 profiles, amplitude 1.
    const int n_count = domain.node_count();
    Eigen::VectorXd theta(n_count);
    if (domain.dim == 1) {
      for (int i = 0; i < n_count; ++i) {
        const double s = std::sin(M_PI * i * domain.dx(0) / domain.lengths[0]);
        theta(i) = s * s;
      }
    } else {
      const int nx = domain.grid_nodes[0];
      for (int j = 0; j < domain.grid_nodes[1]; ++j)
        for (int i = 0; i < nx; ++i) {
          const double sx =
              std::sin(M_PI * i * domain.dx(0) / domain.lengths[0]);
          const double sy =
              std::sin(M_PI * j * domain.dx(1) / domain.lengths[1]);
          theta(i + j * nx) = sx * sx * sy * sy;
        }
    }
    State init = zero_state(sys);
    init.v = theta * report.null_direction.transpose();

    ProbeLevel level;
    level.nodes = nodes;
    const Eigen::VectorXd free_T = free_final_state(sys, init, T, sim);
    level.free_norm = free_T.norm();

    if (M == 0) {
      level.K = 0;
      level.sigma_min = 0.0;
      level.residual_rel = 1.0;  // no control authority at all
      report.levels.push_back(level);
      continue;
    }

    const long state_dim = 2L * n_count * N;
    const int per_knot = grid.nb() * M;
    const int knots = std::max(
        1, static_cast<int>(
               std::ceil(opt.knots_per_state * state_dim / per_knot)));
    const ControlBasis basis = make_control_basis(sys, T, knots);

    AssembleOptions asm_opt;
    asm_opt.sim = sim;
    asm_opt.threads = opt.threads;
    const ControlOperator op = assemble_control_operator(sys, basis, T, asm_opt);
    level.K = basis.size();

    const Eigen::MatrixXd filtered =
        filtered_energy_operator(op.mat, domain, N);
    Eigen::JacobiSVD<Eigen::MatrixXd> op_svd(filtered);
    level.sigma_min = op_svd.singularValues()(op_svd.singularValues().size() - 1);

    SolveOptions solve = opt.solve;
    solve.compute_spectrum = false;
    const SynthesisResult res =
        solve_null_control(op, Eigen::VectorXd(-free_T), opt.eps, solve);
    level.residual_rel =
        res.residual_final / std::max(level.free_norm, 1e-300);
    report.levels.push_back(level);
  }
  return report;
}

}  // namespace wavesync
