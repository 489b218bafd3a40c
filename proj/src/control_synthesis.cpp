#include "wavesync/control_synthesis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "wavesync/errors.hpp"
#include "wavesync/partition.hpp"

namespace wavesync {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw ValidationError(msg);
}

SimOptions final_only(SimOptions sim) {
  sim.snapshot_every = std::numeric_limits<int>::max();
  return sim;
}

}  // namespace

double ControlBasis::hat(int j, double t) const {
  const double delta = knot_spacing();
  const double tau = (j + 1) * delta;
  return std::max(0.0, 1.0 - std::abs(t - tau) / delta);
}

ControlSignal ControlBasis::render(const Eigen::VectorXd& coeffs, double dt,
                                   long steps) const {
  require(coeffs.size() == size(), "coefficient vector has the wrong length");
  const int n_b = nb();
  const int M = channels;
  ControlSignal sig;
  sig.dt = dt;
  sig.T_support = T;
  sig.samples.assign(steps + 1, Eigen::MatrixXd::Zero(n_b, M));
  const double delta = knot_spacing();
  for (long k = 0; k <= steps; ++k) {
    const double t = k * dt;
    if (t > T + 1e-12 * T) break;  // basis vanishes past T
    const int j_mid = static_cast<int>(std::floor(t / delta)) - 1;
    for (int j = std::max(0, j_mid - 1);
         j <= std::min(time_knots - 1, j_mid + 2); ++j) {
      const double phi = hat(j, t);
      if (phi == 0.0) continue;
      for (int b = 0; b < n_b; ++b)
        for (int m = 0; m < M; ++m)
          sig.samples[k](b, m) += phi * coeffs((j * n_b + b) * M + m);
    }
  }
  return sig;
}

ControlBasis make_control_basis(const SystemInstance& sys, double T,
                                int time_knots) {
  require(T > 0.0, "basis horizon must be positive");
  require(time_knots >= 1, "at least one time knot");
  require(sys.M() >= 1, "system has no control channels");
  const Grid grid = build_grid(sys.domain);
  double dx_min = sys.domain.dx(0);
  if (sys.domain.dim == 2) dx_min = std::min(dx_min, sys.domain.dx(1));
  // Knot spacing T/(knots+1) is kept at or above dx/2 so the basis cannot
  // oscillate faster than the grid can resolve.
  const int max_knots =
      std::max(1, static_cast<int>(std::floor(2.0 * T / dx_min)) - 1);
  ControlBasis basis;
  basis.T = T;
  basis.time_knots = std::min(time_knots, max_knots);
  basis.boundary_nodes = grid.boundary_nodes;
  basis.channels = sys.M();
  return basis;
}

Eigen::VectorXd stack_state(const State& state, const Grid& grid) {
  const long nodes = state.u.rows();
  const long N = state.u.cols();
  Eigen::VectorXd out(2 * nodes * N);
  const Eigen::MatrixXd wu = grid.sqrt_w.asDiagonal() * state.u;
  const Eigen::MatrixXd wv = grid.sqrt_w.asDiagonal() * state.v;
  out.head(nodes * N) = Eigen::Map<const Eigen::VectorXd>(wu.data(), nodes * N);
  out.tail(nodes * N) = Eigen::Map<const Eigen::VectorXd>(wv.data(), nodes * N);
  return out;
}

ControlOperator assemble_control_operator(const SystemInstance& red_sys,
                                          const ControlBasis& basis, double T,
                                          const AssembleOptions& opt) {
  require(basis.channels == red_sys.M(),
          "basis channels do not match the system");
  const Grid grid = build_grid(red_sys.domain);
  require(basis.boundary_nodes == grid.boundary_nodes,
          "basis boundary nodes do not match the domain");

  // Probe run pins (dt, steps) exactly as simulate() will choose them.
  const SimulationTrace probe = simulate(red_sys, zero_state(red_sys),
                                         ControlSignal(), T, final_only(opt.sim));

  ControlOperator op;
  op.basis = basis;
  op.T = T;
  op.dt = probe.dt;
  op.steps = probe.steps;
  op.domain = red_sys.domain;
  op.ncomp = red_sys.N();
  const long rows = 2L * red_sys.domain.node_count() * red_sys.N();
  const int K = basis.size();
  op.mat.resize(rows, K);

  const SimOptions col_opt = final_only(opt.sim);
  std::atomic<int> next{0};
  auto worker = [&]() {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(K);
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= K) return;
      e(k) = 1.0;
      const ControlSignal sig = basis.render(e, op.dt, op.steps);
      e(k) = 0.0;
      const SimulationTrace tr =
          simulate(red_sys, zero_state(red_sys), sig, T, col_opt);
      op.mat.col(k) = stack_state(tr.final_state(), grid);
    }
  };
  const int nthreads = std::max(1, opt.threads);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return op;
}

Eigen::VectorXd free_final_state(const SystemInstance& red_sys,
                                 const State& init, double T,
                                 const SimOptions& opt) {
  const SimulationTrace tr =
      simulate(red_sys, init, ControlSignal(), T, final_only(opt));
  return stack_state(tr.final_state(), build_grid(red_sys.domain));
}

namespace {

/// Conjugate gradient on an SPD operator given as a product callback.
template <typename Apply>
Eigen::VectorXd conjugate_gradient(const Apply& apply, const Eigen::VectorXd& b,
                                   int max_iters, double tol) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd r = b;
  Eigen::VectorXd p = r;
  double rr = r.squaredNorm();
  const double b_norm = std::max(b.norm(), 1e-300);
  std::vector<double> history;
  history.push_back(std::sqrt(rr) / b_norm);
  for (int it = 0; it < max_iters; ++it) {
    if (std::sqrt(rr) <= tol * b_norm) return x;
    const Eigen::VectorXd ap = apply(p);
    const double alpha = rr / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    const double rr_new = r.squaredNorm();
    history.push_back(std::sqrt(rr_new) / b_norm);
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  if (std::sqrt(rr) <= tol * b_norm) return x;
  throw ConvergenceError("conjugate gradient did not converge",
                         std::move(history));
}

double signal_l2_norm(const ControlSignal& sig, const Grid& grid, double dt,
                      long steps) {
  double acc = 0.0;
  const int M = sig.samples.empty() ? 0 : static_cast<int>(sig.samples[0].cols());
  for (long k = 0; k <= steps; ++k) {
    const Eigen::MatrixXd h = sig.at(k, grid.nb(), M);
    const double val =
        (grid.boundary_w.asDiagonal() * h).cwiseProduct(h).sum();
    const double tw = (k == 0 || k == steps) ? 0.5 : 1.0;
    acc += tw * dt * val;
  }
  return std::sqrt(std::max(0.0, acc));
}

}  // namespace

Eigen::VectorXd gramian_spectrum(const ControlOperator& op) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(op.mat);
  return svd.singularValues();
}

SynthesisResult solve_null_control(const ControlOperator& op,
                                   const Eigen::VectorXd& target, double eps,
                                   const SolveOptions& opt) {
  require(eps > 0.0, "regularization parameter must be positive");
  require(target.size() == op.mat.rows(),
          "target length does not match the operator");
  const long rows = op.mat.rows();
  const long K = op.mat.cols();
  require(K >= 1, "operator has no columns");

  Eigen::VectorXd coeffs;
  if (K <= rows) {
    // Primal side: (L^T L + eps I) c = L^T target.
    const Eigen::VectorXd rhs = op.mat.transpose() * target;
    if (opt.solver == LeastSquaresSolver::ldlt) {
      Eigen::MatrixXd normal = op.mat.transpose() * op.mat;
      normal.diagonal().array() += eps;
      coeffs = normal.ldlt().solve(rhs);
    } else {
      auto apply = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
        return op.mat.transpose() * (op.mat * x) + eps * x;
      };
      coeffs = conjugate_gradient(apply, rhs, opt.max_cg_iterations,
                                  opt.cg_tolerance);
    }
  } else {
    // Gramian side: (L L^T + eps I) y = target, c = L^T y.
    if (opt.solver == LeastSquaresSolver::ldlt) {
      Eigen::MatrixXd gram = op.mat * op.mat.transpose();
      gram.diagonal().array() += eps;
      coeffs = op.mat.transpose() * gram.ldlt().solve(target);
    } else {
      auto apply = [&](const Eigen::VectorXd& y) -> Eigen::VectorXd {
        return op.mat * (op.mat.transpose() * y) + eps * y;
      };
      coeffs = op.mat.transpose() *
               conjugate_gradient(apply, target, opt.max_cg_iterations,
                                  opt.cg_tolerance);
    }
  }

  SynthesisResult result;
  result.coefficients = coeffs;
  result.residual_final = (op.mat * coeffs - target).norm();
  result.free_norm = target.norm();
  result.control = op.basis.render(coeffs, op.dt, op.steps);
  result.control_norm =
      signal_l2_norm(result.control, build_grid(op.domain), op.dt, op.steps);
  if (opt.compute_spectrum) result.gramian_spectrum = gramian_spectrum(op);
  return result;
}

SynthesisResult synthesize_sync_control(const SystemInstance& full_sys,
                                        const GroupPartition& partition,
                                        const State& init, double T,
                                        const SynthesisOptions& opt) {
  require(partition.N() == full_sys.N(),
          "partition size does not match the system");
  const CompatibilityReport ca =
      check_cp_compatibility(full_sys.coupling.A, partition, opt.tol);
  if (!ca.compatible)
    throw IncompatibleError("A is not compatible with the partition",
                            ca.worst_row_group, ca.worst_col_group,
                            ca.worst_violation);
  const CompatibilityReport cb =
      check_cp_compatibility(full_sys.coupling.B, partition, opt.tol);
  if (!cb.compatible)
    throw IncompatibleError("B is not compatible with the partition",
                            cb.worst_row_group, cb.worst_col_group,
                            cb.worst_violation);

  const SyncMatrix C = build_sync_matrix(partition);
  const RankReport rank = rank_condition(C, full_sys.coupling.D);
  if (!rank.satisfied) {
    std::ostringstream msg;
    msg << "rank of the projected control matrix is " << rank.rank
        << ", expected " << rank.required;
    throw RankConditionError(msg.str());
  }

  const ReducedSystem red =
      reduce_system(full_sys.coupling, partition, opt.tol);
  CouplingSpec red_coupling{red.A_red, red.B_red, red.D_red};
  const SystemInstance red_sys = make_system(red_coupling, full_sys.domain);

  State red_init;
  red_init.u = init.u * C.entries.transpose();
  red_init.v = init.v * C.entries.transpose();
  red_init.t = init.t;

  const ControlBasis basis = make_control_basis(red_sys, T, opt.time_knots);
  const ControlOperator op =
      assemble_control_operator(red_sys, basis, T, opt.assemble);
  const Eigen::VectorXd free_T =
      free_final_state(red_sys, red_init, T, opt.assemble.sim);
  SynthesisResult result =
      solve_null_control(op, Eigen::VectorXd(-free_T), opt.eps, opt.solve);
  result.free_norm = free_T.norm();
  return result;
}

ControlSignal neumann_to_robin_lift(const ControlSignal& H_neumann,
                                    const SimulationTrace& fwd_trace,
                                    const Eigen::MatrixXd& D,
                                    const Eigen::MatrixXd& B) {
  require(D.rows() == D.cols() && D.rows() > 0,
          "lift requires a square control matrix");
  require(B.rows() == D.rows() && B.cols() == D.rows(),
          "coupling matrix size mismatch");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(D);
  lu.setThreshold(kRankTolerance);
  require(lu.isInvertible(), "lift requires an invertible control matrix");
  const Eigen::MatrixXd X = lu.solve(B);  // D^{-1} B
  if (!H_neumann.empty())
    require(std::abs(H_neumann.dt - fwd_trace.dt) <= 1e-9 * fwd_trace.dt,
            "control and trace use different time steps");
  const int nb = static_cast<int>(fwd_trace.boundary_u[0].rows());
  const int M = static_cast<int>(D.cols());
  ControlSignal lifted;
  lifted.dt = fwd_trace.dt;
  lifted.T_support = fwd_trace.steps * fwd_trace.dt;
  lifted.samples.reserve(fwd_trace.steps + 1);
  for (long k = 0; k <= fwd_trace.steps; ++k) {
    Eigen::MatrixXd s = H_neumann.at(k, nb, M);
    s += fwd_trace.boundary_u[k] * X.transpose();
    lifted.samples.push_back(std::move(s));
  }
  return lifted;
}

}  // namespace wavesync
