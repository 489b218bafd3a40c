#pragma once

#include <Eigen/Dense>
#include <vector>

#include "wavesync/wave_sim.hpp"

namespace wavesync {

/// Piecewise-linear hat functions in time (vanishing at t=0 and t=T),
/// tensored with boundary nodes and control channels. Coefficient layout:
/// index = (knot * nb + bnode) * M + channel.
struct ControlBasis {
  double T = 0.0;
  int time_knots = 0;            // interior knots; spacing T/(knots+1)
  std::vector<int> boundary_nodes;
  int channels = 0;

  int nb() const { return static_cast<int>(boundary_nodes.size()); }
  int size() const { return time_knots * nb() * channels; }
  double knot_spacing() const { return T / (time_knots + 1); }
  double hat(int j, double t) const;

  /// Samples the represented control on a uniform step grid (steps+1 samples).
  ControlSignal render(const Eigen::VectorXd& coeffs, double dt,
                       long steps) const;
};

/// Basis over all boundary nodes of the domain with M channels. Knot count
/// is clamped so the knot spacing never drops below half the grid spacing
/// (time resolution capped at twice the grid Nyquist rate).
ControlBasis make_control_basis(const SystemInstance& sys, double T,
                                int time_knots);

/// Dense linear map from control coefficients to the stacked, quadrature-
/// weighted final state (W(T), W'(T)). Rows are ordered: all displacement
/// components, then all velocity components, each scaled by sqrt(w).
struct ControlOperator {
  Eigen::MatrixXd mat;  // (2 * nodes * ncomp) x K
  ControlBasis basis;
  double T = 0.0;
  double dt = 0.0;
  long steps = 0;
  BoxDomain domain;
  int ncomp = 0;
};

/// Stacks a state into the operator's row space (sqrt-weighted so the
/// Euclidean norm is the discrete L2 x L2 norm).
Eigen::VectorXd stack_state(const State& state, const Grid& grid);

struct AssembleOptions {
  SimOptions sim;
  int threads = 1;
};

/// K independent simulations from zero data, one per basis coefficient.
ControlOperator assemble_control_operator(const SystemInstance& red_sys,
                                          const ControlBasis& basis, double T,
                                          const AssembleOptions& opt = {});

/// Final stacked state of the homogeneous problem.
Eigen::VectorXd free_final_state(const SystemInstance& red_sys,
                                 const State& init, double T,
                                 const SimOptions& opt = SimOptions());

enum class LeastSquaresSolver { ldlt, cg };

struct SolveOptions {
  LeastSquaresSolver solver = LeastSquaresSolver::ldlt;
  int max_cg_iterations = 5000;
  double cg_tolerance = 1e-12;
  bool compute_spectrum = true;
};

struct SynthesisResult {
  ControlSignal control;
  Eigen::VectorXd coefficients;
  double residual_final = 0.0;   // ||Lambda c - target||, always reported
  double free_norm = 0.0;        // ||free final state|| for the same run
  double control_norm = 0.0;     // L2(0,T; Gamma) norm of H
  Eigen::VectorXd gramian_spectrum;  // singular values, descending
};

/// Minimizes ||c||^2 + eps^{-1} ||Lambda c - target||^2 through the
/// Tychonoff-regularized normal equations (solved on whichever of the primal
/// or Gramian side is smaller; identical minimizer either way).
SynthesisResult solve_null_control(const ControlOperator& op,
                                   const Eigen::VectorXd& target, double eps,
                                   const SolveOptions& opt = SolveOptions());

struct SynthesisOptions {
  int time_knots = 128;
  double eps = 1e-8;
  SolveOptions solve;
  AssembleOptions assemble;
  double tol = 1e-9;  // compatibility / rank gates
};

/// Full pipeline: validate compatibility and the rank condition, reduce the
/// system, drive the reduced difference state to zero, return the control
/// (applied unchanged to the full system).
SynthesisResult synthesize_sync_control(const SystemInstance& full_sys,
                                        const GroupPartition& partition,
                                        const State& init, double T,
                                        const SynthesisOptions& opt = {});

/// H = H_neumann + D^{-1} B U|_Gamma, sampled from the trace's per-step
/// boundary values. Requires M = N and invertible D.
ControlSignal neumann_to_robin_lift(const ControlSignal& H_neumann,
                                    const SimulationTrace& fwd_trace,
                                    const Eigen::MatrixXd& D,
                                    const Eigen::MatrixXd& B);

/// Singular values of the operator matrix, descending.
Eigen::VectorXd gramian_spectrum(const ControlOperator& op);

}  // namespace wavesync
