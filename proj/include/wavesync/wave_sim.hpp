#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

#include "wavesync/sync_algebra.hpp"

namespace wavesync {

/// Interval [0, L] or axis-aligned rectangle, uniform grid, wave speed 1.
struct BoxDomain {
  int dim = 1;
  std::array<double, 2> lengths{1.0, 1.0};
  std::array<int, 2> grid_nodes{0, 0};

  int node_count() const {
    return dim == 1 ? grid_nodes[0] : grid_nodes[0] * grid_nodes[1];
  }
  double dx(int axis) const {
    return lengths[axis] / (grid_nodes[axis] - 1);
  }
  double diameter() const;
};

BoxDomain make_box(int dim, const std::vector<double>& lengths,
                   const std::vector<int>& nodes);

/// Static grid data shared by the stepping and quadrature routines:
/// node weights (trapezoid), boundary node list with per-face memberships,
/// and boundary weights.
struct Grid {
  BoxDomain domain;
  Eigen::VectorXd w;                 // node_count, interior quadrature
  Eigen::VectorXd sqrt_w;            // element-wise sqrt of w
  std::vector<int> boundary_nodes;   // canonical (index-sorted) order
  Eigen::VectorXd boundary_w;        // per boundary node, face quadrature
  // For each boundary node: inward neighbor and spacing per incident face.
  struct FaceHit {
    int axis;
    int inward_node;  // index of the neighbor one step inside
    double h;         // spacing along that axis
  };
  std::vector<std::vector<FaceHit>> faces;  // parallel to boundary_nodes

  int nb() const { return static_cast<int>(boundary_nodes.size()); }
};

Grid build_grid(const BoxDomain& domain);

/// A coupled system placed on a domain. Construction validates shapes and
/// that B is similar to a real symmetric matrix (well-posedness gate).
struct SystemInstance {
  CouplingSpec coupling;
  BoxDomain domain;

  int N() const { return coupling.N(); }
  int M() const { return coupling.M(); }
};

SystemInstance make_system(const CouplingSpec& coupling,
                           const BoxDomain& domain);

/// Adjoint companion: transposed couplings, no control channels.
SystemInstance adjoint_of(const SystemInstance& sys);

/// Displacement/velocity pair. Storage is (nodes x N): column k is the k-th
/// component field, contiguous in memory.
struct State {
  Eigen::MatrixXd u;
  Eigen::MatrixXd v;
  double t = 0.0;
};

State zero_state(const SystemInstance& sys);

/// Boundary control H sampled at the simulation time steps. samples[k] is
/// the (boundary nodes x M) matrix at t = k*dt; identically zero outside
/// the stored range (compact support in [0, T_support]).
struct ControlSignal {
  double dt = 0.0;
  double T_support = 0.0;
  std::vector<Eigen::MatrixXd> samples;

  bool empty() const { return samples.empty(); }
  /// Zero-padded access past the stored range.
  Eigen::MatrixXd at(long k, int nb, int M) const;
};

struct SimulationTrace {
  std::vector<double> times;          // snapshot times, first = t0
  std::vector<State> states;          // snapshots (always includes final)
  std::vector<double> energies;       // at snapshot times
  std::vector<Eigen::MatrixXd> boundary_u;  // per *step*: nb x N
  double dt = 0.0;
  long steps = 0;
  BoxDomain domain;
  int ncomp = 0;

  const State& final_state() const { return states.back(); }
};

struct SimOptions {
  double cfl_factor = 0.5;
  int snapshot_every = 1;
  /// If > 0, overrides the CFL-derived step (still checked against CFL).
  double dt_override = 0.0;
};

/// One velocity-Verlet (leapfrog with velocity half-steps) step. The Robin
/// condition enters through second-order ghost-node elimination. slice_t is
/// the control at the step start; slice_t_dt at the step end (pass the same
/// matrix, or leave empty, to hold the control frozen across the step).
State step(const State& state, const SystemInstance& sys,
           const Eigen::MatrixXd& slice_t, double dt,
           const Eigen::MatrixXd& slice_t_dt = Eigen::MatrixXd());

/// Integrates to T; deterministic; snapshots every snapshot_every steps plus
/// the final step. Pass an empty ControlSignal for the homogeneous problem.
SimulationTrace simulate(const SystemInstance& sys, const State& init,
                         const ControlSignal& control, double T,
                         const SimOptions& opt = SimOptions());

/// Homogeneous run of the transposed-coupling system.
SimulationTrace simulate_adjoint(const SystemInstance& sys, const State& init,
                                 double T, const SimOptions& opt = SimOptions());

/// E = 1/2 [ sum_k (||V_k||^2 + ||grad U_k||^2) + (AU,U) + (BU,U)_Gamma ]
/// with trapezoid quadrature (gradient term at cell midpoints).
double energy(const State& state, const SystemInstance& sys);

/// Work integral int_0^T int_Gamma (D H, Phi) computed by trapezoid in time
/// from the adjoint trace's per-step boundary values.
double boundary_work(const SimulationTrace& adj, const ControlSignal& control,
                     const Eigen::MatrixXd& D);

/// | [ (U'(T), Phi(T)) - (U(T), Phi'(T)) ] - [same at 0] - boundary work |.
/// fwd must start from zero data for the textbook form of the identity.
double duality_residual(const SimulationTrace& fwd, const SimulationTrace& adj,
                        const ControlSignal& control, const Eigen::MatrixXd& D);

/// Removes the per-component spatial mean from u and v. Optional helper for
/// pure-Neumann (B = 0) data, where constants are free modes.
void remove_component_means(State& state, const Grid& grid);

struct EigenPair {
  double lambda = 0.0;
  Eigen::VectorXd vector;
};

/// Solves the 1D Robin problem for the scalar projection phi = (e, U) by the
/// substitution psi = exp(lambda*h) phi with h(x) = x^2/L - x, which turns
/// the Robin condition into a Neumann one at the cost of first/zero-order
/// interior terms. Starts from zero data; when (e^T A) != 0 the source term
/// is fed from a direct simulation with the same control. Returns the trace
/// of phi as a single-component system.
SimulationTrace robin_via_neumann(const SystemInstance& sys,
                                  const EigenPair& pair,
                                  const ControlSignal& control, double T,
                                  const SimOptions& opt = SimOptions());

}  // namespace wavesync
