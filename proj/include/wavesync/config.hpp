#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wavesync/sync_algebra.hpp"
#include "wavesync/wave_sim.hpp"

namespace wavesync {

/// Parsed experiment description. Field-by-field defaults are documented in
/// the README schema section; unknown keys are rejected to catch typos.
struct ExperimentConfig {
  // domain
  int dim = 1;
  std::vector<double> lengths{1.0};
  std::vector<int> nodes{201};

  // time
  double T = 0.0;        // 0 -> 4 * domain diameter
  double T_obs = 0.0;    // 0 -> 1.5 * T
  double cfl_factor = 0.5;

  // system
  int N = 1;
  std::vector<int> breakpoints;
  bool allow_small_blocks = false;
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  std::string d_mode = "canonical";  // canonical | from_family | explicit
  Eigen::MatrixXd D_explicit;

  // init
  struct ModeSpec {
    int component = 0;
    int mode = 0;        // cos(mode * pi * x / L) profile (1D); tensor in 2D
    double amplitude = 0.0;
    bool velocity = false;
  };
  std::string init_type = "modes";  // modes | bump | random_fourier | zero
  std::vector<ModeSpec> init_modes;
  double init_scale = 1.0;
  int init_max_mode = 3;  // random_fourier

  // control
  int time_knots = 128;
  double epsilon = 1e-8;
  int max_cg_iterations = 5000;
  std::string solver = "ldlt";  // ldlt | cg
  double residual_threshold = 1e-3;

  // verify
  double sync_threshold = 1e-3;

  // probe
  std::vector<int> probe_levels{21, 41, 81};
  double probe_knots_per_state = 2.2;
  double probe_eps = 1e-10;
  double probe_cfl = 1.0;

  // output
  std::string output_directory = "out";
  int snapshot_stride = 1;

  // runtime (flags)
  int threads = 1;
  std::uint64_t seed = 0;
};

ExperimentConfig config_from_json(const std::string& json_text);

/// Materialized pieces shared by the CLI workflows.
struct ExperimentSetup {
  ExperimentConfig cfg;
  BoxDomain domain;
  GroupPartition partition;
  SystemInstance system;
  State init;
  double T = 0.0;
  double T_obs = 0.0;
};

ExperimentSetup build_setup(const ExperimentConfig& cfg);

// Exit codes used by the driver.
inline constexpr int kExitOk = 0;
inline constexpr int kExitMatrixCondition = 2;
inline constexpr int kExitResidual = 3;
inline constexpr int kExitConfig = 4;
inline constexpr int kExitBlowUp = 5;

/// Runs one command (analyze | simulate | synthesize | verify | probe),
/// writing artifacts into cfg.output_directory. Returns the exit code and
/// prints human-readable progress to out.
int run_command(const std::string& command, const ExperimentConfig& cfg,
                std::ostream& out);

}  // namespace wavesync
