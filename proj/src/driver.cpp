#include <algorithm>
#include <filesystem>
#include <json.hpp>
#include <ostream>

#include "wavesync/config.hpp"
#include "wavesync/errors.hpp"
#include "wavesync/matrix_io.hpp"
#include "wavesync/sync_verify.hpp"

namespace wavesync {

namespace {

using nlohmann::json;

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (long i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(i, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_artifact(const std::string& dir, const std::string& name,
                    const std::string& content, std::ostream& out) {
  const std::filesystem::path path = std::filesystem::path(dir) / name;
  write_text_file(path.string(), content);
  out << "wrote " << path.string() << "\n";
}

SynthesisOptions synthesis_options(const ExperimentConfig& cfg) {
  SynthesisOptions opt;
  opt.time_knots = cfg.time_knots;
  opt.eps = cfg.epsilon;
  opt.solve.solver = cfg.solver == "cg" ? LeastSquaresSolver::cg
                                        : LeastSquaresSolver::ldlt;
  opt.solve.max_cg_iterations = cfg.max_cg_iterations;
  opt.assemble.threads = cfg.threads;
  opt.assemble.sim.cfl_factor = cfg.cfl_factor;
  return opt;
}

int cmd_analyze(const ExperimentConfig& cfg, std::ostream& out) {
  const ExperimentSetup setup = build_setup(cfg);
  const CompatibilityReport ca =
      check_cp_compatibility(setup.system.coupling.A, setup.partition);
  const CompatibilityReport cb =
      check_cp_compatibility(setup.system.coupling.B, setup.partition);
  const SyncMatrix C = build_sync_matrix(setup.partition);
  const RankReport rank = rank_condition(C, setup.system.coupling.D);

  json report;
  report["A_compatible"] = ca.compatible;
  report["B_compatible"] = cb.compatible;
  report["A_worst_violation"] = ca.worst_violation;
  report["B_worst_violation"] = cb.worst_violation;
  report["rank"] = rank.rank;
  report["rank_required"] = rank.required;
  report["rank_satisfied"] = rank.satisfied;
  if (ca.compatible) report["A_coefficients"] = matrix_to_json(ca.coefficients);
  if (cb.compatible) report["B_coefficients"] = matrix_to_json(cb.coefficients);

  const bool reducible = ca.compatible && cb.compatible;
  if (reducible) {
    const ReducedSystem red = reduce_system(setup.system.coupling,
                                            setup.partition);
    write_artifact(cfg.output_directory, "A_red.csv", matrix_to_csv(red.A_red),
                   out);
    write_artifact(cfg.output_directory, "B_red.csv", matrix_to_csv(red.B_red),
                   out);
    write_artifact(cfg.output_directory, "D_red.csv", matrix_to_csv(red.D_red),
                   out);
  }
  write_artifact(cfg.output_directory, "analysis.json", report.dump(2) + "\n",
                 out);
  out << "A compatible: " << (ca.compatible ? "yes" : "no")
      << ", B compatible: " << (cb.compatible ? "yes" : "no")
      << ", rank " << rank.rank << "/" << rank.required << "\n";
  if (!reducible || !rank.satisfied) return kExitMatrixCondition;
  return kExitOk;
}

int cmd_simulate(const ExperimentConfig& cfg, std::ostream& out) {
  const ExperimentSetup setup = build_setup(cfg);
  SimOptions sim;
  sim.cfl_factor = cfg.cfl_factor;
  sim.snapshot_every = std::max(1, cfg.snapshot_stride);
  const SimulationTrace trace =
      simulate(setup.system, setup.init, ControlSignal(), setup.T, sim);
  write_artifact(cfg.output_directory, "trace.csv", trace_to_csv(trace), out);
  write_artifact(cfg.output_directory, "energy.csv", energy_to_csv(trace),
                 out);
  out << "simulated " << trace.steps << " steps, dt = "
      << format_double(trace.dt)
      << ", final energy = " << format_double(trace.energies.back()) << "\n";
  return kExitOk;
}

int cmd_synthesize(const ExperimentConfig& cfg, std::ostream& out,
                   SynthesisResult* result_out = nullptr,
                   ExperimentSetup* setup_out = nullptr) {
  const ExperimentSetup setup = build_setup(cfg);
  const SynthesisOptions opt = synthesis_options(cfg);
  const SynthesisResult result = synthesize_sync_control(
      setup.system, setup.partition, setup.init, setup.T, opt);

  const Grid grid = build_grid(setup.domain);
  write_artifact(cfg.output_directory, "control.csv",
                 control_to_csv(result.control, grid.boundary_nodes), out);
  if (result.gramian_spectrum.size() > 0)
    write_artifact(cfg.output_directory, "spectrum.csv",
                   spectrum_to_csv(result.gramian_spectrum), out);
  json report;
  report["residual_final"] = result.residual_final;
  report["free_norm"] = result.free_norm;
  report["control_norm"] = result.control_norm;
  report["coefficients"] = result.coefficients.size();
  report["T"] = setup.T;
  write_artifact(cfg.output_directory, "synthesis.json", report.dump(2) + "\n",
                 out);
  out << "residual " << format_double(result.residual_final) << " against free norm "
      << format_double(result.free_norm) << "\n";
  if (result_out) *result_out = result;
  if (setup_out) *setup_out = setup;
  const double gate =
      cfg.residual_threshold * std::max(result.free_norm, 1e-300);
  if (result.free_norm > 1e-12 && result.residual_final > gate)
    return kExitResidual;
  return kExitOk;
}

int cmd_verify(const ExperimentConfig& cfg, std::ostream& out) {
  SynthesisResult result;
  ExperimentSetup setup;
  const int synth_code = cmd_synthesize(cfg, out, &result, &setup);

  VerifyOptions vopt;
  vopt.sim.cfl_factor = cfg.cfl_factor;
  vopt.sync_threshold = cfg.sync_threshold;
  const VerificationReport report =
      verify_synchronization(setup.system, setup.partition, setup.init,
                             result, setup.T, setup.T_obs, vopt);

  std::string series = "t,sync_norm\n";
  for (std::size_t k = 0; k < report.series_t.size(); ++k) {
    series += format_double(report.series_t[k]);
    series += ',';
    series += format_double(report.series_value[k]);
    series += '\n';
  }
  write_artifact(cfg.output_directory, "sync_series.csv", series, out);

  json jr;
  jr["sync_error"] = report.sync_error;
  jr["sync_denominator"] = report.sync_denominator;
  jr["denominator_relative"] = report.denominator_relative;
  for (const auto& [k, v] : report.comparison_errors)
    jr["comparison_errors"][k] = v;
  for (const auto& [k, v] : report.pass) jr["pass"][k] = v;
  write_artifact(cfg.output_directory, "verify.json", jr.dump(2) + "\n", out);
  out << "sync_error " << format_double(report.sync_error) << " ("
      << (report.pass.at("synchronized") ? "pass" : "fail") << ")\n";

  if (synth_code != kExitOk) return synth_code;
  if (!report.pass.at("synchronized")) return kExitResidual;
  return kExitOk;
}

int cmd_probe(const ExperimentConfig& cfg, std::ostream& out) {
  const ExperimentSetup setup = build_setup(cfg);
  ProbeOptions opt;
  opt.T = cfg.T;  // 0 keeps the per-level default
  opt.cfl_factor = cfg.probe_cfl;
  opt.knots_per_state = cfg.probe_knots_per_state;
  opt.eps = cfg.probe_eps;
  opt.threads = cfg.threads;
  const ProbeReport report = noncontrollability_probe(
      setup.system.coupling, setup.domain, cfg.probe_levels, opt);

  std::string csv = "nodes,sigma_min,residual_rel,free_norm,K\n";
  for (const ProbeLevel& lvl : report.levels) {
    csv += std::to_string(lvl.nodes);
    csv += ',';
    csv += format_double(lvl.sigma_min);
    csv += ',';
    csv += format_double(lvl.residual_rel);
    csv += ',';
    csv += format_double(lvl.free_norm);
    csv += ',';
    csv += std::to_string(lvl.K);
    csv += '\n';
  }
  write_artifact(cfg.output_directory, "probe.csv", csv, out);
  for (const ProbeLevel& lvl : report.levels)
    out << "nodes " << lvl.nodes << ": sigma_min "
        << format_double(lvl.sigma_min) << ", residual "
        << format_double(lvl.residual_rel) << "\n";
  return kExitOk;
}

}  // namespace

int run_command(const std::string& command, const ExperimentConfig& cfg,
                std::ostream& out) {
  try {
    std::filesystem::create_directories(cfg.output_directory);
    if (command == "analyze") return cmd_analyze(cfg, out);
    if (command == "simulate") return cmd_simulate(cfg, out);
    if (command == "synthesize") return cmd_synthesize(cfg, out);
    if (command == "verify") return cmd_verify(cfg, out);
    if (command == "probe") return cmd_probe(cfg, out);
    out << "unknown command: " << command << "\n";
    return kExitConfig;
  } catch (const IncompatibleError& e) {
    out << "matrix condition failure: " << e.what() << "\n";
    return kExitMatrixCondition;
  } catch (const RankConditionError& e) {
    out << "matrix condition failure: " << e.what() << "\n";
    return kExitMatrixCondition;
  } catch (const NotRealSpectrumError& e) {
    out << "matrix condition failure: " << e.what() << "\n";
    return kExitMatrixCondition;
  } catch (const NotDiagonalizableError& e) {
    out << "matrix condition failure: " << e.what() << "\n";
    return kExitMatrixCondition;
  } catch (const DegenerateFamilyError& e) {
    out << "matrix condition failure: " << e.what() << "\n";
    return kExitMatrixCondition;
  } catch (const ConvergenceError& e) {
    out << "solver failure: " << e.what() << "\n";
    return kExitResidual;
  } catch (const BlowUpError& e) {
    out << "simulation blow-up: " << e.what() << "\n";
    return kExitBlowUp;
  } catch (const Error& e) {
    out << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    out << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace wavesync
