#include "wavesync/config.hpp"

#include <cmath>
#include <json.hpp>
#include <random>
#include <set>

#include "wavesync/errors.hpp"
#include "wavesync/partition.hpp"

namespace wavesync {

namespace {

using nlohmann::json;

Eigen::MatrixXd matrix_from_json(const json& j, const std::string& key) {
  if (!j.is_array())
    throw ValidationError("'" + key + "' must be an array of rows");
  std::vector<std::vector<double>> rows;
  for (const auto& row : j) {
    if (!row.is_array())
      throw ValidationError("'" + key + "' rows must be arrays");
    std::vector<double> r;
    for (const auto& v : row) {
      if (!v.is_number())
        throw ValidationError("'" + key + "' entries must be numbers");
      r.push_back(v.get<double>());
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) return Eigen::MatrixXd();
  Eigen::MatrixXd m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw ValidationError("'" + key + "' rows have different lengths");
    for (std::size_t c = 0; c < rows[i].size(); ++c) m(i, c) = rows[i][c];
  }
  return m;
}

}  // namespace

ExperimentConfig config_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("config root must be an object");

  static const std::set<std::string> known = {
      "dim",          "lengths",        "nodes",
      "T",            "T_obs",          "cfl_factor",
      "N",            "breakpoints",    "allow_small_blocks",
      "A",            "B",              "d_mode",
      "D",            "init_type",      "init_modes",
      "init_scale",   "init_max_mode",  "time_knots",
      "epsilon",      "max_cg_iterations", "solver",
      "residual_threshold",             "sync_threshold",
      "probe_levels", "probe_knots_per_state",
      "probe_eps",    "probe_cfl",      "output_directory",
      "snapshot_stride",                "threads",
      "seed"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ValidationError("unknown config key: '" + it.key() + "'");

  ExperimentConfig cfg;
  auto get_int = [&](const char* key, int& slot) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_integer())
      throw ValidationError(std::string("'") + key + "' must be an integer");
    slot = j[key].get<int>();
  };
  auto get_double = [&](const char* key, double& slot) {
    if (!j.contains(key)) return;
    if (!j[key].is_number())
      throw ValidationError(std::string("'") + key + "' must be a number");
    slot = j[key].get<double>();
  };
  auto get_bool = [&](const char* key, bool& slot) {
    if (!j.contains(key)) return;
    if (!j[key].is_boolean())
      throw ValidationError(std::string("'") + key + "' must be a boolean");
    slot = j[key].get<bool>();
  };
  auto get_string = [&](const char* key, std::string& slot) {
    if (!j.contains(key)) return;
    if (!j[key].is_string())
      throw ValidationError(std::string("'") + key + "' must be a string");
    slot = j[key].get<std::string>();
  };

  get_int("dim", cfg.dim);
  if (j.contains("lengths")) {
    cfg.lengths = j["lengths"].get<std::vector<double>>();
  }
  if (j.contains("nodes")) cfg.nodes = j["nodes"].get<std::vector<int>>();
  get_double("T", cfg.T);
  get_double("T_obs", cfg.T_obs);
  get_double("cfl_factor", cfg.cfl_factor);
  get_int("N", cfg.N);
  if (j.contains("breakpoints"))
    cfg.breakpoints = j["breakpoints"].get<std::vector<int>>();
  get_bool("allow_small_blocks", cfg.allow_small_blocks);
  if (j.contains("A")) cfg.A = matrix_from_json(j["A"], "A");
  if (j.contains("B")) cfg.B = matrix_from_json(j["B"], "B");
  get_string("d_mode", cfg.d_mode);
  if (j.contains("D")) cfg.D_explicit = matrix_from_json(j["D"], "D");
  get_string("init_type", cfg.init_type);
  if (j.contains("init_modes")) {
    if (!j["init_modes"].is_array())
      throw ValidationError("'init_modes' must be an array");
    for (const auto& m : j["init_modes"]) {
      if (!m.is_object())
        throw ValidationError("'init_modes' entries must be objects");
      ExperimentConfig::ModeSpec spec;
      for (auto it = m.begin(); it != m.end(); ++it) {
        const std::string& k = it.key();
        if (k == "component")
          spec.component = it.value().get<int>();
        else if (k == "mode")
          spec.mode = it.value().get<int>();
        else if (k == "amplitude")
          spec.amplitude = it.value().get<double>();
        else if (k == "velocity")
          spec.velocity = it.value().get<bool>();
        else
          throw ValidationError("unknown init_modes key: '" + k + "'");
      }
      cfg.init_modes.push_back(spec);
    }
  }
  get_double("init_scale", cfg.init_scale);
  get_int("init_max_mode", cfg.init_max_mode);
  get_int("time_knots", cfg.time_knots);
  get_double("epsilon", cfg.epsilon);
  get_int("max_cg_iterations", cfg.max_cg_iterations);
  get_string("solver", cfg.solver);
  get_double("residual_threshold", cfg.residual_threshold);
  get_double("sync_threshold", cfg.sync_threshold);
  if (j.contains("probe_levels"))
    cfg.probe_levels = j["probe_levels"].get<std::vector<int>>();
  get_double("probe_knots_per_state", cfg.probe_knots_per_state);
  get_double("probe_eps", cfg.probe_eps);
  get_double("probe_cfl", cfg.probe_cfl);
  get_string("output_directory", cfg.output_directory);
  get_int("snapshot_stride", cfg.snapshot_stride);
  get_int("threads", cfg.threads);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
      throw ValidationError("'seed' must be a nonnegative integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }

  if (cfg.solver != "ldlt" && cfg.solver != "cg")
    throw ValidationError("'solver' must be \"ldlt\" or \"cg\"");
  if (cfg.d_mode != "canonical" && cfg.d_mode != "from_family" &&
      cfg.d_mode != "explicit")
    throw ValidationError(
        "'d_mode' must be \"canonical\", \"from_family\" or \"explicit\"");
  if (cfg.init_type != "modes" && cfg.init_type != "bump" &&
      cfg.init_type != "random_fourier" && cfg.init_type != "zero")
    throw ValidationError("unknown 'init_type'");
  return cfg;
}

namespace {

/// cos(mode*pi*x/L) profile; constant for mode 0; tensor product in 2D.
Eigen::VectorXd cosine_profile(const BoxDomain& domain, int mode) {
  const int n = domain.node_count();
  Eigen::VectorXd out(n);
  if (domain.dim == 1) {
    for (int i = 0; i < n; ++i)
      out(i) = std::cos(mode * M_PI * i * domain.dx(0) / domain.lengths[0]);
  } else {
    const int nx = domain.grid_nodes[0];
    for (int jy = 0; jy < domain.grid_nodes[1]; ++jy)
      for (int i = 0; i < nx; ++i)
        out(i + jy * nx) =
            std::cos(mode * M_PI * i * domain.dx(0) / domain.lengths[0]) *
            std::cos(mode * M_PI * jy * domain.dx(1) / domain.lengths[1]);
  }
  return out;
}

Eigen::VectorXd bump_profile(const BoxDomain& domain) {
  const int n = domain.node_count();
  Eigen::VectorXd out(n);
  if (domain.dim == 1) {
    for (int i = 0; i < n; ++i) {
      const double s = std::sin(M_PI * i * domain.dx(0) / domain.lengths[0]);
      out(i) = s * s;
    }
  } else {
    const int nx = domain.grid_nodes[0];
    for (int jy = 0; jy < domain.grid_nodes[1]; ++jy)
      for (int i = 0; i < nx; ++i) {
        const double sx = std::sin(M_PI * i * domain.dx(0) / domain.lengths[0]);
        const double sy =
            std::sin(M_PI * jy * domain.dx(1) / domain.lengths[1]);
        out(i + jy * nx) = sx * sx * sy * sy;
      }
  }
  return out;
}

}  // namespace

ExperimentSetup build_setup(const ExperimentConfig& cfg) {
  ExperimentSetup setup;
  setup.cfg = cfg;
  setup.domain = make_box(cfg.dim, cfg.lengths, cfg.nodes);

  const int N = cfg.N;
  if (N < 1) throw ValidationError("'N' must be at least 1");
  std::vector<int> breaks = cfg.breakpoints;
  bool allow_small = cfg.allow_small_blocks;
  if (breaks.empty()) {
    breaks = {0, N};   // trivial single-group partition
    allow_small = true;
  }
  if (breaks.back() != N)
    throw ValidationError("last breakpoint must equal N");
  setup.partition = make_partition(breaks, allow_small);

  CouplingSpec coupling;
  coupling.A = cfg.A.size() ? cfg.A : Eigen::MatrixXd::Zero(N, N);
  coupling.B = cfg.B.size() ? cfg.B : Eigen::MatrixXd::Zero(N, N);
  if (coupling.A.rows() != N || coupling.A.cols() != N)
    throw ValidationError("'A' must be N x N");
  if (coupling.B.rows() != N || coupling.B.cols() != N)
    throw ValidationError("'B' must be N x N");

  if (cfg.d_mode == "canonical") {
    coupling.D = build_control_matrix(setup.partition,
                                      ControlMatrixMode::canonical, nullptr);
  } else if (cfg.d_mode == "from_family") {
    const SimilarityCertificate cert = symmetric_similarity(coupling.B, 1e-9);
    const BiorthogonalFamily family =
        biorthogonal_family(cert, kernel_basis(setup.partition));
    coupling.D = build_control_matrix(setup.partition,
                                      ControlMatrixMode::from_family, &family);
  } else {
    if (cfg.D_explicit.rows() != N)
      throw ValidationError("'D' must have N rows");
    coupling.D = cfg.D_explicit;
  }

  setup.system = make_system(coupling, setup.domain);
  setup.T = cfg.T > 0.0 ? cfg.T : 4.0 * setup.domain.diameter();
  setup.T_obs = cfg.T_obs > 0.0 ? cfg.T_obs : 1.5 * setup.T;
  if (setup.T_obs < setup.T)
    throw ValidationError("'T_obs' must be at least T");

  State init = zero_state(setup.system);
  if (cfg.init_type == "modes") {
    for (const auto& m : cfg.init_modes) {
      if (m.component < 0 || m.component >= N)
        throw ValidationError("init mode component out of range");
      const Eigen::VectorXd prof =
          cfg.init_scale * m.amplitude * cosine_profile(setup.domain, m.mode);
      if (m.velocity)
        init.v.col(m.component) += prof;
      else
        init.u.col(m.component) += prof;
    }
  } else if (cfg.init_type == "bump") {
    init.u.col(0) = cfg.init_scale * bump_profile(setup.domain);
  } else if (cfg.init_type == "random_fourier") {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int c = 0; c < N; ++c)
      for (int m = 0; m <= cfg.init_max_mode; ++m) {
        const double decay = 1.0 / (1.0 + m * m);
        const Eigen::VectorXd prof = cosine_profile(setup.domain, m);
        init.u.col(c) += cfg.init_scale * decay * unif(rng) * prof;
        init.v.col(c) += cfg.init_scale * decay * unif(rng) * prof;
      }
  }
  setup.init = init;
  return setup;
}

}  // namespace wavesync
