#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "wavesync/control_synthesis.hpp"
#include "wavesync/partition.hpp"

namespace wavesync {

/// Doubles are emitted with 17 significant digits (round-trip exact).
std::string format_double(double x);

std::string matrix_to_csv(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_csv(const std::string& text);

std::string partition_to_string(const GroupPartition& partition);
std::vector<int> breakpoints_from_string(const std::string& text);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

/// Trace CSV: header `t,comp,node,U,V`, one row per (snapshot, comp, node).
std::string trace_to_csv(const SimulationTrace& trace);
/// Energy CSV: header `t,E`.
std::string energy_to_csv(const SimulationTrace& trace);
/// Control CSV: header `t,boundary_node,channel,value`.
std::string control_to_csv(const ControlSignal& control,
                           const std::vector<int>& boundary_nodes);
ControlSignal control_from_csv(const std::string& text,
                               const std::vector<int>& boundary_nodes);
/// One singular value per line, descending.
std::string spectrum_to_csv(const Eigen::VectorXd& sigma);

}  // namespace wavesync
