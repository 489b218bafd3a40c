#include "wavesync/matrix_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "wavesync/errors.hpp"

namespace wavesync {

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

std::string matrix_to_csv(const Eigen::MatrixXd& m) {
  std::string out;
  for (long i = 0; i < m.rows(); ++i) {
    for (long j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

Eigen::MatrixXd matrix_from_csv(const std::string& text) {
  std::vector<std::vector<double>> rows;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ValidationError("matrix CSV cell is not a number: " + cell);
      }
    }
    if (!row.empty()) rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ValidationError("matrix CSV has no rows");
  const std::size_t cols = rows[0].size();
  Eigen::MatrixXd m(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols)
      throw ValidationError("matrix CSV rows have inconsistent lengths");
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rows[i][j];
  }
  return m;
}

std::string partition_to_string(const GroupPartition& partition) {
  std::string out;
  for (std::size_t k = 0; k < partition.breakpoints.size(); ++k) {
    if (k) out += ',';
    out += std::to_string(partition.breakpoints[k]);
  }
  return out;
}

std::vector<int> breakpoints_from_string(const std::string& text) {
  if (text.empty()) throw ValidationError("empty breakpoint list");
  std::vector<int> out;
  std::istringstream cells(text);
  std::string cell;
  while (std::getline(cells, cell, ',')) {
    try {
      std::size_t used = 0;
      const int value = std::stoi(cell, &used);
      while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used])))
        ++used;
      if (used != cell.size())
        throw ValidationError("breakpoint is not an integer: " + cell);
      out.push_back(value);
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception&) {
      throw ValidationError("breakpoint is not an integer: " + cell);
    }
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ValidationError("cannot open for writing: " + path);
  f << content;
  if (!f) throw ValidationError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open for reading: " + path);
  std::ostringstream out;
  out << f.rdbuf();
  return out.str();
}

std::string trace_to_csv(const SimulationTrace& trace) {
  std::string out = "t,comp,node,U,V\n";
  for (std::size_t k = 0; k < trace.states.size(); ++k) {
    const State& s = trace.states[k];
    const std::string t = format_double(trace.times[k]);
    for (long c = 0; c < s.u.cols(); ++c)
      for (long i = 0; i < s.u.rows(); ++i) {
        out += t;
        out += ',';
        out += std::to_string(c);
        out += ',';
        out += std::to_string(i);
        out += ',';
        out += format_double(s.u(i, c));
        out += ',';
        out += format_double(s.v(i, c));
        out += '\n';
      }
  }
  return out;
}

std::string energy_to_csv(const SimulationTrace& trace) {
  std::string out = "t,E\n";
  for (std::size_t k = 0; k < trace.energies.size(); ++k) {
    out += format_double(trace.times[k]);
    out += ',';
    out += format_double(trace.energies[k]);
    out += '\n';
  }
  return out;
}

std::string control_to_csv(const ControlSignal& control,
                           const std::vector<int>& boundary_nodes) {
  std::string out = "t,boundary_node,channel,value\n";
  for (std::size_t k = 0; k < control.samples.size(); ++k) {
    const Eigen::MatrixXd& s = control.samples[k];
    const std::string t = format_double(k * control.dt);
    for (long b = 0; b < s.rows(); ++b)
      for (long m = 0; m < s.cols(); ++m) {
        out += t;
        out += ',';
        out += std::to_string(boundary_nodes[b]);
        out += ',';
        out += std::to_string(m);
        out += ',';
        out += format_double(s(b, m));
        out += '\n';
      }
  }
  return out;
}

ControlSignal control_from_csv(const std::string& text,
                               const std::vector<int>& boundary_nodes) {
  std::map<int, int> node_row;
  for (std::size_t b = 0; b < boundary_nodes.size(); ++b)
    node_row[boundary_nodes[b]] = static_cast<int>(b);

  struct Entry {
    double t;
    int row;
    int channel;
    double value;
  };
  std::vector<Entry> entries;
  int max_channel = -1;
  std::istringstream lines(text);
  std::string line;
  bool first = true;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("t,", 0) == 0) continue;  // header
    }
    std::istringstream cells(line);
    std::string cell;
    std::vector<std::string> parts;
    while (std::getline(cells, cell, ',')) parts.push_back(cell);
    if (parts.size() != 4)
      throw ValidationError("control CSV row must have 4 columns");
    Entry e;
    try {
      e.t = std::stod(parts[0]);
      const int node = std::stoi(parts[1]);
      const auto it = node_row.find(node);
      if (it == node_row.end())
        throw ValidationError("control CSV references unknown boundary node");
      e.row = it->second;
      e.channel = std::stoi(parts[2]);
      e.value = std::stod(parts[3]);
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception&) {
      throw ValidationError("control CSV cell is not numeric: " + line);
    }
    max_channel = std::max(max_channel, e.channel);
    entries.push_back(e);
  }
  if (entries.empty()) throw ValidationError("control CSV has no data rows");

  // Recover dt from the sorted distinct times.
  std::vector<double> times;
  for (const Entry& e : entries) times.push_back(e.t);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  double dt = 0.0;
  if (times.size() > 1) dt = times[1] - times[0];
  const double t_max = times.back();
  long steps = 0;
  if (dt > 0.0) steps = static_cast<long>(std::llround(t_max / dt));

  ControlSignal sig;
  sig.dt = dt;
  sig.T_support = t_max;
  sig.samples.assign(
      steps + 1, Eigen::MatrixXd::Zero(boundary_nodes.size(), max_channel + 1));
  for (const Entry& e : entries) {
    const long k =
        dt > 0.0 ? static_cast<long>(std::llround(e.t / dt)) : 0;
    if (k < 0 || k > steps)
      throw ValidationError("control CSV times are not uniformly spaced");
    sig.samples[k](e.row, e.channel) = e.value;
  }
  return sig;
}

std::string spectrum_to_csv(const Eigen::VectorXd& sigma) {
  std::string out = "sigma\n";
  for (long i = 0; i < sigma.size(); ++i) {
    out += format_double(sigma(i));
    out += '\n';
  }
  return out;
}

}  // namespace wavesync
