#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "noir/simulator.hpp"

namespace noir {

inline constexpr const char* kTraceHeader = "k,road_or_flow_id,kind,value";

/// Long-format trace: for k = 1..K+1 the interior densities x[k], and for
/// k = 1..K the boundary controls and the per-step scalars (id 0).
void write_trace_csv(std::ostream& out, const SimulationTrace& trace);

/// Columns of a trace CSV regrouped by kind.
struct TraceTable {
  int steps = 0;  ///< K
  std::map<int, std::vector<double>> density;  ///< road id -> x[1..K+1]
  std::map<int, std::vector<double>> inflow;   ///< inlet id -> u[1..K]
  std::map<int, std::vector<double>> outflow;  ///< outlet id -> v[1..K]
  std::vector<double> sum_u, sum_v, objective, spectral_radius;
};

/// Parses a trace CSV; malformed or incomplete input raises ParseError with
/// the offending line.
TraceTable read_trace_csv(std::istream& in);
TraceTable read_trace_csv_file(const std::filesystem::path& path);

struct SummaryOptions {
  int steady_window = 50;
  double steady_tol = 0.10;
  double d0 = 400.0;
};

/// Plain-text report: steady-state index, flow means, pi1-pi3 audit,
/// conservation and BIBO checks.
void write_summary(std::ostream& out, const SimulationTrace& trace, const NoirGraph& graph,
                   const SummaryOptions& options);

/// Dense matrix as (row, col, value) triples, zero-based, all entries.
void write_matrix_csv(std::ostream& out, const MatrixXd& m);

}  // namespace noir
