#pragma once

#include <optional>
#include <string>
#include <vector>

#include "noir/trace_io.hpp"

namespace noir {

struct PlotSeries {
  std::string label;
  std::vector<double> values;  ///< values[i] belongs to step first_k + i
};

struct PlotSpec {
  std::string title;
  std::string y_label;
  std::vector<PlotSeries> series;
  int first_k = 1;
  std::optional<int> marker_k;  ///< vertical line, e.g. the steady-state step
};

/// Static line chart; output bytes depend only on the spec.
std::string render_svg(const PlotSpec& spec);

struct PlotSelection {
  std::vector<int> inlets;    ///< empty: the two lowest inlet ids
  std::vector<int> outlets;   ///< empty: the two lowest outlet ids
  std::vector<int> interior;  ///< empty: the two lowest interior ids
  int steady_window = 50;
  double steady_tol = 0.10;
};

struct PlotFile {
  std::string name;
  std::string svg;
};

/// boundary_flows.svg, interior_densities.svg and aggregate_flows.svg for a
/// trace. Unknown ids in the selection raise Error.
std::vector<PlotFile> report_plots(const TraceTable& table, const PlotSelection& selection = {});

}  // namespace noir
