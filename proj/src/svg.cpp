#include "noir/svg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace noir {
namespace {

constexpr double kWidth = 720, kHeight = 400;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 50;
constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string fixed(double v, int digits = 2) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, digits);
  if (ec != std::errc{}) return "0";
  std::string s(buf, end);
  if (s == "-0.00" || s == "-0.0" || s == "-0") s.erase(0, 1);
  return s;
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// 1, 2 or 5 times a power of ten, giving about `target` intervals.
double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10 * mag;
}

}  // namespace

std::string render_svg(const PlotSpec& spec) {
  std::size_t n = 0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const PlotSeries& s : spec.series) {
    n = std::max(n, s.values.size());
    for (double v : s.values) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  if (hi - lo < 1e-9 * (1 + std::abs(hi))) {
    const double pad = std::max(1.0, std::abs(hi) * 0.1);
    lo -= pad;
    hi += pad;
  }
  const double ystep = nice_step(hi - lo, 5);
  lo = std::floor(lo / ystep) * ystep;
  hi = std::ceil(hi / ystep) * ystep;
  const double k0 = spec.first_k;
  const double k1 = spec.first_k + std::max<std::size_t>(n, 2) - 1;

  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double k) { return kLeft + (k - k0) / (k1 - k0) * pw; };
  auto py = [&](double v) { return kTop + (hi - v) / (hi - lo) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fixed(kWidth, 0) << "\" height=\""
    << fixed(kHeight, 0) << "\" viewBox=\"0 0 " << fixed(kWidth, 0) << ' ' << fixed(kHeight, 0)
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << fixed(kLeft + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
    << escape(spec.title) << "</text>\n";

  // Axes and grid.
  for (double v = lo; v <= hi + ystep * 1e-6; v += ystep) {
    o << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(py(v)) << "\" x2=\"" << fixed(kLeft + pw)
      << "\" y2=\"" << fixed(py(v)) << "\" stroke=\"#dddddd\"/>\n";
    o << "<text x=\"" << fixed(kLeft - 6) << "\" y=\"" << fixed(py(v) + 4)
      << "\" text-anchor=\"end\">" << fixed(v, ystep < 1 ? 2 : 0) << "</text>\n";
  }
  const double xstep = nice_step(std::max(1.0, k1 - k0), 6);
  for (double k = std::ceil(k0 / xstep) * xstep; k <= k1 + 1e-9; k += xstep) {
    o << "<text x=\"" << fixed(px(k)) << "\" y=\"" << fixed(kTop + ph + 18)
      << "\" text-anchor=\"middle\">" << fixed(k, 0) << "</text>\n";
  }
  o << "<rect x=\"" << fixed(kLeft) << "\" y=\"" << fixed(kTop) << "\" width=\"" << fixed(pw)
    << "\" height=\"" << fixed(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<text x=\"" << fixed(kLeft + pw / 2) << "\" y=\"" << fixed(kHeight - 10)
    << "\" text-anchor=\"middle\">step k</text>\n";
  o << "<text x=\"16\" y=\"" << fixed(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << fixed(kTop + ph / 2) << ")\">" << escape(spec.y_label) << "</text>\n";

  if (spec.marker_k) {
    const double x = px(*spec.marker_k);
    o << "<line x1=\"" << fixed(x) << "\" y1=\"" << fixed(kTop) << "\" x2=\"" << fixed(x) << "\" y2=\""
      << fixed(kTop + ph) << "\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n";
    o << "<text x=\"" << fixed(x + 4) << "\" y=\"" << fixed(kTop + 14) << "\">steady k=" << *spec.marker_k
      << "</text>\n";
  }

  for (std::size_t i = 0; i < spec.series.size(); ++i) {
    const PlotSeries& s = spec.series[i];
    const char* color = kColors[i % std::size(kColors)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t t = 0; t < s.values.size(); ++t) {
      if (t) o << ' ';
      o << fixed(px(k0 + static_cast<double>(t))) << ',' << fixed(py(s.values[t]));
    }
    o << "\"/>\n";
    const double ly = kTop + 10 + 18 * static_cast<double>(i);
    o << "<line x1=\"" << fixed(kLeft + pw + 12) << "\" y1=\"" << fixed(ly) << "\" x2=\""
      << fixed(kLeft + pw + 32) << "\" y2=\"" << fixed(ly) << "\" stroke=\"" << color
      << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << fixed(kLeft + pw + 38) << "\" y=\"" << fixed(ly + 4) << "\">" << escape(s.label)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

namespace {

std::vector<int> pick(const std::map<int, std::vector<double>>& pool, const std::vector<int>& wanted,
                      const char* what) {
  std::vector<int> ids;
  if (wanted.empty()) {
    for (const auto& [id, s] : pool) {
      if (ids.size() == 2) break;
      ids.push_back(id);
    }
    return ids;
  }
  for (int id : wanted) {
    if (!pool.count(id)) throw Error(std::string("no ") + what + " with id " + std::to_string(id) + " in trace");
    ids.push_back(id);
  }
  return ids;
}

}  // namespace

std::vector<PlotFile> report_plots(const TraceTable& table, const PlotSelection& selection) {
  std::vector<PlotFile> files;

  PlotSpec flows{"External flows of selected boundary roads", "vehicles per step", {}, 1, std::nullopt};
  for (int id : pick(table.inflow, selection.inlets, "inlet")) {
    flows.series.push_back({"u" + std::to_string(id), table.inflow.at(id)});
  }
  for (int id : pick(table.outflow, selection.outlets, "outlet")) {
    flows.series.push_back({"v" + std::to_string(id), table.outflow.at(id)});
  }
  files.push_back({"boundary_flows.svg", render_svg(flows)});

  PlotSpec dens{"Densities of selected interior roads", "vehicles", {}, 1, std::nullopt};
  for (int id : pick(table.density, selection.interior, "interior road")) {
    dens.series.push_back({"road " + std::to_string(id), table.density.at(id)});
  }
  files.push_back({"interior_densities.svg", render_svg(dens)});

  const int window = std::min(selection.steady_window, table.steps);
  PlotSpec agg{"Total inflow and outflow of the network", "vehicles per step", {}, 1,
               detect_steady_state(table.sum_u, table.sum_v, window, selection.steady_tol)};
  agg.series.push_back({"sum u", table.sum_u});
  agg.series.push_back({"sum v", table.sum_v});
  files.push_back({"aggregate_flows.svg", render_svg(agg)});
  return files;
}

}  // namespace noir
