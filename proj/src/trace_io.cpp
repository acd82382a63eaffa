#include "noir/trace_io.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <cmath>
#include <limits>

#include "noir/format.hpp"

namespace noir {

void write_trace_csv(std::ostream& out, const SimulationTrace& trace) {
  out << kTraceHeader << '\n';
  auto row = [&](int k, int id, const char* kind, double value) {
    out << k << ',' << id << ',' << kind << ',' << format_double(value) << '\n';
  };
  for (std::size_t t = 0; t < trace.states.size(); ++t) {
    const int k = static_cast<int>(t) + 1;
    const VectorXd& x = trace.states[t];
    for (Eigen::Index i = 0; i < x.size(); ++i) row(k, trace.interior_ids[i], "density", x[i]);
    if (t >= trace.steps.size()) continue;
    const StepRecord& rec = trace.steps[t];
    for (Eigen::Index j = 0; j < rec.s.size(); ++j) {
      row(k, static_cast<int>(j) + 1, j < trace.inlet_count ? "inflow_u" : "outflow_v", rec.s[j]);
    }
    row(k, 0, "objective", rec.cost);
    row(k, 0, "rho_sum_u", rec.sum_u);
    row(k, 0, "rho_sum_v", rec.sum_v);
    row(k, 0, "spectral_radius", rec.spectral_radius_a);
  }
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    parts.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return parts;
}

void put(std::vector<double>& series, int k, double value, int line) {
  if (series.size() < static_cast<std::size_t>(k)) series.resize(k, std::numeric_limits<double>::quiet_NaN());
  if (!std::isnan(series[k - 1])) throw ParseError("duplicate entry", line);
  series[k - 1] = value;
}

void require_complete(const std::vector<double>& series, std::size_t length, const std::string& what) {
  if (series.size() != length ||
      std::any_of(series.begin(), series.end(), [](double v) { return std::isnan(v); })) {
    throw ParseError("trace is missing " + what + " entries", 0);
  }
}

}  // namespace

TraceTable read_trace_csv(std::istream& in) {
  TraceTable t;
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty trace", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw ParseError("expected header '" + std::string(kTraceHeader) + "'", 1);

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto parts = split_csv(line);
    if (parts.size() != 4) throw ParseError("expected 4 fields", line_no);
    const auto k = parse_int(parts[0]);
    const auto id = parse_int(parts[1]);
    const auto value = parse_double(parts[3]);
    if (!k || *k < 1 || *k > 100'000'000) throw ParseError("bad step index", line_no);
    if (!id || *id < 0 || *id > 100'000'000) throw ParseError("bad road or flow id", line_no);
    if (!value || std::isnan(*value)) throw ParseError("bad value", line_no);
    const int ki = static_cast<int>(*k);
    const int idi = static_cast<int>(*id);
    const std::string_view kind = parts[2];
    if (kind == "density") {
      put(t.density[idi], ki, *value, line_no);
    } else if (kind == "inflow_u") {
      put(t.inflow[idi], ki, *value, line_no);
    } else if (kind == "outflow_v") {
      put(t.outflow[idi], ki, *value, line_no);
    } else if (kind == "objective") {
      put(t.objective, ki, *value, line_no);
    } else if (kind == "rho_sum_u") {
      put(t.sum_u, ki, *value, line_no);
    } else if (kind == "rho_sum_v") {
      put(t.sum_v, ki, *value, line_no);
    } else if (kind == "spectral_radius") {
      put(t.spectral_radius, ki, *value, line_no);
    } else {
      throw ParseError("unknown kind '" + std::string(kind) + "'", line_no);
    }
  }

  t.steps = static_cast<int>(t.sum_u.size());
  if (t.steps == 0) throw ParseError("trace has no steps", 0);
  const std::size_t K = t.steps;
  require_complete(t.sum_u, K, "rho_sum_u");
  require_complete(t.sum_v, K, "rho_sum_v");
  require_complete(t.objective, K, "objective");
  require_complete(t.spectral_radius, K, "spectral_radius");
  for (const auto& [id, s] : t.inflow) require_complete(s, K, "inflow_u");
  for (const auto& [id, s] : t.outflow) require_complete(s, K, "outflow_v");
  for (const auto& [id, s] : t.density) require_complete(s, K + 1, "density");
  return t;
}

TraceTable read_trace_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open trace file '" + path.string() + "'");
  return read_trace_csv(in);
}

void write_summary(std::ostream& out, const SimulationTrace& trace, const NoirGraph& graph,
                   const SummaryOptions& options) {
  const int K = static_cast<int>(trace.steps.size());
  out << "steps: " << K << '\n';
  out << "seed: " << trace.seed << '\n';
  out << "interior roads: " << graph.interior_count() << ", inlets: " << graph.inlet_count()
      << ", outlets: " << graph.outlet_count() << '\n';
  out << "wall time s: " << format_double(trace.wall_time_s) << '\n';

  const int window = std::min(options.steady_window, K);
  const auto steady = K > 0 ? detect_steady_state(trace, window, options.steady_tol) : std::nullopt;
  out << "steady state (window " << window << ", tol " << format_double(options.steady_tol)
      << "): " << (steady ? std::to_string(*steady) : std::string("none")) << '\n';
  const int from = steady ? *steady : 1;
  double mu = 0.0, mv = 0.0;
  int count = 0;
  for (const StepRecord& rec : trace.steps) {
    if (rec.k < from) continue;
    mu += rec.sum_u;
    mv += rec.sum_v;
    ++count;
  }
  if (count > 0) {
    out << "mean sum u from step " << from << ": " << format_double(mu / count) << '\n';
    out << "mean sum v from step " << from << ": " << format_double(mv / count) << '\n';
  }

  const ConstraintAudit audit = audit_constraints(trace, options.d0);
  out << "budget max |sum s - d0|: " << format_double(audit.max_budget_error) << '\n';
  out << "min control: " << format_double(audit.min_control) << '\n';
  out << "min density: " << format_double(audit.min_density) << '\n';
  out << "max density over cap: " << format_double(audit.max_cap_excess) << '\n';
  out << "constraints: " << (audit.ok() ? "ok" : "VIOLATED") << '\n';

  double kkt = 0.0, rho_a = 0.0, rho_qp = 0.0;
  int shrunk = 0;
  for (const StepRecord& rec : trace.steps) {
    kkt = std::max(kkt, rec.kkt_max);
    rho_a = std::max(rho_a, rec.spectral_radius_a);
    rho_qp = std::max(rho_qp, rec.spectral_radius_qp);
    if (rec.d0_used != options.d0) ++shrunk;
  }
  out << "max kkt residual: " << format_double(kkt) << '\n';
  out << "max spectral radius A: " << format_double(rho_a) << '\n';
  out << "max spectral radius QP: " << format_double(rho_qp) << '\n';
  out << "steps with reduced d0: " << shrunk << '\n';

  if (trace.models.size() == trace.steps.size()) {
    const auto balance = conservation_audit(trace, graph, trace.models);
    double worst = 0.0;
    int flagged = 0;
    for (const MassBalance& mb : balance) {
      worst = std::max(worst, std::abs(mb.imbalance));
      flagged += mb.flagged ? 1 : 0;
    }
    out << "conservation: max |imbalance| " << format_double(worst) << ", flagged steps "
        << flagged << '\n';
  } else {
    out << "conservation: skipped (models not retained)\n";
  }
  const BiboCheck bibo = bibo_check(trace, graph);
  out << "bibo: max |x|^2 " << format_double(bibo.max_state_norm_sq) << " <= bound "
      << format_double(bibo.bound) << ": " << (bibo.ok() ? "ok" : "VIOLATED") << '\n';
}

void write_matrix_csv(std::ostream& out, const MatrixXd& m) {
  out << "row,col,value\n";
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out << r << ',' << c << ',' << format_double(m(r, c)) << '\n';
    }
  }
}

}  // namespace noir
