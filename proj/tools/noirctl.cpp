// noirctl: validate networks, run closed-loop simulations and sweeps, plot traces.
#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "noir/config.hpp"
#include "noir/format.hpp"
#include "noir/svg.hpp"
#include "noir/trace_io.hpp"

namespace fs = std::filesystem;
using namespace noir;

namespace {

enum Exit { kOk = 0, kFailed = 1, kIo = 2, kInternal = 3 };

class InvariantBreach : public Error {
 public:
  using Error::Error;
};

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::ios_base::failure("write failed for '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw std::ios_base::failure("cannot create directory '" + dir.string() + "'");
  }
}

void dump_step(const fs::path& dir, const NoirGraph& graph, const SimulationConfig& cfg,
               const SimulationTrace& trace, int k) {
  if (k < 1 || k > static_cast<int>(trace.steps.size())) {
    throw Error("--dump-step must be within 1.." + std::to_string(trace.steps.size()));
  }
  const fs::path out = dir / ("dump_step_" + std::to_string(k));
  ensure_dir(out);
  const ProbabilityModel model = sample(graph, cfg.seed, static_cast<std::uint64_t>(k), cfg.p_range);
  AssembleOptions ao;
  ao.scale_inlet_columns = cfg.scale_inlet_columns;
  const StateSpace<double> ss = assemble(graph, model, ao);
  const PredictionModel<double> pm = build_prediction(ss, cfg.mpc.horizon);
  MpcConfig mpc = cfg.mpc;
  mpc.x_max = trace.x_max;
  mpc.inlet_count = graph.inlet_count();
  const QpProblem<double> qp = build_qp(pm, trace.states[k - 1], mpc, trace.steps[k - 1].d0_used);
  auto dump = [&](const char* name, const MatrixXd& m) {
    std::ostringstream s;
    write_matrix_csv(s, m);
    write_file(out / (std::string(name) + ".csv"), s.str());
  };
  dump("P", model.P());
  dump("Q", model.Q);
  dump("A", ss.A);
  dump("B", ss.B);
  dump("G", pm.G);
  dump("H", pm.H);
  dump("W1", qp.W1);
  dump("W2", qp.W2);
  dump("A_ineq", qp.A_ineq);
  dump("b_ineq", qp.b_ineq);
  dump("A_eq", qp.A_eq);
  dump("b_eq", qp.b_eq);
}

// One closed-loop run written to `dir`.
void run_to_dir(const SimulationConfig& cfg, const NoirGraph& graph, const fs::path& dir, int dump) {
  ensure_dir(dir);
  SimulationTrace trace = run(graph, cfg);
  trace.config_echo = echo_config(cfg);

  std::ostringstream csv;
  write_trace_csv(csv, trace);
  write_file(dir / "trace.csv", csv.str());
  write_file(dir / "config.txt", trace.config_echo);
  write_file(dir / "network.noir", serialize_noir(graph));

  std::ostringstream summary;
  SummaryOptions so;
  so.d0 = cfg.mpc.d0;
  write_summary(summary, trace, graph, so);
  write_file(dir / "summary.txt", summary.str());
  if (dump > 0) dump_step(dir, graph, cfg, trace, dump);

  const ConstraintAudit audit = audit_constraints(trace, cfg.mpc.d0);
  if (!audit.ok(1e-6)) throw InvariantBreach("recorded trajectory violates the flow or density constraints");
}

int report_error(const std::exception& e) {
  std::cerr << "error: " << e.what() << '\n';
  if (dynamic_cast<const std::ios_base::failure*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) {
    return kIo;
  }
  if (dynamic_cast<const InvariantBreach*>(&e)) return kInternal;
  if (auto* step = dynamic_cast<const StepError*>(&e)) return step->infeasible() ? kFailed : kInternal;
  if (dynamic_cast<const Error*>(&e)) return kFailed;
  return kInternal;
}

// CLI11 has its own exit codes; fold every usage error into 1.
int usage_exit(const CLI::App& app, const CLI::Error& e) {
  return app.exit(e) == 0 ? kOk : kFailed;
}

std::vector<double> parse_betas(const std::string& text) {
  std::vector<double> betas;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = parse_double(item);
    if (!b || *b < 0) throw CLI::ValidationError("--beta", "'" + item + "' is not a nonnegative number");
    betas.push_back(*b);
  }
  if (betas.empty()) throw CLI::ValidationError("--beta", "needs at least one value");
  return betas;
}

int cmd_validate(const std::string& net, double vehicle_length) {
  const NoirGraph graph = load_noir_file(net, vehicle_length);
  const ValidationReport report = validate(graph);
  if (report.ok()) {
    std::cout << "ok: " << graph.road_count() << " roads, " << graph.inlet_count() << " inlets, "
              << graph.outlet_count() << " outlets, " << graph.interior_count() << " interior\n";
    return kOk;
  }
  for (const Violation& v : report.violations) {
    std::cout << v.rule << " " << v.subject << ": " << v.message << '\n';
  }
  return kFailed;
}

int cmd_sweep(const std::string& config, const std::vector<double>& betas, const fs::path& out) {
  const SimulationConfig base = load_config(config);
  const NoirGraph graph = make_network(base);
  ensure_dir(out);

  std::vector<fs::path> dirs;
  std::vector<std::exception_ptr> errors(betas.size());
  std::vector<std::thread> workers;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    dirs.push_back(out / ("beta_" + format_double(betas[i])));
  }
  for (std::size_t i = 0; i < betas.size(); ++i) {
    workers.emplace_back([&, i] {
      try {
        SimulationConfig cfg = base;
        cfg.mpc.beta = betas[i];
        run_to_dir(cfg, graph, dirs[i], 0);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();

  int code = kOk;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const std::exception& e) {
      std::cerr << "beta " << format_double(betas[i]) << ": ";
      code = std::max(code, report_error(e));
    }
  }
  if (code != kOk) return code;

  std::ostringstream merged;
  merged << "beta,k,sum_u,sum_v,objective\n";
  for (std::size_t i = 0; i < betas.size(); ++i) {
    const TraceTable t = read_trace_csv_file(dirs[i] / "trace.csv");
    for (int k = 1; k <= t.steps; ++k) {
      merged << format_double(betas[i]) << ',' << k << ',' << format_double(t.sum_u[k - 1]) << ','
             << format_double(t.sum_v[k - 1]) << ',' << format_double(t.objective[k - 1]) << '\n';
    }
  }
  write_file(out / "comparison.csv", merged.str());
  std::ostringstream seeds;
  seeds << "seed = " << base.seed << '\n' << "betas =";
  for (double b : betas) seeds << ' ' << format_double(b);
  seeds << '\n';
  write_file(out / "sweep.txt", seeds.str());
  std::cout << "wrote " << betas.size() << " runs to " << out.string() << '\n';
  return kOk;
}

void report_one(const fs::path& dir, const PlotSelection& sel) {
  const TraceTable table = read_trace_csv_file(dir / "trace.csv");
  for (const PlotFile& f : report_plots(table, sel)) write_file(dir / f.name, f.svg);
}

int cmd_report(const fs::path& dir, const PlotSelection& sel) {
  if (!fs::is_directory(dir)) throw std::ios_base::failure("no such directory '" + dir.string() + "'");
  if (fs::exists(dir / "trace.csv")) {
    report_one(dir, sel);
    std::cout << "wrote plots to " << dir.string() << '\n';
    return kOk;
  }
  std::vector<fs::path> runs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "trace.csv")) runs.push_back(entry.path());
  }
  if (runs.empty()) throw std::ios_base::failure("no trace.csv under '" + dir.string() + "'");
  std::sort(runs.begin(), runs.end());
  for (const fs::path& r : runs) report_one(r, sel);
  std::cout << "wrote plots for " << runs.size() << " runs under " << dir.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Traffic network simulator with MPC boundary control"};
  app.require_subcommand(1);

  auto* validate_cmd = app.add_subcommand("validate", "Check a network file against the structural rules");
  std::string net_path;
  double vehicle_length = kDefaultVehicleLength;
  validate_cmd->add_option("network", net_path, "Network file")->required();
  validate_cmd->add_option("--vehicle-length", vehicle_length, "Vehicle length in meters");

  auto* run_cmd = app.add_subcommand("run", "Run one closed-loop simulation");
  std::string config_path, out_dir;
  int dump = 0;
  run_cmd->add_option("config", config_path, "Config file")->required();
  run_cmd->add_option("-o,--out", out_dir, "Output directory")->required();
  run_cmd->add_option("--dump-step", dump, "Also dump P, Q, A, B, G, H and the QP of this step");

  auto* sweep_cmd = app.add_subcommand("sweep", "Run one simulation per beta value");
  std::string sweep_config, sweep_out, beta_text;
  sweep_cmd->add_option("config", sweep_config, "Config file")->required();
  sweep_cmd->add_option("--beta", beta_text, "Comma-separated beta values")->required();
  sweep_cmd->add_option("-o,--out", sweep_out, "Output directory")->required();

  auto* report_cmd = app.add_subcommand("report", "Plot a run or sweep directory as SVG");
  std::string report_dir;
  PlotSelection sel;
  report_cmd->add_option("dir", report_dir, "Run or sweep output directory")->required();
  report_cmd->add_option("--inlets", sel.inlets, "Inlet ids to plot")->delimiter(',');
  report_cmd->add_option("--outlets", sel.outlets, "Outlet ids to plot")->delimiter(',');
  report_cmd->add_option("--roads", sel.interior, "Interior road ids to plot")->delimiter(',');

  auto* gen_cmd = app.add_subcommand("gen-grid", "Write a synthetic grid network");
  int rows = 8, cols = 8, inlets = 4, outlets = 4;
  std::uint64_t seed = 1;
  std::string gen_out;
  GridOptions grid;
  gen_cmd->add_option("--rows", rows)->required();
  gen_cmd->add_option("--cols", cols)->required();
  gen_cmd->add_option("--inlets", inlets)->required();
  gen_cmd->add_option("--outlets", outlets)->required();
  gen_cmd->add_option("--seed", seed);
  gen_cmd->add_option("--block-length-min", grid.block_length_min_m, "Meters");
  gen_cmd->add_option("--block-length-max", grid.block_length_max_m, "Meters");
  gen_cmd->add_option("--lanes-min", grid.lanes_min);
  gen_cmd->add_option("--lanes-max", grid.lanes_max);
  gen_cmd->add_option("-o,--out", gen_out, "Network file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return usage_exit(app, e);
  }

  try {
    if (validate_cmd->parsed()) return cmd_validate(net_path, vehicle_length);
    if (run_cmd->parsed()) {
      const SimulationConfig cfg = load_config(config_path);
      run_to_dir(cfg, make_network(cfg), out_dir, dump);
      std::cout << "wrote run to " << out_dir << '\n';
      return kOk;
    }
    if (sweep_cmd->parsed()) {
      std::vector<double> betas;
      try {
        betas = parse_betas(beta_text);
      } catch (const CLI::Error& e) {
        return usage_exit(app, e);
      }
      return cmd_sweep(sweep_config, betas, sweep_out);
    }
    if (report_cmd->parsed()) return cmd_report(report_dir, sel);
    if (gen_cmd->parsed()) {
      const NoirGraph g = generate_grid(rows, cols, inlets, outlets, seed, grid);
      write_file(gen_out, serialize_noir(g));
      std::cout << "wrote " << g.road_count() << " roads to " << gen_out << '\n';
      return kOk;
    }
  } catch (const std::exception& e) {
    return report_error(e);
  }
  return kInternal;
}
