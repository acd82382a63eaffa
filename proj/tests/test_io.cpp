#include <doctest.h>

#include <sstream>

#include "noir/config.hpp"
#include "noir/svg.hpp"
#include "noir/trace_io.hpp"

using namespace noir;

namespace {

int parse_error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return -1;
}

SimulationTrace tiny_trace() {
  const NoirGraph g = load_noir(
      "noir 1 2 4\nroad 1 90 2\nroad 2 90 2\nroad 3 90 2\nroad 4 90 2\nedge 1 3\nedge 3 4\nedge 4 2\n");
  SimulationConfig cfg;
  cfg.steps = 6;
  cfg.mpc.d0 = 4;
  cfg.p_range = {0.1, 0.3};
  return run(g, cfg);
}

}  // namespace

TEST_CASE("config parsing") {
  const SimulationConfig c = parse_config(R"(
# grid experiment
[network]
rows = 6
cols = 5
inlets = 3
outlets = 2
grid_seed = 4
block_length_min_m = 1000
block_length_max_m = 1500.5
lanes_min = 1
lanes_max = 4

[mpc]
beta = 0.5   # weight
d0 = 250
horizon = 4
density_lower_bound = false
shrink_d0_on_infeasible = true
max_shrinks = 2

[sim]
seed = 77
steps = 20
p_min = 0.1
p_max = 0.3
initial_fill = 0.25
retain_models = false
)");
  CHECK(c.grid.rows == 6);
  CHECK(c.grid.cols == 5);
  CHECK(c.grid.inlets == 3);
  CHECK(c.grid.outlets == 2);
  CHECK(c.grid.seed == 4);
  CHECK(c.grid.options.block_length_max_m == 1500.5);
  CHECK(c.grid.options.lanes_max == 4);
  CHECK(c.mpc.beta == 0.5);
  CHECK(c.mpc.d0 == 250);
  CHECK(c.mpc.horizon == 4);
  CHECK_FALSE(c.mpc.density_lower_bound);
  CHECK(c.mpc.shrink_d0_on_infeasible);
  CHECK(c.mpc.max_shrinks == 2);
  CHECK(c.seed == 77);
  CHECK(c.steps == 20);
  CHECK(c.p_range.lo == 0.1);
  CHECK(c.p_range.hi == 0.3);
  CHECK(c.initial_fill == 0.25);
  CHECK_FALSE(c.retain_models);
  CHECK(c.network_path.empty());

  // defaults
  const SimulationConfig d = parse_config("");
  CHECK(d.p_range.lo == 0.05);
  CHECK(d.p_range.hi == 0.95);
  CHECK(d.mpc.horizon == 5);
  CHECK(d.mpc.d0 == 400);
  CHECK(d.initial_fill == 0.5);
  CHECK(d.mpc.density_lower_bound);
  CHECK_FALSE(d.mpc.shrink_d0_on_infeasible);
}

TEST_CASE("config errors") {
  CHECK(parse_error_line("[network]\nrows = 3\nspeed = 4\n") == 3);
  CHECK(parse_error_line("[roads]\n") == 1);
  CHECK(parse_error_line("rows = 3\n") == 1);
  CHECK(parse_error_line("[sim]\nsteps = 3\nsteps = 4\n") == 3);
  CHECK(parse_error_line("[sim]\nsteps =\n") == 2);
  CHECK(parse_error_line("[sim]\nsteps = ten\n") == 2);
  CHECK(parse_error_line("[mpc]\nbeta = 0.5x\n") == 2);
  CHECK(parse_error_line("[mpc]\ndensity_lower_bound = yes\n") == 2);
  CHECK(parse_error_line("[mpc\n") == 1);
  CHECK(parse_error_line("[mpc]\nbeta\n") == 2);
  // values that parse but fail the config checks
  CHECK_THROWS_AS(parse_config("[sim]\np_min = 0.9\np_max = 0.1\n"), Error);
  CHECK_THROWS_AS(parse_config("[sim]\nsteps = 0\n"), Error);
  CHECK_THROWS_AS(load_config("/nonexistent/x.conf"), std::ios_base::failure);
}

TEST_CASE("config echo round trips") {
  SimulationConfig c;
  c.grid.rows = 3;
  c.mpc.beta = 0.1;
  c.p_range = {0.123456789, 0.3};
  c.seed = 99;
  c.retain_models = false;
  const std::string text = echo_config(c);
  const SimulationConfig back = parse_config(text);
  CHECK(echo_config(back) == text);
  CHECK(back.p_range.lo == c.p_range.lo);
  CHECK(back.mpc.beta == c.mpc.beta);

  const SimulationConfig with_path = parse_config("[network]\npath = nets/a.noir\n", "/base");
  CHECK(with_path.network_path == "/base/nets/a.noir");
  CHECK(echo_config(parse_config(echo_config(with_path))) == echo_config(with_path));
}

TEST_CASE("trace CSV round trip") {
  const SimulationTrace t = tiny_trace();
  std::ostringstream out;
  write_trace_csv(out, t);
  const std::string text = out.str();
  CHECK(text.rfind(std::string(kTraceHeader) + "\n", 0) == 0);

  std::istringstream in(text);
  const TraceTable table = read_trace_csv(in);
  CHECK(table.steps == 6);
  REQUIRE(table.inflow.count(1) == 1);
  REQUIRE(table.outflow.count(2) == 1);
  CHECK(table.inflow.at(1).size() == 6);
  CHECK(table.density.at(3).size() == 7);
  for (int k = 0; k < 6; ++k) {
    CHECK(table.inflow.at(1)[k] == t.steps[k].s[0]);
    CHECK(table.outflow.at(2)[k] == t.steps[k].s[1]);
    CHECK(table.sum_u[k] == t.steps[k].sum_u);
    CHECK(table.objective[k] == t.steps[k].cost);
  }
  for (int k = 0; k < 7; ++k) CHECK(table.density.at(4)[k] == t.states[k][1]);
}

TEST_CASE("trace CSV errors") {
  auto line_of = [](const std::string& text) {
    std::istringstream in(text);
    try {
      read_trace_csv(in);
    } catch (const ParseError& e) {
      return e.line();
    }
    return -1;
  };
  const std::string h = std::string(kTraceHeader) + "\n";
  CHECK(line_of("") == 1);
  CHECK(line_of("k,id,kind,value\n") == 1);
  CHECK(line_of(h + "1,0,objective\n") == 2);
  CHECK(line_of(h + "0,0,objective,1\n") == 2);
  CHECK(line_of(h + "1,x,objective,1\n") == 2);
  CHECK(line_of(h + "1,0,speed,1\n") == 2);
  CHECK(line_of(h + "1,0,objective,1\n1,0,objective,2\n") == 3);
  CHECK(line_of(h + "1,0,objective,abc\n") == 2);
  CHECK(line_of(h + "1,0,objective,1\n") == 0);  // incomplete
  CHECK(line_of(h) == 0);
  CHECK_THROWS_AS(read_trace_csv_file("/nonexistent/trace.csv"), std::ios_base::failure);
}

TEST_CASE("summary and matrix dumps") {
  const SimulationTrace t = tiny_trace();
  const NoirGraph g = load_noir(
      "noir 1 2 4\nroad 1 90 2\nroad 2 90 2\nroad 3 90 2\nroad 4 90 2\nedge 1 3\nedge 3 4\nedge 4 2\n");
  std::ostringstream out;
  SummaryOptions opt;
  opt.d0 = 4;
  write_summary(out, t, g, opt);
  const std::string s = out.str();
  CHECK(s.find("steps: 6\n") != std::string::npos);
  CHECK(s.find("constraints: ok") != std::string::npos);
  CHECK(s.find("steady state (window 6, tol 0.1)") != std::string::npos);

  std::ostringstream m;
  write_matrix_csv(m, (MatrixXd(2, 2) << 1, 2.5, -3, 0).finished());
  CHECK(m.str() == "row,col,value\n0,0,1\n0,1,2.5\n1,0,-3\n1,1,0\n");
}

TEST_CASE("SVG output") {
  PlotSpec spec{"flows", "vehicles", {{"a", {1, 2, 3}}, {"b & c", {3, 2, 1}}}, 1, 2};
  const std::string svg = render_svg(spec);
  CHECK(svg == render_svg(spec));
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("b &amp; c") != std::string::npos);
  CHECK(svg.find("steady k=2") != std::string::npos);
  spec.marker_k.reset();
  CHECK(render_svg(spec).find("steady k=") == std::string::npos);
  // degenerate inputs still render
  CHECK_FALSE(render_svg(PlotSpec{"empty", "", {}, 1, std::nullopt}).empty());
}

TEST_CASE("report plots") {
  TraceTable t;
  t.steps = 60;
  t.sum_u.assign(60, 200.0);
  t.sum_v.assign(60, 200.0);
  t.objective.assign(60, 1.0);
  t.spectral_radius.assign(60, 0.5);
  for (int id : {1, 2, 3}) t.inflow[id].assign(60, 50.0);
  for (int id : {4, 5}) t.outflow[id].assign(60, 50.0);
  for (int id : {9, 7, 8}) t.density[id].assign(61, 10.0);

  const auto files = report_plots(t);
  REQUIRE(files.size() == 3);
  CHECK(files[0].name == "boundary_flows.svg");
  CHECK(files[1].name == "interior_densities.svg");
  CHECK(files[2].name == "aggregate_flows.svg");
  CHECK(files[2].svg.find("steady k=1") != std::string::npos);
  // two lowest ids per class by default
  CHECK(files[0].svg.find(">u1<") != std::string::npos);
  CHECK(files[0].svg.find(">u2<") != std::string::npos);
  CHECK(files[0].svg.find(">u3<") == std::string::npos);
  CHECK(files[1].svg.find(">road 7<") != std::string::npos);
  CHECK(files[1].svg.find(">road 8<") != std::string::npos);
  CHECK(files[1].svg.find(">road 9<") == std::string::npos);

  PlotSelection sel;
  sel.inlets = {3};
  CHECK(report_plots(t, sel)[0].svg.find(">u3<") != std::string::npos);
  sel.inlets = {42};
  CHECK_THROWS_AS(report_plots(t, sel), Error);
}
