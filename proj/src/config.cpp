#include "noir/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "noir/format.hpp"

namespace noir {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

struct Value {
  std::string_view text;
  int line;
  std::string key;

  double real() const {
    auto v = parse_double(text);
    if (!v) throw ParseError(key + ": expected a number, got '" + std::string(text) + "'", line);
    return *v;
  }
  long long integer() const {
    auto v = parse_int(text);
    if (!v) throw ParseError(key + ": expected an integer, got '" + std::string(text) + "'", line);
    return *v;
  }
  bool boolean() const {
    if (text == "true") return true;
    if (text == "false") return false;
    throw ParseError(key + ": expected true or false, got '" + std::string(text) + "'", line);
  }
  std::uint64_t seed() const {
    const long long v = integer();
    if (v < 0) throw ParseError(key + ": seed must be >= 0", line);
    return static_cast<std::uint64_t>(v);
  }
  int count() const {
    const long long v = integer();
    if (v < 0 || v > 1'000'000'000) throw ParseError(key + ": out of range", line);
    return static_cast<int>(v);
  }
};

using Setter = std::function<void(SimulationConfig&, const Value&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"network.path", [](SimulationConfig& c, const Value& v) { c.network_path = std::string(v.text); }},
      {"network.rows", [](SimulationConfig& c, const Value& v) { c.grid.rows = v.count(); }},
      {"network.cols", [](SimulationConfig& c, const Value& v) { c.grid.cols = v.count(); }},
      {"network.inlets", [](SimulationConfig& c, const Value& v) { c.grid.inlets = v.count(); }},
      {"network.outlets", [](SimulationConfig& c, const Value& v) { c.grid.outlets = v.count(); }},
      {"network.grid_seed", [](SimulationConfig& c, const Value& v) { c.grid.seed = v.seed(); }},
      {"network.block_length_min_m",
       [](SimulationConfig& c, const Value& v) { c.grid.options.block_length_min_m = v.real(); }},
      {"network.block_length_max_m",
       [](SimulationConfig& c, const Value& v) { c.grid.options.block_length_max_m = v.real(); }},
      {"network.lanes_min", [](SimulationConfig& c, const Value& v) { c.grid.options.lanes_min = v.count(); }},
      {"network.lanes_max", [](SimulationConfig& c, const Value& v) { c.grid.options.lanes_max = v.count(); }},
      {"network.vehicle_length_m", [](SimulationConfig& c, const Value& v) { c.vehicle_length_m = v.real(); }},
      {"mpc.beta", [](SimulationConfig& c, const Value& v) { c.mpc.beta = v.real(); }},
      {"mpc.d0", [](SimulationConfig& c, const Value& v) { c.mpc.d0 = v.real(); }},
      {"mpc.horizon", [](SimulationConfig& c, const Value& v) { c.mpc.horizon = v.count(); }},
      {"mpc.density_lower_bound",
       [](SimulationConfig& c, const Value& v) { c.mpc.density_lower_bound = v.boolean(); }},
      {"mpc.shrink_d0_on_infeasible",
       [](SimulationConfig& c, const Value& v) { c.mpc.shrink_d0_on_infeasible = v.boolean(); }},
      {"mpc.max_shrinks", [](SimulationConfig& c, const Value& v) { c.mpc.max_shrinks = v.count(); }},
      {"sim.seed", [](SimulationConfig& c, const Value& v) { c.seed = v.seed(); }},
      {"sim.steps", [](SimulationConfig& c, const Value& v) { c.steps = v.count(); }},
      {"sim.p_min", [](SimulationConfig& c, const Value& v) { c.p_range.lo = v.real(); }},
      {"sim.p_max", [](SimulationConfig& c, const Value& v) { c.p_range.hi = v.real(); }},
      {"sim.initial_fill", [](SimulationConfig& c, const Value& v) { c.initial_fill = v.real(); }},
      {"sim.scale_inlet_columns",
       [](SimulationConfig& c, const Value& v) { c.scale_inlet_columns = v.boolean(); }},
      {"sim.retain_models", [](SimulationConfig& c, const Value& v) { c.retain_models = v.boolean(); }},
  };
  return table;
}

}  // namespace

SimulationConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  SimulationConfig cfg;
  std::string section;
  std::set<std::string> seen;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", line_no);
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section != "network" && section != "mpc" && section != "sim") {
        throw ParseError("unknown section [" + section + "]", line_no);
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", line_no);
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (section.empty()) throw ParseError("key '" + key + "' outside any section", line_no);
    if (value.empty()) throw ParseError("key '" + key + "' has no value", line_no);
    const std::string full = section + "." + key;
    const auto it = setters().find(full);
    if (it == setters().end()) throw ParseError("unknown key '" + key + "' in [" + section + "]", line_no);
    if (!seen.insert(full).second) throw ParseError("duplicate key '" + key + "'", line_no);
    it->second(cfg, Value{value, line_no, full});
  }

  if (!cfg.network_path.empty()) {
    const std::filesystem::path p(cfg.network_path);
    if (p.is_relative() && !base_dir.empty()) cfg.network_path = (base_dir / p).string();
  }
  cfg.check();
  return cfg;
}

SimulationConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open config file '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

std::string echo_config(const SimulationConfig& cfg) {
  std::ostringstream out;
  auto b = [](bool v) { return v ? "true" : "false"; };
  out << "[network]\n";
  if (!cfg.network_path.empty()) {
    out << "path = " << cfg.network_path << '\n';
  } else {
    const GridOptions& o = cfg.grid.options;
    out << "rows = " << cfg.grid.rows << '\n'
        << "cols = " << cfg.grid.cols << '\n'
        << "inlets = " << cfg.grid.inlets << '\n'
        << "outlets = " << cfg.grid.outlets << '\n'
        << "grid_seed = " << cfg.grid.seed << '\n'
        << "block_length_min_m = " << format_double(o.block_length_min_m) << '\n'
        << "block_length_max_m = " << format_double(o.block_length_max_m) << '\n'
        << "lanes_min = " << o.lanes_min << '\n'
        << "lanes_max = " << o.lanes_max << '\n';
  }
  out << "vehicle_length_m = " << format_double(cfg.vehicle_length_m) << '\n';
  out << "\n[mpc]\n"
      << "beta = " << format_double(cfg.mpc.beta) << '\n'
      << "d0 = " << format_double(cfg.mpc.d0) << '\n'
      << "horizon = " << cfg.mpc.horizon << '\n'
      << "density_lower_bound = " << b(cfg.mpc.density_lower_bound) << '\n'
      << "shrink_d0_on_infeasible = " << b(cfg.mpc.shrink_d0_on_infeasible) << '\n'
      << "max_shrinks = " << cfg.mpc.max_shrinks << '\n';
  out << "\n[sim]\n"
      << "seed = " << cfg.seed << '\n'
      << "steps = " << cfg.steps << '\n'
      << "p_min = " << format_double(cfg.p_range.lo) << '\n'
      << "p_max = " << format_double(cfg.p_range.hi) << '\n'
      << "initial_fill = " << format_double(cfg.initial_fill) << '\n'
      << "scale_inlet_columns = " << b(cfg.scale_inlet_columns) << '\n'
      << "retain_models = " << b(cfg.retain_models) << '\n';
  return out.str();
}

}  // namespace noir
