#include "noir/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>

#include "noir/format.hpp"
#include "noir/random.hpp"

namespace noir {

NoirGraph::NoirGraph(int n_in, int n_out_end, int n_total, std::vector<RoadGeometry> geometry,
                     std::vector<Edge> edges, double vehicle_length_m)
    : n_in_(n_in),
      n_out_end_(n_out_end),
      n_total_(n_total),
      vehicle_length_(vehicle_length_m),
      geometry_(std::move(geometry)),
      edges_(std::move(edges)) {
  if (n_in < 0 || n_out_end < n_in || n_total < n_out_end) {
    throw IndexError("inconsistent partition: need 0 <= N_in <= N_out <= N, got " +
                     std::to_string(n_in) + ", " + std::to_string(n_out_end) + ", " +
                     std::to_string(n_total));
  }
  if (static_cast<int>(geometry_.size()) != n_total) {
    throw IndexError("geometry table has " + std::to_string(geometry_.size()) +
                     " entries for " + std::to_string(n_total) + " roads");
  }
  if (!(vehicle_length_ > 0.0)) throw Error("vehicle length must be positive");

  std::sort(edges_.begin(), edges_.end());
  in_.resize(n_total);
  out_.resize(n_total);
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    const Edge& edge = edges_[e];
    if (!contains(edge.from) || !contains(edge.to)) {
      throw IndexError("edge (" + std::to_string(edge.from.value) + "," +
                       std::to_string(edge.to.value) + ") references a road outside 1.." +
                       std::to_string(n_total));
    }
    if (edge.from == edge.to) {
      throw Error("self-loop on road " + std::to_string(edge.from.value));
    }
    if (e > 0 && edges_[e - 1] == edge) {
      throw Error("duplicate edge (" + std::to_string(edge.from.value) + "," +
                  std::to_string(edge.to.value) + ")");
    }
    out_[edge.from.value - 1].push_back(edge.to);
    in_[edge.to.value - 1].push_back(edge.from);
  }
  for (auto& list : in_) std::sort(list.begin(), list.end());
}

void NoirGraph::check(RoadId id) const {
  if (!contains(id)) {
    throw IndexError("unknown road " + std::to_string(id.value) + " (valid 1.." +
                     std::to_string(n_total_) + ")");
  }
}

RoadClass NoirGraph::classify(RoadId id) const {
  check(id);
  if (id.value <= n_in_) return RoadClass::inlet;
  if (id.value <= n_out_end_) return RoadClass::outlet;
  return RoadClass::interior;
}

const std::vector<RoadId>& NoirGraph::in_neighbors(RoadId id) const {
  check(id);
  return in_[id.value - 1];
}

const std::vector<RoadId>& NoirGraph::out_neighbors(RoadId id) const {
  check(id);
  return out_[id.value - 1];
}

const RoadGeometry& NoirGraph::geometry(RoadId id) const {
  check(id);
  return geometry_[id.value - 1];
}

double NoirGraph::rho_max(RoadId id) const {
  if (classify(id) != RoadClass::interior) return std::numeric_limits<double>::infinity();
  const RoadGeometry& g = geometry_[id.value - 1];
  return g.lanes * g.length_m / vehicle_length_;
}

Eigen::Index NoirGraph::state_index(RoadId id) const {
  if (classify(id) != RoadClass::interior) {
    throw IndexError("road " + std::to_string(id.value) + " is not interior");
  }
  return id.value - n_out_end_ - 1;
}

VectorXd NoirGraph::interior_capacity() const {
  VectorXd cap(interior_count());
  for (Eigen::Index i = 0; i < cap.size(); ++i) cap[i] = rho_max(interior_road(i));
  return cap;
}

namespace {

std::string road_name(RoadId id) { return std::to_string(id.value); }

std::string edge_name(RoadId from, RoadId to) {
  return "(" + std::to_string(from.value) + "," + std::to_string(to.value) + ")";
}

}  // namespace

ValidationReport validate(const NoirGraph& graph) {
  ValidationReport report;
  auto flag = [&](std::string rule, std::string subject, std::string message) {
    report.violations.push_back({std::move(rule), std::move(subject), std::move(message)});
  };

  for (int r = 1; r <= graph.road_count(); ++r) {
    const RoadId id{r};
    const auto& in = graph.in_neighbors(id);
    const auto& out = graph.out_neighbors(id);
    switch (graph.classify(id)) {
      case RoadClass::inlet:
        for (RoadId j : in) {
          flag("inlet-has-in-neighbor", edge_name(j, id), "inlet roads must have no in-neighbors");
        }
        for (RoadId j : out) {
          if (!graph.is_interior(j)) {
            flag("inlet-out-neighbor-not-interior", edge_name(id, j),
                 "inlet out-neighbor must be interior");
          }
        }
        break;
      case RoadClass::outlet:
        for (RoadId j : out) {
          flag("outlet-has-out-neighbor", edge_name(id, j), "outlet roads must have no out-neighbors");
        }
        break;
      case RoadClass::interior: {
        if (out.empty() && !in.empty()) {
          flag("interior-dead-end", road_name(id), "interior road has no out-neighbor");
        }
        const RoadGeometry& g = graph.geometry(id);
        if (!(g.length_m > 0.0) || g.lanes < 1) {
          flag("invalid-geometry", road_name(id), "interior road needs positive length and lanes");
        }
        break;
      }
    }
    if (in.empty() && out.empty()) {
      flag("isolated-road", road_name(id), "isolated road: no in- or out-neighbors");
    }
  }

  // Every interior road must be able to drain to an outlet, otherwise
  // vehicles entering the network can be trapped forever.
  std::vector<char> drains(graph.road_count() + 1, 0);
  std::queue<RoadId> frontier;
  for (int r = graph.inlet_count() + 1; r <= graph.boundary_count(); ++r) {
    drains[r] = 1;
    frontier.push(RoadId{r});
  }
  while (!frontier.empty()) {
    const RoadId id = frontier.front();
    frontier.pop();
    for (RoadId up : graph.in_neighbors(id)) {
      if (!drains[up.value]) {
        drains[up.value] = 1;
        frontier.push(up);
      }
    }
  }
  for (int r = graph.boundary_count() + 1; r <= graph.road_count(); ++r) {
    if (!drains[r]) {
      flag("no-path-to-outlet", road_name(RoadId{r}), "interior road cannot reach any outlet");
    }
  }
  return report;
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

int expect_int(std::string_view token, int line, const char* what) {
  auto v = parse_int(token);
  if (!v || *v < std::numeric_limits<int>::min() || *v > std::numeric_limits<int>::max()) {
    throw ParseError("expected integer " + std::string(what) + ", got '" + std::string(token) + "'",
                     line);
  }
  return static_cast<int>(*v);
}

}  // namespace

NoirGraph load_noir(std::string_view document, double vehicle_length_m) {
  int n_in = -1, n_out = -1, n_total = -1;
  std::map<int, std::pair<RoadGeometry, int>> roads;  // id -> (geometry, line)
  std::vector<std::pair<Edge, int>> edges;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= document.size()) {
    std::size_t end = document.find('\n', pos);
    if (end == std::string_view::npos) end = document.size();
    std::string_view line = document.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = split_ws(line);
    if (tok.empty()) continue;

    if (tok[0] == "noir") {
      if (n_total >= 0) throw ParseError("duplicate 'noir' header", line_no);
      if (tok.size() != 4) throw ParseError("header must be 'noir <N_in> <N_out> <N>'", line_no);
      n_in = expect_int(tok[1], line_no, "N_in");
      n_out = expect_int(tok[2], line_no, "N_out");
      n_total = expect_int(tok[3], line_no, "N");
      if (n_in < 0 || n_out < n_in || n_total < n_out) {
        throw IndexError("line " + std::to_string(line_no) +
                         ": partition bounds must satisfy 0 <= N_in <= N_out <= N");
      }
      continue;
    }
    if (n_total < 0) throw ParseError("'noir' header must come first", line_no);

    if (tok[0] == "road") {
      if (tok.size() != 4) throw ParseError("road line must be 'road <id> <length_m> <lanes>'", line_no);
      const int id = expect_int(tok[1], line_no, "road id");
      auto length = parse_double(tok[2]);
      if (!length) throw ParseError("bad road length '" + std::string(tok[2]) + "'", line_no);
      const int lanes = expect_int(tok[3], line_no, "lane count");
      if (id < 1 || id > n_total) {
        throw IndexError("line " + std::to_string(line_no) + ": road " + std::to_string(id) +
                         " outside 1.." + std::to_string(n_total));
      }
      if (!roads.emplace(id, std::make_pair(RoadGeometry{*length, lanes}, line_no)).second) {
        throw ParseError("road " + std::to_string(id) + " declared twice", line_no);
      }
    } else if (tok[0] == "edge") {
      if (tok.size() != 3) throw ParseError("edge line must be 'edge <from> <to>'", line_no);
      const int from = expect_int(tok[1], line_no, "edge source");
      const int to = expect_int(tok[2], line_no, "edge target");
      if (from < 1 || from > n_total || to < 1 || to > n_total) {
        throw IndexError("line " + std::to_string(line_no) + ": edge (" + std::to_string(from) +
                         "," + std::to_string(to) + ") outside 1.." + std::to_string(n_total));
      }
      if (from == to) {
        throw ParseError("self-loop on road " + std::to_string(from), line_no);
      }
      edges.push_back({Edge{RoadId{from}, RoadId{to}}, line_no});
    } else {
      throw ParseError("unknown directive '" + std::string(tok[0]) + "'", line_no);
    }
  }
  if (n_total < 0) throw ParseError("missing 'noir' header", 0);

  std::vector<RoadGeometry> geometry(n_total);
  for (int id = 1; id <= n_total; ++id) {
    auto it = roads.find(id);
    if (it == roads.end()) throw ParseError("missing road line for road " + std::to_string(id), 0);
    geometry[id - 1] = it->second.first;
  }
  std::sort(edges.begin(), edges.end());
  std::vector<Edge> plain;
  plain.reserve(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (e > 0 && edges[e - 1].first == edges[e].first) {
      throw ParseError("duplicate edge (" + std::to_string(edges[e].first.from.value) + "," +
                           std::to_string(edges[e].first.to.value) + ")",
                       edges[e].second);
    }
    plain.push_back(edges[e].first);
  }
  return NoirGraph(n_in, n_out, n_total, std::move(geometry), std::move(plain), vehicle_length_m);
}

NoirGraph load_noir_file(const std::string& path, double vehicle_length_m) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open network file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_noir(buf.str(), vehicle_length_m);
}

std::string serialize_noir(const NoirGraph& graph) {
  std::ostringstream out;
  out << "noir " << graph.inlet_count() << ' ' << graph.boundary_count() << ' '
      << graph.road_count() << '\n';
  for (int r = 1; r <= graph.road_count(); ++r) {
    const RoadGeometry& g = graph.geometry(RoadId{r});
    out << "road " << r << ' ' << format_double(g.length_m) << ' ' << g.lanes << '\n';
  }
  for (const Edge& e : graph.edges()) {
    out << "edge " << e.from.value << ' ' << e.to.value << '\n';
  }
  return out.str();
}

namespace {

struct Junction {
  int row;
  int col;
  friend auto operator<=>(const Junction&, const Junction&) = default;
};

// Evenly spread `count` slots along a side of `length` junctions.
std::vector<int> spread(int count, int length) {
  std::vector<int> slots;
  for (int j = 0; j < count; ++j) slots.push_back(static_cast<int>((j + 0.5) * length / count));
  return slots;
}

// Round-robin split between the first and second side, spilling over when
// one side is full.
std::pair<int, int> split_round_robin(int n, int first_len, int second_len) {
  int first = std::min((n + 1) / 2, first_len);
  int second = n - first;
  if (second > second_len) {
    first += second - second_len;
    second = second_len;
  }
  return {first, second};
}

}  // namespace

NoirGraph generate_grid(int rows, int cols, int n_inlets, int n_outlets, std::uint64_t seed,
                        const GridOptions& options) {
  if (rows < 2 || cols < 2) throw Error("grid needs rows, cols >= 2");
  if (n_inlets < 1 || n_outlets < 1) throw Error("grid needs at least one inlet and one outlet");
  if (n_inlets > rows + cols || n_outlets > rows + cols) {
    throw Error("infeasible placement: at most rows + cols = " + std::to_string(rows + cols) +
                " inlets and outlets each");
  }
  if (options.block_length_min_m <= 0.0 || options.block_length_max_m < options.block_length_min_m ||
      options.lanes_min < 1 || options.lanes_max < options.lanes_min) {
    throw Error("invalid grid geometry options");
  }

  // Interior roads: one per direction between adjacent junctions,
  // horizontal first, then vertical.
  std::vector<std::pair<Junction, Junction>> segments;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c + 1 < cols; ++c) {
      segments.push_back({{r, c}, {r, c + 1}});
      segments.push_back({{r, c + 1}, {r, c}});
    }
  }
  for (int c = 0; c < cols; ++c) {
    for (int r = 0; r + 1 < rows; ++r) {
      segments.push_back({{r, c}, {r + 1, c}});
      segments.push_back({{r + 1, c}, {r, c}});
    }
  }

  const int n_boundary = n_inlets + n_outlets;
  const int n_total = n_boundary + static_cast<int>(segments.size());
  std::map<std::pair<Junction, Junction>, int> road_of;
  std::map<Junction, std::vector<int>> leaving;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const int id = n_boundary + 1 + static_cast<int>(s);
    road_of[segments[s]] = id;
    leaving[segments[s].first].push_back(id);
  }

  std::vector<Edge> edges;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    const auto& [tail, head] = segments[s];
    const int id = n_boundary + 1 + static_cast<int>(s);
    for (int next : leaving[head]) {
      const auto& seg = segments[next - n_boundary - 1];
      if (seg.second == tail) continue;  // no U-turns
      edges.push_back({RoadId{id}, RoadId{next}});
    }
  }

  // Inlets: west side feeds eastbound roads, north side feeds southbound.
  auto [west, north] = split_round_robin(n_inlets, rows, cols);
  std::vector<int> inlet_targets;
  {
    auto w = spread(west, rows);
    auto n = spread(north, cols);
    std::size_t wi = 0, ni = 0;
    for (int k = 0; k < n_inlets; ++k) {
      const bool use_west = (k % 2 == 0 && wi < w.size()) || ni >= n.size();
      if (use_west) {
        const int r = w[wi++];
        inlet_targets.push_back(road_of.at({{r, 0}, {r, 1}}));
      } else {
        const int c = n[ni++];
        inlet_targets.push_back(road_of.at({{0, c}, {1, c}}));
      }
    }
  }
  // Outlets: east side drains eastbound roads, south side drains southbound.
  auto [east, south] = split_round_robin(n_outlets, rows, cols);
  std::vector<int> outlet_sources;
  {
    auto e = spread(east, rows);
    auto s = spread(south, cols);
    std::size_t ei = 0, si = 0;
    for (int k = 0; k < n_outlets; ++k) {
      const bool use_east = (k % 2 == 0 && ei < e.size()) || si >= s.size();
      if (use_east) {
        const int r = e[ei++];
        outlet_sources.push_back(road_of.at({{r, cols - 2}, {r, cols - 1}}));
      } else {
        const int c = s[si++];
        outlet_sources.push_back(road_of.at({{rows - 2, c}, {rows - 1, c}}));
      }
    }
  }
  for (int k = 0; k < n_inlets; ++k) edges.push_back({RoadId{k + 1}, RoadId{inlet_targets[k]}});
  for (int k = 0; k < n_outlets; ++k) {
    edges.push_back({RoadId{outlet_sources[k]}, RoadId{n_inlets + k + 1}});
  }

  std::vector<RoadGeometry> geometry(n_total);
  for (int id = 1; id <= n_total; ++id) {
    KeyedRng rng{seed, static_cast<std::uint64_t>(Stream::grid_geometry),
                 static_cast<std::uint64_t>(id)};
    const double length = rng.uniform(options.block_length_min_m, options.block_length_max_m);
    const int lanes = rng.uniform_int(options.lanes_min, options.lanes_max);
    // Round to decimetres so the network file stays readable.
    geometry[id - 1] = RoadGeometry{std::round(length * 10.0) / 10.0, lanes};
  }
  return NoirGraph(n_inlets, n_boundary, n_total, std::move(geometry), std::move(edges),
                   options.vehicle_length_m);
}

}  // namespace noir
