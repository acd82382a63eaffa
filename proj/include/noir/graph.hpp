#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "noir/types.hpp"

namespace noir {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed network or config text. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, int line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Road index outside 1..N, or an inconsistent partition.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Road element identifier, 1-based global numbering:
/// 1..N_in inlets, N_in+1..N_out outlets, N_out+1..N interior.
struct RoadId {
  int value = 0;
  friend auto operator<=>(const RoadId&, const RoadId&) = default;
};

enum class RoadClass { inlet, outlet, interior };

struct Edge {
  RoadId from;
  RoadId to;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct RoadGeometry {
  double length_m = 0.0;
  int lanes = 1;
};

inline constexpr double kDefaultVehicleLength = 4.5;

/// Network of interconnected roads. Immutable after construction.
///
/// The constructor rejects self-loops, duplicate edges and out-of-range
/// indices. The remaining structural rules (boundary roads facing the right
/// way, no isolated roads, ...) are reported by `validate`.
class NoirGraph {
 public:
  NoirGraph(int n_in, int n_out_end, int n_total, std::vector<RoadGeometry> geometry,
            std::vector<Edge> edges, double vehicle_length_m = kDefaultVehicleLength);

  int inlet_count() const { return n_in_; }
  /// Index of the last outlet (N_out); also the number of boundary roads.
  int boundary_count() const { return n_out_end_; }
  int outlet_count() const { return n_out_end_ - n_in_; }
  int road_count() const { return n_total_; }
  int interior_count() const { return n_total_ - n_out_end_; }
  double vehicle_length() const { return vehicle_length_; }

  bool contains(RoadId id) const { return id.value >= 1 && id.value <= n_total_; }
  RoadClass classify(RoadId id) const;
  bool is_interior(RoadId id) const { return classify(id) == RoadClass::interior; }

  const std::vector<RoadId>& in_neighbors(RoadId id) const;
  const std::vector<RoadId>& out_neighbors(RoadId id) const;

  /// Edges sorted by (from, to).
  const std::vector<Edge>& edges() const { return edges_; }
  const RoadGeometry& geometry(RoadId id) const;

  /// lanes * length / vehicle_length for interior roads, +inf on boundary roads.
  double rho_max(RoadId id) const;

  /// Zero-based position of an interior road in the state vector.
  Eigen::Index state_index(RoadId id) const;
  RoadId interior_road(Eigen::Index state_index) const {
    return RoadId{static_cast<int>(state_index) + n_out_end_ + 1};
  }

  /// rho_max over the interior roads, in state order.
  VectorXd interior_capacity() const;

 private:
  void check(RoadId id) const;

  int n_in_;
  int n_out_end_;
  int n_total_;
  double vehicle_length_;
  std::vector<RoadGeometry> geometry_;
  std::vector<Edge> edges_;
  std::vector<std::vector<RoadId>> in_;
  std::vector<std::vector<RoadId>> out_;
};

struct Violation {
  std::string rule;
  std::string subject;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

ValidationReport validate(const NoirGraph& graph);

/// Parse the line-oriented network format:
///
///     noir <N_in> <N_out> <N>
///     road <id> <length_m> <lanes>
///     edge <from> <to>
///
/// `#` starts a comment. Every road needs a `road` line.
NoirGraph load_noir(std::string_view document, double vehicle_length_m = kDefaultVehicleLength);
NoirGraph load_noir_file(const std::string& path, double vehicle_length_m = kDefaultVehicleLength);
std::string serialize_noir(const NoirGraph& graph);

struct GridOptions {
  double block_length_min_m = 200.0;
  double block_length_max_m = 300.0;
  int lanes_min = 2;
  int lanes_max = 3;
  double vehicle_length_m = kDefaultVehicleLength;
};

/// Manhattan grid of `rows` x `cols` junctions joined by one road element per
/// direction. Inlets sit on the west/north perimeter and outlets on the
/// east/south perimeter, assigned round-robin between the two sides. Each
/// inlet feeds exactly one interior road and each outlet is fed by exactly
/// one. The seed only drives road lengths and lane counts.
NoirGraph generate_grid(int rows, int cols, int n_inlets, int n_outlets, std::uint64_t seed,
                        const GridOptions& options = {});

}  // namespace noir
