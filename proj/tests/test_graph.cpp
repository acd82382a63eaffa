#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "noir/graph.hpp"

using namespace noir;

namespace {

const char* kFourRoad = R"(# inlet 1 -> 3 -> 4 -> outlet 2
noir 1 2 4
road 1 90 2
road 2 90 2
road 3 90 2
road 4 90 2
edge 1 3
edge 3 4
edge 4 2
)";

std::vector<RoadId> ids(std::initializer_list<int> v) {
  std::vector<RoadId> out;
  for (int i : v) out.push_back(RoadId{i});
  return out;
}

bool has_rule(const ValidationReport& r, const std::string& rule) {
  return std::any_of(r.violations.begin(), r.violations.end(),
                     [&](const Violation& v) { return v.rule == rule; });
}

}  // namespace

TEST_CASE("four road file gives the expected neighbor sets") {
  const NoirGraph g = load_noir(kFourRoad);
  CHECK(g.inlet_count() == 1);
  CHECK(g.outlet_count() == 1);
  CHECK(g.interior_count() == 2);
  CHECK(g.in_neighbors(RoadId{3}) == ids({1}));
  CHECK(g.out_neighbors(RoadId{3}) == ids({4}));
  CHECK(g.in_neighbors(RoadId{4}) == ids({3}));
  CHECK(g.out_neighbors(RoadId{4}) == ids({2}));
  CHECK(g.out_neighbors(RoadId{2}).empty());
  CHECK(g.in_neighbors(RoadId{1}).empty());
  CHECK(g.classify(RoadId{1}) == RoadClass::inlet);
  CHECK(g.classify(RoadId{2}) == RoadClass::outlet);
  CHECK(g.classify(RoadId{3}) == RoadClass::interior);
  CHECK(g.state_index(RoadId{3}) == 0);
  CHECK(g.interior_road(1) == RoadId{4});
  CHECK(validate(g).ok());
}

TEST_CASE("rho_max is lanes times length over vehicle length") {
  const NoirGraph g = load_noir(kFourRoad, 4.5);
  CHECK(g.rho_max(RoadId{3}) == doctest::Approx(2 * 90 / 4.5));
  CHECK(g.rho_max(RoadId{4}) == doctest::Approx(40.0));
  const VectorXd cap = g.interior_capacity();
  CHECK(cap.size() == 2);
  CHECK(cap[0] == doctest::Approx(40.0));
  CHECK(load_noir(kFourRoad, 9.0).rho_max(RoadId{3}) == doctest::Approx(20.0));
}

TEST_CASE("self loops are rejected") {
  CHECK_THROWS_WITH_AS(load_noir("noir 1 2 5\nroad 1 9 1\nroad 2 9 1\nroad 3 9 1\nroad 4 9 1\n"
                                 "road 5 9 1\nedge 5 5\n"),
                       doctest::Contains("self-loop"), ParseError);
  std::vector<RoadGeometry> geo(3, RoadGeometry{90, 2});
  CHECK_THROWS_WITH(NoirGraph(1, 2, 3, geo, {Edge{RoadId{3}, RoadId{3}}}), doctest::Contains("self-loop"));
}

TEST_CASE("parse errors carry line numbers") {
  try {
    load_noir("noir 1 2 3\nroad 1 90 2\nbogus 1\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(load_noir("road 1 90 2\n"), ParseError);
  CHECK_THROWS_AS(load_noir("noir 1 2 3\nroad 1 90 2\nroad 2 90 2\n"), ParseError);  // road 3 missing
  CHECK_THROWS_AS(load_noir("noir 1 2 3\nroad 1 x 2\n"), ParseError);
  CHECK_THROWS_AS(load_noir("noir 1 2 3\nroad 1 90 2\nroad 1 90 2\n"), ParseError);
  CHECK_THROWS_AS(load_noir("noir 1 2 3\nroad 1 90 2\nroad 2 90 2\nroad 3 90 2\nedge 1 9\n"), IndexError);
  CHECK_THROWS_AS(load_noir("noir 3 2 4\n"), IndexError);
  CHECK_THROWS_AS(load_noir_file("/nonexistent/net.noir"), std::ios_base::failure);
}

TEST_CASE("validation rules") {
  SUBCASE("inlet straight into an outlet") {
    const NoirGraph g = load_noir_file(std::string(NOIR_TEST_DATA) + "/inlet_to_outlet.noir");
    const auto r = validate(g);
    CHECK_FALSE(r.ok());
    CHECK(has_rule(r, "inlet-out-neighbor-not-interior"));
  }
  SUBCASE("isolated road") {
    std::vector<RoadGeometry> geo(5, RoadGeometry{90, 2});
    const NoirGraph g(1, 2, 5, geo, {Edge{RoadId{1}, RoadId{3}}, Edge{RoadId{3}, RoadId{2}}});
    CHECK(has_rule(validate(g), "isolated-road"));
  }
  SUBCASE("inlet with an in-neighbor") {
    std::vector<RoadGeometry> geo(3, RoadGeometry{90, 2});
    const NoirGraph g(1, 2, 3, geo,
                      {Edge{RoadId{1}, RoadId{3}}, Edge{RoadId{3}, RoadId{2}}, Edge{RoadId{3}, RoadId{1}}});
    CHECK(has_rule(validate(g), "inlet-has-in-neighbor"));
  }
  SUBCASE("interior cycle with no way out") {
    std::vector<RoadGeometry> geo(5, RoadGeometry{90, 2});
    const NoirGraph g(1, 2, 5, geo,
                      {Edge{RoadId{1}, RoadId{3}}, Edge{RoadId{3}, RoadId{2}}, Edge{RoadId{4}, RoadId{5}},
                       Edge{RoadId{5}, RoadId{4}}});
    const auto r = validate(g);
    CHECK(has_rule(r, "no-path-to-outlet"));
    CHECK_FALSE(has_rule(r, "isolated-road"));
  }
}

TEST_CASE("serialize and load round trip") {
  const NoirGraph g = generate_grid(3, 4, 2, 3, 11);
  const NoirGraph back = load_noir(serialize_noir(g));
  CHECK(back.edges() == g.edges());
  CHECK(back.road_count() == g.road_count());
  CHECK(back.inlet_count() == g.inlet_count());
  CHECK(back.outlet_count() == g.outlet_count());
  CHECK(back.interior_capacity().isApprox(g.interior_capacity()));
  CHECK(serialize_noir(back) == serialize_noir(g));
}

TEST_CASE("generate_grid") {
  CHECK(generate_grid(2, 2, 1, 1, 7).edges() == generate_grid(2, 2, 1, 1, 7).edges());
  CHECK(serialize_noir(generate_grid(2, 2, 1, 1, 7)) == serialize_noir(generate_grid(2, 2, 1, 1, 7)));
  CHECK(validate(generate_grid(4, 4, 4, 4, 1)).ok());
  CHECK_THROWS_WITH(generate_grid(1, 1, 1, 1, 0), doctest::Contains("rows, cols >= 2"));
  CHECK_THROWS(generate_grid(2, 2, 0, 1, 0));
  CHECK_THROWS(generate_grid(2, 2, 9, 1, 0));

  const NoirGraph g = generate_grid(8, 8, 4, 4, 3);
  CHECK(validate(g).ok());
  CHECK(g.inlet_count() == 4);
  CHECK(g.outlet_count() == 4);
  for (int j = 1; j <= g.boundary_count(); ++j) {
    const RoadId id{j};
    if (j <= g.inlet_count()) {
      REQUIRE(g.out_neighbors(id).size() == 1);
      CHECK(g.is_interior(g.out_neighbors(id)[0]));
    } else {
      REQUIRE(g.in_neighbors(id).size() == 1);
      CHECK(g.is_interior(g.in_neighbors(id)[0]));
    }
  }
  // Geometry is drawn from the options.
  GridOptions opt;
  opt.block_length_min_m = 1000;
  opt.block_length_max_m = 1000;
  opt.lanes_min = opt.lanes_max = 3;
  const NoirGraph big = generate_grid(3, 3, 1, 1, 5, opt);
  CHECK(big.interior_capacity().minCoeff() == doctest::Approx(3 * 1000 / 4.5));
  CHECK(big.interior_capacity().maxCoeff() == doctest::Approx(3 * 1000 / 4.5));
}

TEST_CASE("unknown road ids throw") {
  const NoirGraph g = load_noir(kFourRoad);
  CHECK_THROWS_AS(g.in_neighbors(RoadId{0}), IndexError);
  CHECK_THROWS_AS(g.out_neighbors(RoadId{5}), IndexError);
  CHECK_THROWS_AS(g.state_index(RoadId{1}), IndexError);
}
