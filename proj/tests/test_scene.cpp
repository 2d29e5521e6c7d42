#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dfrc/scene.hpp"

using namespace dfrc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Scenario fixed_scenario() {
  Scenario s;
  s.user_positions = {{800, 100}, {750, 300}};
  s.target_position = {550, 400};
  return s;
}

}  // namespace

TEST_CASE("steering_vector") {
  const auto a = steering_vector(30.0, 2, 0.5);
  CHECK_THAT(a(0).real(), WithinAbs(1.0, 1e-15));
  CHECK_THAT(a(0).imag(), WithinAbs(0.0, 1e-15));
  CHECK_THAT(a(1).real(), WithinAbs(0.0, 1e-15));
  CHECK_THAT(a(1).imag(), WithinAbs(1.0, 1e-15));

  const auto broadside = steering_vector(0.0, 8, 0.5);
  CHECK((broadside - ComplexVector::Ones(8)).norm() == 0.0);

  const auto b = steering_vector(71.3, 16, 0.5);
  CHECK((b.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(steering_vector(10.0, 0, 0.5), ShapeError);
}

TEST_CASE("angles from the base station") {
  CHECK_THAT(angle_of({1, 1}, {0, 0}), WithinAbs(45.0, 1e-12));
  CHECK_THAT(angle_of({0, 5}, {0, 0}), WithinAbs(90.0, 1e-12));
  CHECK_THROWS_AS(angle_of({3, 3}, {3, 3}), DegeneratePlacement);
  CHECK_THAT(fixed_scenario().target_angle(),
             WithinAbs(rad_to_deg(std::atan2(400.0, 550.0)), 1e-12));
}

TEST_CASE("Scenario::validate") {
  Scenario s = fixed_scenario();
  CHECK_NOTHROW(s.validate());
  s.num_tx = 3;  // K * N_R = 4 > 3
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = fixed_scenario();
  s.adversary_index = 3;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = fixed_scenario();
  s.target_position = {1200, 10};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = fixed_scenario();
  s.bs_position = {500, 500};
  s.target_position = {100, 100};  // behind the array
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("generate_channels") {
  Scenario s = fixed_scenario();
  const auto ch = generate_channels(s, 5);
  REQUIRE(ch.num_users() == 2);
  CHECK(ch.H[0].rows() == 2);
  CHECK(ch.H[0].cols() == 8);
  CHECK((generate_channels(s, 5).H[1] - ch.H[1]).norm() == 0.0);
  CHECK((generate_channels(s, 6).H[1] - ch.H[1]).norm() > 0.0);

  s.user_positions = {{0, 0}};
  CHECK_THROWS_AS(generate_channels(s, 1), DegeneratePlacement);
}

TEST_CASE("channel entry variance follows the path loss") {
  Scenario s;
  s.user_positions = {{100, 0}};
  s.num_tx = 100;
  s.num_rx = 1;
  double power = 0.0;
  int count = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto ch = generate_channels(s, seed);
    power += ch.H[0].squaredNorm();
    count += static_cast<int>(ch.H[0].size());
  }
  CHECK(count == 100000);
  CHECK_THAT(power / count, WithinRel(1e-6, 0.02));
}

TEST_CASE("GridWorld") {
  const auto g = build_grid({1000, 1000}, 100, {0, 0});
  CHECK(g.size() == 100);
  CHECK(g.cols() == 10);
  CHECK_THAT(g.cell(0).angle, WithinAbs(45.0, 1e-12));
  CHECK_THAT(g.cell(0).radius, WithinAbs(std::hypot(50.0, 50.0), 1e-12));
  CHECK(g.cell(13).center == Point{350, 150});
  CHECK(g.cell_index({350, 150}) == 13);
  CHECK(g.cell_index({1000, 1000}) == 99);
  CHECK(g.cell_index({0, 0}) == 0);
  CHECK_THROWS_AS(g.cell_index({-1, 5}), ShapeError);
  CHECK_THROWS_AS(build_grid({1000, 1000}, 300, {0, 0}), ConfigError);
  CHECK_THROWS_AS(build_grid({1000, 1000}, 0, {0, 0}), ConfigError);

  Rng rng = make_rng(3);
  for (int i = 0; i < 1000; ++i) {
    const int n = i % g.size();
    CHECK(g.cell_index(g.uniform_point_in_cell(n, rng)) == n);
  }
}

TEST_CASE("AngleGrid") {
  const auto q = AngleGrid::quadrant();
  CHECK(q.size() == 901);
  CHECK(q[0] == 0.0);
  CHECK_THAT(q[900], WithinAbs(90.0, 1e-12));
  CHECK(q.nearest(36.02) == 360);
  CHECK(q.nearest(36.06) == 361);
  CHECK(q.nearest(0.05) == 0);  // midpoint goes to the smaller angle
  CHECK(q.nearest(-3.0) == 0);
  CHECK(q.nearest(95.0) == 900);
  CHECK(AngleGrid(0, 90, 1.0).size() == 91);
  CHECK_THROWS_AS(AngleGrid(0, 90, 0.0), ConfigError);
}

TEST_CASE("random_placement avoids the BS cell") {
  const auto g = build_grid({1000, 1000}, 100, {0, 0});
  Rng rng = make_rng(11);
  for (int i = 0; i < 5000; ++i) {
    const Point p = random_placement(g, rng);
    CHECK(g.area().contains(p));
    CHECK(g.cell_index(p) != 0);
  }
}
