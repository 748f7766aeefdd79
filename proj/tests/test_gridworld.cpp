#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "tendency_lab/errors.hpp"
#include "tendency_lab/gridworld.hpp"

using namespace tlab;

namespace {

GameMap from_rows(const std::vector<std::string>& rows, Cell player) {
  std::vector<TileKind> cells;
  for (const auto& r : rows) {
    for (char c : r) {
      switch (c) {
        case 'R': cells.push_back(TileKind::Rock); break;
        case 'G': cells.push_back(TileKind::Gold); break;
        case '#': cells.push_back(TileKind::Obstacle); break;
        default: cells.push_back(TileKind::Road); break;
      }
    }
  }
  return GameMap(static_cast<int>(rows.front().size()), static_cast<int>(rows.size()),
                 std::move(cells), player);
}

const TileDensity kMixed{.road = 0.5, .rock = 0.2, .gold = 0.2, .obstacle = 0.1};

// Clears tiles on the player's diagonals so no tile sits on a cone boundary.
GameMap without_diagonals(const GameMap& m) {
  auto cells = m.cells();
  const Cell p = m.player();
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (std::abs(x - p.x) == std::abs(y - p.y) && !(x == p.x && y == p.y)) {
        cells[static_cast<std::size_t>(y * m.width() + x)] = TileKind::Road;
      }
    }
  }
  return GameMap(m.width(), m.height(), std::move(cells), p);
}

}  // namespace

TEST_CASE("all-road density gives an all-road map with empty features") {
  const GameMap m = generate_map(7, 5, TileDensity{}, 3);
  for (TileKind k : m.cells()) CHECK(k == TileKind::Road);
  for (int radius : {1, 3, 10}) {
    const auto f = extract_features(m, radius);
    CHECK(f.ga == 0.0);
    CHECK(f.ra == 0.0);
    for (const auto& d : f.dirs) {
      CHECK(d.ga == 0.0);
      CHECK(d.gd == 0.0);
      CHECK(d.ra == 0.0);
      CHECK(d.rd == 0.0);
    }
  }
}

TEST_CASE("all-obstacle density is unsatisfiable") {
  const TileDensity walls{.road = 0.0, .rock = 0.0, .gold = 0.0, .obstacle = 1.0};
  CHECK_THROWS_WITH_AS(generate_map(5, 5, walls, 1), "unsatisfiable map constraints",
                       std::runtime_error);
}

TEST_CASE("generate_map rejects bad arguments") {
  CHECK_THROWS_AS(generate_map(2, 5, TileDensity{}, 1), ConfigError);
  CHECK_THROWS_AS(generate_map(5, 2, TileDensity{}, 1), ConfigError);
  CHECK_THROWS_AS(generate_map(5, 5, TileDensity{.road = 0.5}, 1), ConfigError);
  CHECK_THROWS_AS(generate_map(5, 5, TileDensity{.road = 1.5, .rock = -0.5}, 1), ConfigError);
}

TEST_CASE("generate_map is deterministic in the seed") {
  const GameMap a = generate_map(5, 5, kMixed, 42);
  const GameMap b = generate_map(5, 5, kMixed, 42);
  CHECK(a == b);
  std::ostringstream sa, sb;
  save_map(a, sa);
  save_map(b, sb);
  CHECK(sa.str() == sb.str());

  bool any_differs = false;
  for (std::uint64_t s = 43; s < 53; ++s) any_differs |= !(generate_map(5, 5, kMixed, s) == a);
  CHECK(any_differs);
}

TEST_CASE("generated player stands on road with an open neighbour") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const GameMap m = generate_map(3 + static_cast<int>(seed % 9), 3 + static_cast<int>(seed % 5),
                                   {.road = 0.3, .rock = 0.1, .gold = 0.1, .obstacle = 0.5}, seed);
    CHECK(m.at(m.player().x, m.player().y) == TileKind::Road);
    const auto f = extract_features(m, 4);
    CHECK(f.has_open_direction());
    CHECK_NOTHROW(f.validate());
  }
}

TEST_CASE("hand-enumerated 5x5 neighbourhood") {
  const GameMap m = from_rows({"..G..", "..G..", ".....", ".....", "..R.."}, {2, 2});
  const auto f = extract_features(m, 2);
  const auto& n = f.dir(Direction::North);
  CHECK(n.ga == 2.0);
  CHECK(n.gd == doctest::Approx(1.5));
  CHECK(n.ra == 0.0);
  CHECK(n.rd == 0.0);
  CHECK(n.oa == 0);
  const auto& s = f.dir(Direction::South);
  CHECK(s.ga == 0.0);
  CHECK(s.gd == 0.0);
  CHECK(s.ra == 1.0);
  CHECK(s.rd == 2.0);
  CHECK(s.oa == 0);
  for (Direction d : {Direction::East, Direction::West}) {
    CHECK(f.dir(d) == DirectionFeatures{});
  }
  CHECK(f.ga == 2.0);
  CHECK(f.ra == 1.0);
}

TEST_CASE("obstacle adjacency") {
  const GameMap m = from_rows({".....", ".....", "...#.", ".....", "....."}, {2, 2});
  const auto f = extract_features(m, 2);
  CHECK(f.dir(Direction::East).oa == 1);
  CHECK(f.dir(Direction::West).oa == 0);
  CHECK(f.dir(Direction::North).oa == 0);
  CHECK(f.dir(Direction::South).oa == 0);
}

TEST_CASE("off-map neighbours count as blocked") {
  const GameMap m = from_rows({"...", "...", "..."}, {0, 0});
  const auto f = extract_features(m, 1);
  CHECK(f.dir(Direction::North).oa == 1);
  CHECK(f.dir(Direction::West).oa == 1);
  CHECK(f.dir(Direction::South).oa == 0);
  CHECK(f.dir(Direction::East).oa == 0);
}

TEST_CASE("radius limits the neighbourhood by Chebyshev distance") {
  const GameMap m = from_rows({"G...G", ".....", ".....", ".....", "R...R"}, {2, 2});
  CHECK(extract_features(m, 1).ga == 0.0);
  const auto f = extract_features(m, 2);
  CHECK(f.ga == 2.0);
  CHECK(f.ra == 2.0);
  // Corner tiles are diagonal ties and go to the vertical cones.
  CHECK(f.dir(Direction::North).ga == 2.0);
  CHECK(f.dir(Direction::North).gd == 4.0);
  CHECK(f.dir(Direction::South).ra == 2.0);
}

TEST_CASE("cone assignment") {
  CHECK(cone_of(0, -1) == Direction::North);
  CHECK(cone_of(0, 1) == Direction::South);
  CHECK(cone_of(1, 0) == Direction::East);
  CHECK(cone_of(-1, 0) == Direction::West);
  CHECK(cone_of(2, -2) == Direction::North);
  CHECK(cone_of(-2, 2) == Direction::South);
  CHECK(cone_of(3, -2) == Direction::East);
  CHECK(cone_of(-3, 2) == Direction::West);
}

TEST_CASE("directional counts partition a brute-force count") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const GameMap m = generate_map(15, 11, kMixed, seed);
    const int radius = 1 + static_cast<int>(seed % 8);
    const auto f = extract_features(m, radius);
    int gold = 0, rock = 0;
    const Cell p = m.player();
    for (int y = 0; y < m.height(); ++y) {
      for (int x = 0; x < m.width(); ++x) {
        if (x == p.x && y == p.y) continue;
        if (std::max(std::abs(x - p.x), std::abs(y - p.y)) > radius) continue;
        gold += m.at(x, y) == TileKind::Gold;
        rock += m.at(x, y) == TileKind::Rock;
      }
    }
    double sum_g = 0.0, sum_r = 0.0;
    for (const auto& d : f.dirs) {
      sum_g += d.ga;
      sum_r += d.ra;
    }
    CHECK(sum_g == gold);
    CHECK(sum_r == rock);
    CHECK(f.ga == gold);
    CHECK(f.ra == rock);
  }
}

TEST_CASE("rotation permutes directional features") {
  // Quarter turn: North->East->South->West->North.
  const std::array<Direction, 4> quarter = {Direction::East, Direction::West, Direction::South,
                                            Direction::North};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const GameMap m = generate_map(9 + static_cast<int>(seed % 4), 7 + static_cast<int>(seed % 3),
                                   kMixed, seed);
    const int radius = 2 + static_cast<int>(seed % 5);
    const auto f = extract_features(m, radius);

    // Global counts survive any rotation.
    const auto f90 = extract_features(m.rotated_clockwise(), radius);
    CHECK(f90.ga == f.ga);
    CHECK(f90.ra == f.ra);

    // Half turn is exact because diagonal ties map vertical to vertical.
    const auto f180 = extract_features(m.rotated_clockwise().rotated_clockwise(), radius);
    CHECK(f180.dir(Direction::South) == f.dir(Direction::North));
    CHECK(f180.dir(Direction::North) == f.dir(Direction::South));
    CHECK(f180.dir(Direction::West) == f.dir(Direction::East));
    CHECK(f180.dir(Direction::East) == f.dir(Direction::West));

    // Quarter turn is exact once no tile sits on a diagonal.
    const GameMap clean = without_diagonals(m);
    const auto fc = extract_features(clean, radius);
    const auto fc90 = extract_features(clean.rotated_clockwise(), radius);
    for (Direction d : kDirections) CHECK(fc90.dir(quarter[index_of(d)]) == fc.dir(d));
  }
}

TEST_CASE("four quarter turns restore the map") {
  const GameMap m = generate_map(6, 4, kMixed, 9);
  const GameMap r = m.rotated_clockwise();
  CHECK(r.width() == 4);
  CHECK(r.height() == 6);
  CHECK(r.rotated_clockwise().rotated_clockwise().rotated_clockwise() == m);
}

TEST_CASE("extract_features is pure") {
  const GameMap m = generate_map(21, 21, kMixed, 5);
  CHECK(extract_features(m, 10) == extract_features(m, 10));
  CHECK_THROWS_AS(extract_features(m, 0), std::invalid_argument);
}

TEST_CASE("map files round-trip") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const GameMap m = generate_map(8, 6, kMixed, seed);
    std::stringstream ss;
    save_map(m, ss);
    const GameMap back = load_map(ss);
    CHECK(back == m);
  }
}

TEST_CASE("malformed map files are input errors") {
  auto load = [](const std::string& text) {
    std::istringstream in(text);
    return load_map(in);
  };
  CHECK_THROWS_AS(load("not json"), InputError);
  CHECK_THROWS_AS(load(R"({"width":3,"height":3,"player":[1,1],"rows":["...","..."]})"),
                  InputError);
  CHECK_THROWS_AS(load(R"({"width":3,"height":1,"player":[1,0],"rows":["..x"]})"), InputError);
  CHECK_THROWS_AS(load(R"({"width":3,"height":1,"player":[1,0],"rows":[".#."]})"), InputError);
  CHECK_THROWS_AS(load(R"({"width":3,"height":1,"player":[5,0],"rows":["..."]})"), InputError);
  CHECK_NOTHROW(load(R"({"width":3,"height":1,"player":[1,0],"rows":["G.R"]})"));
}

TEST_CASE("feature validation") {
  GameStateFeatures s;
  CHECK_NOTHROW(s.validate());
  s.dir(Direction::North).ga = 3;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);  // sum rule
  s.ga = 3;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);  // gd missing
  s.dir(Direction::North).gd = 1.0;
  CHECK_NOTHROW(s.validate());
  for (auto& d : s.dirs) d.oa = 1;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s.dir(Direction::West).oa = 2;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
}

TEST_CASE("direction codes") {
  for (Direction d : {Direction::North, Direction::South, Direction::East, Direction::West,
                      Direction::None}) {
    CHECK(direction_from_code(direction_code(d)) == d);
  }
  CHECK_THROWS_AS(direction_from_code("Q"), std::invalid_argument);
}
