#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace tlab {

enum class TileKind : std::uint8_t { Road, Rock, Gold, Obstacle };

/// Movement directions. The first four index per-direction arrays; `None`
/// is the outcome of deciding not to move.
enum class Direction : std::uint8_t { North = 0, South = 1, East = 2, West = 3, None = 4 };

inline constexpr std::array<Direction, 4> kDirections = {Direction::North, Direction::South,
                                                         Direction::East, Direction::West};

constexpr std::size_t index_of(Direction d) { return static_cast<std::size_t>(d); }

/// Single-letter code: "N", "S", "E", "W" and "X" for `None`.
std::string_view direction_code(Direction d);
/// Inverse of direction_code; throws std::invalid_argument on unknown codes.
Direction direction_from_code(std::string_view code);

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Tile probabilities used by the map generator.
struct TileDensity {
  double road = 1.0;
  double rock = 0.0;
  double gold = 0.0;
  double obstacle = 0.0;
};

/// Rectangular tile map with the player on a road tile. y grows southwards,
/// so North is the direction of decreasing y.
class GameMap {
 public:
  /// Throws std::invalid_argument if the dimensions, cell count or player
  /// position violate the map invariants.
  GameMap(int width, int height, std::vector<TileKind> cells, Cell player);

  int width() const { return width_; }
  int height() const { return height_; }
  Cell player() const { return player_; }
  const std::vector<TileKind>& cells() const { return cells_; }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  TileKind at(int x, int y) const { return cells_[static_cast<std::size_t>(y * width_ + x)]; }

  /// True when the neighbouring cell in `d` is off the map or an obstacle.
  bool blocked(Direction d) const;

  /// Map rotated 90 degrees clockwise (North becomes East).
  GameMap rotated_clockwise() const;

  friend bool operator==(const GameMap&, const GameMap&) = default;

 private:
  int width_;
  int height_;
  std::vector<TileKind> cells_;
  Cell player_;
};

struct DirectionFeatures {
  double ga = 0.0;  ///< gold tiles counted in this direction
  double ra = 0.0;  ///< rock tiles counted in this direction
  double gd = 0.0;  ///< mean Manhattan distance to the counted gold (0 if none)
  double rd = 0.0;  ///< mean Manhattan distance to the counted rock (0 if none)
  int oa = 0;       ///< 1 iff the adjacent cell in this direction is blocked

  friend bool operator==(const DirectionFeatures&, const DirectionFeatures&) = default;
};

/// Situational features of one game state: global gold/rock around the player
/// and the per-direction breakdown, indexed by index_of(Direction).
struct GameStateFeatures {
  double ga = 0.0;
  double ra = 0.0;
  std::array<DirectionFeatures, 4> dirs{};

  const DirectionFeatures& dir(Direction d) const { return dirs[index_of(d)]; }
  DirectionFeatures& dir(Direction d) { return dirs[index_of(d)]; }

  bool has_open_direction() const;

  /// Throws std::invalid_argument naming the first violated invariant.
  void validate() const;

  friend bool operator==(const GameStateFeatures&, const GameStateFeatures&) = default;
};

/// Direction cone for a displacement from the player. Diagonal ties go to
/// North/South. Must not be called with (0, 0).
Direction cone_of(int dx, int dy);

/// Draws every cell independently from `density` and places the player on a
/// road cell with at least one open neighbour. Same seed, same map.
/// Throws ConfigError on bad arguments and std::runtime_error
/// ("unsatisfiable map constraints") when 100 attempts fail.
GameMap generate_map(int width, int height, const TileDensity& density, std::uint64_t seed);

/// Counts Gold/Rock tiles within Chebyshev distance `radius` of the player,
/// assigning each to one directional cone.
GameStateFeatures extract_features(const GameMap& map, int radius);

// Map files: {"width":W,"height":H,"player":[x,y],"rows":["..RG#", ...]}
GameMap load_map(std::istream& in);
void save_map(const GameMap& map, std::ostream& out);

}  // namespace tlab
