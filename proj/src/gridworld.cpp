#include "tendency_lab/gridworld.hpp"

#include <cmath>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"
#include "tendency_lab/errors.hpp"
#include "tendency_lab/random.hpp"

namespace tlab {

namespace {

constexpr int kMaxMapAttempts = 100;

Cell step(Cell c, Direction d) {
  switch (d) {
    case Direction::North: return {c.x, c.y - 1};
    case Direction::South: return {c.x, c.y + 1};
    case Direction::East: return {c.x + 1, c.y};
    case Direction::West: return {c.x - 1, c.y};
    case Direction::None: break;
  }
  return c;
}

char tile_char(TileKind k) {
  switch (k) {
    case TileKind::Road: return '.';
    case TileKind::Rock: return 'R';
    case TileKind::Gold: return 'G';
    case TileKind::Obstacle: return '#';
  }
  return '?';
}

TileKind tile_from_char(char c) {
  switch (c) {
    case '.': return TileKind::Road;
    case 'R': return TileKind::Rock;
    case 'G': return TileKind::Gold;
    case '#': return TileKind::Obstacle;
    default: throw InputError(std::string("map: unknown tile character '") + c + "'");
  }
}

}  // namespace

std::string_view direction_code(Direction d) {
  switch (d) {
    case Direction::North: return "N";
    case Direction::South: return "S";
    case Direction::East: return "E";
    case Direction::West: return "W";
    case Direction::None: return "X";
  }
  return "?";
}

Direction direction_from_code(std::string_view code) {
  if (code == "N") return Direction::North;
  if (code == "S") return Direction::South;
  if (code == "E") return Direction::East;
  if (code == "W") return Direction::West;
  if (code == "X") return Direction::None;
  throw std::invalid_argument("unknown direction code '" + std::string(code) + "'");
}

GameMap::GameMap(int width, int height, std::vector<TileKind> cells, Cell player)
    : width_(width), height_(height), cells_(std::move(cells)), player_(player) {
  if (width_ <= 0 || height_ <= 0) throw std::invalid_argument("map dimensions must be positive");
  if (cells_.size() != static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_)) {
    throw std::invalid_argument("map cell count does not match width*height");
  }
  if (!contains(player_.x, player_.y)) throw std::invalid_argument("player outside the map");
  if (at(player_.x, player_.y) != TileKind::Road) {
    throw std::invalid_argument("player must stand on a road tile");
  }
}

bool GameMap::blocked(Direction d) const {
  const Cell n = step(player_, d);
  return !contains(n.x, n.y) || at(n.x, n.y) == TileKind::Obstacle;
}

GameMap GameMap::rotated_clockwise() const {
  // (x, y) -> (height - 1 - y, x); the new map is height x width.
  const int nw = height_;
  const int nh = width_;
  std::vector<TileKind> out(cells_.size());
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const int nx = height_ - 1 - y;
      const int ny = x;
      out[static_cast<std::size_t>(ny * nw + nx)] = at(x, y);
    }
  }
  return GameMap(nw, nh, std::move(out), Cell{height_ - 1 - player_.y, player_.x});
}

bool GameStateFeatures::has_open_direction() const {
  for (const auto& d : dirs) {
    if (d.oa == 0) return true;
  }
  return false;
}

void GameStateFeatures::validate() const {
  auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!finite_nonneg(ga) || !finite_nonneg(ra)) {
    throw std::invalid_argument("global ga/ra must be finite and non-negative");
  }
  double sum_ga = 0.0;
  double sum_ra = 0.0;
  for (Direction d : kDirections) {
    const auto& f = dir(d);
    const std::string name(direction_code(d));
    if (!finite_nonneg(f.ga) || !finite_nonneg(f.ra) || !finite_nonneg(f.gd) ||
        !finite_nonneg(f.rd)) {
      throw std::invalid_argument("dirs." + name + ": features must be finite and non-negative");
    }
    if (f.oa != 0 && f.oa != 1) throw std::invalid_argument("dirs." + name + ".oa must be 0 or 1");
    if ((f.ga > 0.0 && f.gd < 1.0) || (f.ga == 0.0 && f.gd != 0.0)) {
      throw std::invalid_argument("dirs." + name + ": gd inconsistent with ga");
    }
    if ((f.ra > 0.0 && f.rd < 1.0) || (f.ra == 0.0 && f.rd != 0.0)) {
      throw std::invalid_argument("dirs." + name + ": rd inconsistent with ra");
    }
    sum_ga += f.ga;
    sum_ra += f.ra;
  }
  const double tol = 1e-9 * (1.0 + ga + ra);
  if (std::abs(sum_ga - ga) > tol) throw std::invalid_argument("ga differs from the sum of dirs.ga");
  if (std::abs(sum_ra - ra) > tol) throw std::invalid_argument("ra differs from the sum of dirs.ra");
  if (!has_open_direction()) throw std::invalid_argument("all directions blocked");
}

Direction cone_of(int dx, int dy) {
  if (std::abs(dx) <= std::abs(dy)) return dy < 0 ? Direction::North : Direction::South;
  return dx > 0 ? Direction::East : Direction::West;
}

GameMap generate_map(int width, int height, const TileDensity& density, std::uint64_t seed) {
  if (width < 3) throw ConfigError("map.width: must be at least 3");
  if (height < 3) throw ConfigError("map.height: must be at least 3");
  const std::array<double, 4> probs = {density.road, density.rock, density.gold, density.obstacle};
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("map.density: probabilities must lie in [0,1]");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("map.density: probabilities must sum to 1");

  Rng rng = make_rng(seed);
  std::discrete_distribution<int> tile_dist(probs.begin(), probs.end());
  const auto n_cells = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);

  for (int attempt = 0; attempt < kMaxMapAttempts; ++attempt) {
    std::vector<TileKind> cells(n_cells);
    for (auto& c : cells) c = static_cast<TileKind>(tile_dist(rng));

    std::vector<Cell> candidates;
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        if (cells[static_cast<std::size_t>(y * width + x)] != TileKind::Road) continue;
        for (Direction d : kDirections) {
          const Cell n = step({x, y}, d);
          if (n.x >= 0 && n.y >= 0 && n.x < width && n.y < height &&
              cells[static_cast<std::size_t>(n.y * width + n.x)] != TileKind::Obstacle) {
            candidates.push_back({x, y});
            break;
          }
        }
      }
    }
    if (candidates.empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    return GameMap(width, height, std::move(cells), candidates[pick(rng)]);
  }
  throw std::runtime_error("unsatisfiable map constraints");
}

GameStateFeatures extract_features(const GameMap& map, int radius) {
  if (radius <= 0) throw std::invalid_argument("radius must be positive");
  struct Acc {
    int gold = 0;
    int rock = 0;
    long gold_dist = 0;
    long rock_dist = 0;
  };
  std::array<Acc, 4> acc{};
  const Cell p = map.player();
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      if (dx == 0 && dy == 0) continue;
      const int x = p.x + dx;
      const int y = p.y + dy;
      if (!map.contains(x, y)) continue;
      const TileKind k = map.at(x, y);
      if (k != TileKind::Gold && k != TileKind::Rock) continue;
      Acc& a = acc[index_of(cone_of(dx, dy))];
      const int dist = std::abs(dx) + std::abs(dy);
      if (k == TileKind::Gold) {
        ++a.gold;
        a.gold_dist += dist;
      } else {
        ++a.rock;
        a.rock_dist += dist;
      }
    }
  }

  GameStateFeatures out;
  for (Direction d : kDirections) {
    const Acc& a = acc[index_of(d)];
    DirectionFeatures& f = out.dir(d);
    f.ga = a.gold;
    f.ra = a.rock;
    f.gd = a.gold > 0 ? static_cast<double>(a.gold_dist) / a.gold : 0.0;
    f.rd = a.rock > 0 ? static_cast<double>(a.rock_dist) / a.rock : 0.0;
    f.oa = map.blocked(d) ? 1 : 0;
    out.ga += f.ga;
    out.ra += f.ra;
  }
  return out;
}

GameMap load_map(std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("map: invalid JSON: ") + e.what());
  }
  try {
    const int width = j.at("width").get<int>();
    const int height = j.at("height").get<int>();
    const auto& player = j.at("player");
    if (!player.is_array() || player.size() != 2) throw InputError("map.player: expected [x, y]");
    const auto& rows = j.at("rows");
    if (!rows.is_array() || static_cast<int>(rows.size()) != height) {
      throw InputError("map.rows: expected one string per row");
    }
    std::vector<TileKind> cells;
    cells.reserve(static_cast<std::size_t>(width) * static_cast<std::size_t>(std::max(height, 0)));
    for (const auto& row : rows) {
      const auto s = row.get<std::string>();
      if (static_cast<int>(s.size()) != width) throw InputError("map.rows: row length != width");
      for (char c : s) cells.push_back(tile_from_char(c));
    }
    return GameMap(width, height, std::move(cells), Cell{player[0].get<int>(), player[1].get<int>()});
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("map: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("map: ") + e.what());
  }
}

void save_map(const GameMap& map, std::ostream& out) {
  nlohmann::ordered_json j;
  j["width"] = map.width();
  j["height"] = map.height();
  j["player"] = {map.player().x, map.player().y};
  auto rows = nlohmann::ordered_json::array();
  for (int y = 0; y < map.height(); ++y) {
    std::string row;
    for (int x = 0; x < map.width(); ++x) row.push_back(tile_char(map.at(x, y)));
    rows.push_back(row);
  }
  j["rows"] = rows;
  out << j.dump() << '\n';
}

}  // namespace tlab
