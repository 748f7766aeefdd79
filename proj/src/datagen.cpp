#include "tendency_lab/datagen.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "tendency_lab/errors.hpp"

namespace tlab {

namespace {

using ordered_json = nlohmann::ordered_json;

// Equal-probability multinomial split of `total` into four counts.
std::array<int, 4> split_total(int total, Rng& rng) {
  std::array<int, 4> out{};
  int remaining = total;
  for (int i = 0; i < 3; ++i) {
    std::binomial_distribution<int> bin(remaining, 1.0 / (4 - i));
    out[static_cast<std::size_t>(i)] = bin(rng);
    remaining -= out[static_cast<std::size_t>(i)];
  }
  out[3] = remaining;
  return out;
}

}  // namespace

void GeneratorConfig::validate() const {
  if (n <= 0) throw ConfigError("generator.n: must be positive");
  if (gold_counts.lo < 0 || gold_counts.hi < gold_counts.lo) {
    throw ConfigError("generator.gold_counts: need 0 <= lo <= hi");
  }
  if (rock_counts.lo < 0 || rock_counts.hi < rock_counts.lo) {
    throw ConfigError("generator.rock_counts: need 0 <= lo <= hi");
  }
  if (!(distance.lo >= 1.0 && distance.hi >= distance.lo && std::isfinite(distance.hi))) {
    throw ConfigError("generator.distance: need 1 <= lo <= hi");
  }
  if (!(obstacle_prob >= 0.0 && obstacle_prob < 1.0)) {
    throw ConfigError("generator.obstacle_prob: must lie in [0, 1)");
  }
  if (mode == GeneratorMode::MapBased) {
    if (map.width < 3) throw ConfigError("generator.map.width: must be at least 3");
    if (map.height < 3) throw ConfigError("generator.map.height: must be at least 3");
    if (map.radius <= 0) throw ConfigError("generator.map.radius: must be positive");
    const auto& d = map.density;
    for (double p : {d.road, d.rock, d.gold, d.obstacle}) {
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ConfigError("generator.map.density: probabilities must lie in [0,1]");
      }
    }
    if (std::abs(d.road + d.rock + d.gold + d.obstacle - 1.0) > 1e-9) {
      throw ConfigError("generator.map.density: probabilities must sum to 1");
    }
  }
}

GameStateFeatures sample_game_state(const GeneratorConfig& config, Rng& rng) {
  if (config.mode == GeneratorMode::MapBased) {
    const std::uint64_t map_seed = rng();
    const GameMap map =
        generate_map(config.map.width, config.map.height, config.map.density, map_seed);
    return extract_features(map, config.map.radius);
  }

  GameStateFeatures s;
  std::bernoulli_distribution obstacle(config.obstacle_prob);
  do {
    for (auto& d : s.dirs) d.oa = obstacle(rng) ? 1 : 0;
  } while (!s.has_open_direction());

  std::uniform_int_distribution<int> gold(config.gold_counts.lo, config.gold_counts.hi);
  std::uniform_int_distribution<int> rock(config.rock_counts.lo, config.rock_counts.hi);
  std::array<int, 4> g{};
  std::array<int, 4> r{};
  if (config.count_scheme == CountScheme::GlobalTotal) {
    g = split_total(gold(rng), rng);
    r = split_total(rock(rng), rng);
  } else {
    for (std::size_t i = 0; i < 4; ++i) {
      g[i] = gold(rng);
      r[i] = rock(rng);
    }
  }

  std::uniform_real_distribution<double> dist(config.distance.lo, config.distance.hi);
  for (std::size_t i = 0; i < 4; ++i) {
    auto& d = s.dirs[i];
    d.ga = g[i];
    d.ra = r[i];
    d.gd = g[i] > 0 ? dist(rng) : 0.0;
    d.rd = r[i] > 0 ? dist(rng) : 0.0;
    s.ga += d.ga;
    s.ra += d.ra;
  }
  return s;
}

Dataset generate_dataset(const Theta& theta, const GeneratorConfig& config) {
  theta.validate();
  config.validate();
  Rng rng = make_rng(config.seed);
  Dataset out;
  out.reserve(static_cast<std::size_t>(config.n));
  for (std::int64_t i = 1; i <= config.n; ++i) {
    DatasetRecord rec;
    rec.index = i;
    rec.state = sample_game_state(config, rng);
    rec.decision = sample_decision(theta, rec.state, rng);
    out.push_back(std::move(rec));
  }
  return out;
}

void validate_record(const DatasetRecord& record) {
  if (record.index < 1) throw std::invalid_argument("index must be >= 1");
  record.state.validate();
  const Decision& dec = record.decision;
  if (dec.move != (dec.direction != Direction::None)) {
    throw std::invalid_argument("m=0 requires d=X and m=1 requires a real direction");
  }
  if (dec.move && record.state.dir(dec.direction).oa != 0) {
    throw std::invalid_argument("chosen direction " + std::string(direction_code(dec.direction)) +
                                " is blocked");
  }
}

void write_dataset(const Dataset& data, std::ostream& out) {
  for (const auto& rec : data) {
    ordered_json j;
    j["i"] = rec.index;
    j["m"] = rec.decision.move ? 1 : 0;
    j["d"] = std::string(direction_code(rec.decision.direction));
    j["ga"] = rec.state.ga;
    j["ra"] = rec.state.ra;
    ordered_json dirs;
    for (Direction d : kDirections) {
      const auto& f = rec.state.dir(d);
      dirs[std::string(direction_code(d))] = {
          {"ga", f.ga}, {"gd", f.gd}, {"ra", f.ra}, {"rd", f.rd}, {"oa", f.oa}};
    }
    j["dirs"] = std::move(dirs);
    out << j.dump() << '\n';
  }
}

Dataset read_dataset(std::istream& in) {
  Dataset out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    try {
      const auto j = nlohmann::json::parse(line);
      DatasetRecord rec;
      rec.index = j.at("i").get<std::int64_t>();
      const int m = j.at("m").get<int>();
      if (m != 0 && m != 1) throw std::invalid_argument("m must be 0 or 1");
      rec.decision.move = m == 1;
      rec.decision.direction = direction_from_code(j.at("d").get<std::string>());
      rec.state.ga = j.at("ga").get<double>();
      rec.state.ra = j.at("ra").get<double>();
      const auto& dirs = j.at("dirs");
      for (Direction d : kDirections) {
        const auto& jd = dirs.at(std::string(direction_code(d)));
        auto& f = rec.state.dir(d);
        f.ga = jd.at("ga").get<double>();
        f.gd = jd.at("gd").get<double>();
        f.ra = jd.at("ra").get<double>();
        f.rd = jd.at("rd").get<double>();
        f.oa = jd.at("oa").get<int>();
      }
      validate_record(rec);
      out.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(where + e.what());
    } catch (const std::invalid_argument& e) {
      throw InputError(where + e.what());
    }
  }
  return out;
}

}  // namespace tlab
