#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "tendency_lab/decision_model.hpp"
#include "tendency_lab/gridworld.hpp"
#include "tendency_lab/random.hpp"

namespace tlab {

/// One observed decision with the state it was made in. Indices are 1-based.
struct DatasetRecord {
  std::int64_t index = 1;
  GameStateFeatures state;
  Decision decision;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

using Dataset = std::vector<DatasetRecord>;

enum class GeneratorMode { DirectFeatures, MapBased };

/// How gold/rock counts are drawn in DirectFeatures mode.
enum class CountScheme {
  /// Global totals uniform on the count range, split across the four
  /// directions by an equal-probability multinomial.
  GlobalTotal,
  /// Each direction's count uniform on the count range independently.
  PerDirection,
};

struct IntRange {
  int lo = 0;
  int hi = 0;
};

struct RealRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct MapParams {
  int width = 21;
  int height = 21;
  TileDensity density{.road = 0.55, .rock = 0.25, .gold = 0.12, .obstacle = 0.08};
  int radius = 10;
};

struct GeneratorConfig {
  std::int64_t n = 5000;
  std::uint64_t seed = 42;
  GeneratorMode mode = GeneratorMode::DirectFeatures;
  CountScheme count_scheme = CountScheme::GlobalTotal;
  IntRange gold_counts{0, 100};
  IntRange rock_counts{0, 100};
  RealRange distance{1.0, 15.0};
  double obstacle_prob = 0.1;
  MapParams map;

  /// Throws ConfigError with a "generator.<field>" path.
  void validate() const;
};

/// One game state from the configured prior. Validates nothing; call
/// config.validate() first.
GameStateFeatures sample_game_state(const GeneratorConfig& config, Rng& rng);

/// config.n independent (state, decision) records, deterministic in config.seed.
Dataset generate_dataset(const Theta& theta, const GeneratorConfig& config);

/// Validates a record: state invariants, move/direction consistency and that
/// a chosen direction is open. Throws std::invalid_argument.
void validate_record(const DatasetRecord& record);

// JSON-lines dataset files, one record per line:
// {"i":1,"m":1,"d":"N","ga":..,"ra":..,"dirs":{"N":{"ga":..,"gd":..,"ra":..,"rd":..,"oa":0},...}}
void write_dataset(const Dataset& data, std::ostream& out);
/// Throws InputError("line K: ...") on the first malformed or invalid line.
Dataset read_dataset(std::istream& in);

}  // namespace tlab
