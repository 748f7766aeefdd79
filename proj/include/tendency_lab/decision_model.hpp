#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tendency_lab/gridworld.hpp"
#include "tendency_lab/random.hpp"

namespace tlab {

/// Behaviour tendency: feature weights and move thresholds.
///
/// w1/w2 weigh gold and rock around the player, w3/w4 scale the per-direction
/// gold and rock ratios, delta1/delta2 are the gold/rock thresholds of the
/// move decision (tile-count units). The direction decision has no thresholds.
struct Theta {
  double w1 = 1.0;
  double w2 = 1.0;
  double w3 = 1.0;
  double w4 = 1.0;
  double delta1 = 0.0;
  double delta2 = 0.0;

  static constexpr std::size_t kSize = 6;
  static constexpr std::array<std::string_view, kSize> kNames = {"w1", "w2", "w3",
                                                                 "w4", "delta1", "delta2"};

  std::array<double, kSize> as_array() const { return {w1, w2, w3, w4, delta1, delta2}; }
  static Theta from_array(const std::array<double, kSize>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
  }

  /// Throws ConfigError unless all weights are finite and positive and both
  /// thresholds are finite.
  void validate() const;

  friend bool operator==(const Theta&, const Theta&) = default;
};

namespace presets {
/// Heavy gold weight, little attention to rock.
Theta rock_agnostic();
/// Heavy gold weight, strong aversion to rock clusters.
Theta rock_averse();
/// Names of the built-in presets.
std::vector<std::string> names();
/// Preset by name, or nullopt.
std::optional<Theta> find(std::string_view name);
}  // namespace presets

/// A move decision and, if moving, its direction. move == false iff
/// direction == Direction::None.
struct Decision {
  bool move = false;
  Direction direction = Direction::None;

  friend bool operator==(const Decision&, const Decision&) = default;
};

/// Generic weighted-feature choice rule. Outcome o has score
/// sum_r weights[r] * (features[o][r] - thresholds[r]).
struct ChoiceSpec {
  std::vector<double> weights;
  std::vector<double> thresholds;
  std::vector<std::vector<double>> outcome_features;
};

/// Softmax of the outcome scores. Throws std::invalid_argument on an empty
/// outcome set, mismatched lengths or non-finite features.
std::vector<double> generic_choice_probabilities(const ChoiceSpec& spec);

/// Logit of the move probability: w2*(ra - delta2) - w1*(ga - delta1).
double move_logit(const Theta& theta, const GameStateFeatures& state);

/// Probability of deciding to move. Throws std::invalid_argument on
/// non-finite global features.
double move_probability(const Theta& theta, const GameStateFeatures& state);

/// a / b when both are positive, else 0.
constexpr double safe_ratio(double a, double b) { return (a > 0.0 && b > 0.0) ? a / b : 0.0; }

/// u_d = (w1/w3) * ga_d/gd_d - (w2/w4) * ra_d/rd_d for each direction.
std::array<double, 4> direction_utilities(const Theta& theta, const GameStateFeatures& state);

/// Softmax of the utilities over open directions (oa == 0); blocked
/// directions get exactly 0. Throws std::invalid_argument if all are blocked.
std::array<double, 4> direction_probabilities(const Theta& theta, const GameStateFeatures& state);

/// Softmax over `utilities` restricted to `open` entries, max-shifted.
std::array<double, 4> masked_softmax(const std::array<double, 4>& utilities,
                                     const std::array<bool, 4>& open);

/// Draws M ~ Bernoulli(move_probability), then a direction if moving.
Decision sample_decision(const Theta& theta, const GameStateFeatures& state, Rng& rng);

}  // namespace tlab
