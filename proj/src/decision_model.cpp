#include "tendency_lab/decision_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tendency_lab/errors.hpp"

namespace tlab {

void Theta::validate() const {
  const std::array<double, 4> w = {w1, w2, w3, w4};
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!(std::isfinite(w[i]) && w[i] > 0.0)) {
      throw ConfigError("theta." + std::string(kNames[i]) + ": weight must be finite and positive");
    }
  }
  if (!std::isfinite(delta1)) throw ConfigError("theta.delta1: must be finite");
  if (!std::isfinite(delta2)) throw ConfigError("theta.delta2: must be finite");
}

namespace presets {

Theta rock_agnostic() {
  return {.w1 = 0.90, .w2 = 0.30, .w3 = 1.13, .w4 = 1.00, .delta1 = 20.0, .delta2 = 60.0};
}

Theta rock_averse() {
  return {.w1 = 0.95, .w2 = 0.80, .w3 = 3.17, .w4 = 1.14, .delta1 = 50.0, .delta2 = 20.0};
}

std::vector<std::string> names() { return {"rock_agnostic", "rock_averse"}; }

std::optional<Theta> find(std::string_view name) {
  if (name == "rock_agnostic") return rock_agnostic();
  if (name == "rock_averse") return rock_averse();
  return std::nullopt;
}

}  // namespace presets

std::vector<double> generic_choice_probabilities(const ChoiceSpec& spec) {
  if (spec.outcome_features.empty()) throw std::invalid_argument("no outcomes");
  if (spec.weights.size() != spec.thresholds.size()) {
    throw std::invalid_argument("weights and thresholds differ in length");
  }
  const std::size_t r = spec.weights.size();
  std::vector<double> scores;
  scores.reserve(spec.outcome_features.size());
  for (const auto& feats : spec.outcome_features) {
    if (feats.size() != r) throw std::invalid_argument("outcome feature count differs from R");
    double s = 0.0;
    for (std::size_t k = 0; k < r; ++k) {
      if (!std::isfinite(feats[k])) throw std::invalid_argument("non-finite feature value");
      s += spec.weights[k] * (feats[k] - spec.thresholds[k]);
    }
    scores.push_back(s);
  }
  const double top = *std::max_element(scores.begin(), scores.end());
  double total = 0.0;
  for (double& s : scores) {
    s = std::exp(s - top);
    total += s;
  }
  for (double& s : scores) s /= total;
  return scores;
}

double move_logit(const Theta& theta, const GameStateFeatures& state) {
  return theta.w2 * (state.ra - theta.delta2) - theta.w1 * (state.ga - theta.delta1);
}

double move_probability(const Theta& theta, const GameStateFeatures& state) {
  if (!std::isfinite(state.ga) || !std::isfinite(state.ra)) {
    throw std::invalid_argument("non-finite game state features");
  }
  const double z = move_logit(theta, state);
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::array<double, 4> direction_utilities(const Theta& theta, const GameStateFeatures& state) {
  const double gold_scale = theta.w1 / theta.w3;
  const double rock_scale = theta.w2 / theta.w4;
  std::array<double, 4> u{};
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& f = state.dirs[i];
    u[i] = gold_scale * safe_ratio(f.ga, f.gd) - rock_scale * safe_ratio(f.ra, f.rd);
  }
  return u;
}

std::array<double, 4> masked_softmax(const std::array<double, 4>& utilities,
                                     const std::array<bool, 4>& open) {
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 4; ++i) {
    if (open[i]) top = std::max(top, utilities[i]);
  }
  if (top == -std::numeric_limits<double>::infinity()) {
    throw std::invalid_argument("all directions blocked");
  }
  std::array<double, 4> p{};
  double total = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (!open[i]) continue;
    p[i] = std::exp(utilities[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

std::array<double, 4> direction_probabilities(const Theta& theta, const GameStateFeatures& state) {
  std::array<bool, 4> open{};
  for (std::size_t i = 0; i < 4; ++i) open[i] = state.dirs[i].oa == 0;
  return masked_softmax(direction_utilities(theta, state), open);
}

Decision sample_decision(const Theta& theta, const GameStateFeatures& state, Rng& rng) {
  // Probabilities first so a walled-in state fails regardless of the draw.
  const auto probs = direction_probabilities(theta, state);
  const double p_move = move_probability(theta, state);
  if (!(uniform01(rng) < p_move)) return {};
  const double u = uniform01(rng);
  double cum = 0.0;
  std::size_t last_open = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (probs[i] <= 0.0) continue;
    last_open = i;
    cum += probs[i];
    if (u < cum) return {true, kDirections[i]};
  }
  return {true, kDirections[last_open]};
}

}  // namespace tlab
