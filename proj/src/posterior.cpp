#include "tendency_lab/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "tendency_lab/errors.hpp"

namespace tlab {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// ln(1 / (1 + e^-z)) without overflow.
double log_sigmoid(double z) {
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

bool inside_box(const Theta& theta, const PriorSpec& prior) {
  for (double w : {theta.w1, theta.w2, theta.w3, theta.w4}) {
    if (!(w >= prior.w_min && w <= prior.w_max)) return false;
  }
  return true;
}

void check_data(std::span<const DatasetRecord> data, EmptyData empty) {
  if (data.empty() && empty == EmptyData::Reject) {
    throw std::invalid_argument("log posterior needs a non-empty dataset");
  }
}

}  // namespace

void PriorSpec::validate() const {
  if (!(std::isfinite(w_min) && w_min > 0.0)) throw ConfigError("prior.w_min: must be positive");
  if (!(std::isfinite(w_max) && w_max > w_min)) throw ConfigError("prior.w_max: must exceed w_min");
  if (!std::isfinite(delta_mean)) throw ConfigError("prior.delta_mean: must be finite");
  if (!(std::isfinite(delta_sd) && delta_sd > 0.0)) {
    throw ConfigError("prior.delta_sd: must be positive");
  }
}

Transformed transform(const UnconstrainedPoint& point) {
  const auto& c = point.coords;
  Transformed out;
  out.theta = {std::exp(c[0]), std::exp(c[1]), std::exp(c[2]), std::exp(c[3]), c[4], c[5]};
  out.log_jacobian = c[0] + c[1] + c[2] + c[3];
  return out;
}

UnconstrainedPoint inverse_transform(const Theta& theta) {
  return {{std::log(theta.w1), std::log(theta.w2), std::log(theta.w3), std::log(theta.w4),
           theta.delta1, theta.delta2}};
}

double log_prior(const Theta& theta, const PriorSpec& prior) {
  if (!inside_box(theta, prior)) return kNegInf;
  double lp = -(std::log(theta.w1) + std::log(theta.w2) + std::log(theta.w3) + std::log(theta.w4));
  const double z1 = (theta.delta1 - prior.delta_mean) / prior.delta_sd;
  const double z2 = (theta.delta2 - prior.delta_mean) / prior.delta_sd;
  lp -= 0.5 * (z1 * z1 + z2 * z2);
  return lp;
}

double record_log_likelihood(const Theta& theta, const DatasetRecord& record) {
  const Decision& dec = record.decision;
  if (!dec.move) {
    if (dec.direction != Direction::None) throw std::invalid_argument("invalid record");
    return log_sigmoid(-move_logit(theta, record.state));
  }
  if (dec.direction == Direction::None) throw std::invalid_argument("invalid record");
  double ll = log_sigmoid(move_logit(theta, record.state));
  if (record.state.dir(dec.direction).oa != 0) return kNegInf;
  // Log-softmax directly; the probability itself underflows at extreme weights.
  const auto u = direction_utilities(theta, record.state);
  double top = kNegInf;
  for (std::size_t i = 0; i < 4; ++i) {
    if (record.state.dirs[i].oa == 0) top = std::max(top, u[i]);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (record.state.dirs[i].oa == 0) total += std::exp(u[i] - top);
  }
  ll += u[index_of(dec.direction)] - top - std::log(total);
  return ll;
}

double log_posterior(const Theta& theta, std::span<const DatasetRecord> data,
                     const PriorSpec& prior, EmptyData empty) {
  for (double v : theta.as_array()) {
    if (std::isnan(v)) throw std::invalid_argument("NaN parameter");
  }
  check_data(data, empty);
  const double lp = log_prior(theta, prior);
  if (lp == kNegInf) return kNegInf;
  double ll = 0.0;
  for (const auto& rec : data) ll += record_log_likelihood(theta, rec);
  return lp + ll;
}

double log_posterior_unconstrained(const UnconstrainedPoint& point,
                                   std::span<const DatasetRecord> data, const PriorSpec& prior,
                                   EmptyData empty) {
  const Transformed t = transform(point);
  const double lp = log_posterior(t.theta, data, prior, empty);
  return lp == kNegInf ? kNegInf : lp + t.log_jacobian;
}

std::array<double, 6> grad_log_posterior(const UnconstrainedPoint& point,
                                         std::span<const DatasetRecord> data,
                                         const PriorSpec& prior, EmptyData empty) {
  const PosteriorTarget target(data, prior, empty);
  std::array<double, 6> grad{};
  target.value_and_gradient(point.coords, grad);
  return grad;
}

UnconstrainedPoint sample_prior(const PriorSpec& prior, Rng& rng) {
  std::uniform_real_distribution<double> log_w(std::log(prior.w_min), std::log(prior.w_max));
  std::normal_distribution<double> delta(prior.delta_mean, prior.delta_sd);
  UnconstrainedPoint p;
  for (std::size_t i = 0; i < 4; ++i) p.coords[i] = log_w(rng);
  p.coords[4] = delta(rng);
  p.coords[5] = delta(rng);
  return p;
}

PosteriorTarget::PosteriorTarget(std::span<const DatasetRecord> data, const PriorSpec& prior,
                                 EmptyData empty)
    : prior_(prior) {
  prior_.validate();
  check_data(data, empty);
  moves_.reserve(data.size());
  for (const auto& rec : data) {
    const Decision& dec = rec.decision;
    if (dec.move == (dec.direction == Direction::None)) throw std::invalid_argument("invalid record");
    moves_.push_back({rec.state.ga, rec.state.ra, dec.move});
    if (!dec.move) continue;
    DirectionTerm term{};
    for (std::size_t i = 0; i < 4; ++i) {
      const auto& f = rec.state.dirs[i];
      term.gold_ratio[i] = safe_ratio(f.ga, f.gd);
      term.rock_ratio[i] = safe_ratio(f.ra, f.rd);
      term.open[i] = f.oa == 0;
    }
    term.chosen = static_cast<int>(index_of(dec.direction));
    if (!term.open[static_cast<std::size_t>(term.chosen)]) impossible_ = true;
    directions_.push_back(term);
  }
}

double PosteriorTarget::value_and_gradient(std::span<const double, 6> coords,
                                           std::span<double, 6> grad) const {
  return evaluate<true>(coords, grad.data());
}

double PosteriorTarget::value(std::span<const double, 6> coords) const {
  return evaluate<false>(coords, nullptr);
}

template <bool WithGradient>
double PosteriorTarget::evaluate(std::span<const double, 6> c, double* grad) const {
  if constexpr (WithGradient) std::fill(grad, grad + 6, 0.0);
  for (double v : c) {
    if (std::isnan(v)) throw std::invalid_argument("NaN parameter");
  }
  // Box test on log weights so points built from ln(w_min), ln(w_max) pass.
  const double lo = std::log(prior_.w_min);
  const double hi = std::log(prior_.w_max);
  for (std::size_t k = 0; k < 4; ++k) {
    if (!(c[k] >= lo && c[k] <= hi)) return kNegInf;
  }
  const double w1 = std::exp(c[0]);
  const double w2 = std::exp(c[1]);
  const double w3 = std::exp(c[2]);
  const double w4 = std::exp(c[3]);
  if (impossible_) return kNegInf;
  const double t1 = c[4];
  const double t2 = c[5];

  // Jeffreys prior and the log-Jacobian cancel in log-weight coordinates.
  const double var = prior_.delta_sd * prior_.delta_sd;
  double lp = -0.5 * ((t1 - prior_.delta_mean) * (t1 - prior_.delta_mean) +
                      (t2 - prior_.delta_mean) * (t2 - prior_.delta_mean)) /
              var;
  double g_v1 = 0.0, g_v2 = 0.0, g_v3 = 0.0, g_v4 = 0.0;
  double g_t1 = -(t1 - prior_.delta_mean) / var;
  double g_t2 = -(t2 - prior_.delta_mean) / var;

  for (const MoveTerm& m : moves_) {
    const double gold_excess = m.ga - t1;
    const double rock_excess = m.ra - t2;
    const double z = w2 * rock_excess - w1 * gold_excess;
    // Signed logit of the observed outcome; one exp serves value and gradient.
    const double s = m.moved ? z : -z;
    const double e = std::exp(-std::abs(s));
    lp += std::min(s, 0.0) - std::log1p(e);
    if constexpr (WithGradient) {
      const double p_move = z >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
      const double dz = (m.moved ? 1.0 : 0.0) - p_move;
      g_v1 -= dz * gold_excess * w1;
      g_v2 += dz * rock_excess * w2;
      g_t1 += dz * w1;
      g_t2 -= dz * w2;
    }
  }

  const double gold_scale = w1 / w3;
  const double rock_scale = w2 / w4;
  for (const DirectionTerm& d : directions_) {
    std::array<double, 4> u{};
    double top = kNegInf;
    for (std::size_t i = 0; i < 4; ++i) {
      u[i] = gold_scale * d.gold_ratio[i] - rock_scale * d.rock_ratio[i];
      if (d.open[i]) top = std::max(top, u[i]);
    }
    double total = 0.0;
    std::array<double, 4> e{};
    for (std::size_t i = 0; i < 4; ++i) {
      if (!d.open[i]) continue;
      e[i] = std::exp(u[i] - top);
      total += e[i];
    }
    const auto chosen = static_cast<std::size_t>(d.chosen);
    lp += u[chosen] - top - std::log(total);
    if constexpr (WithGradient) {
      double mean_gold = 0.0;
      double mean_rock = 0.0;
      for (std::size_t i = 0; i < 4; ++i) {
        const double p = e[i] / total;
        mean_gold += p * d.gold_ratio[i];
        mean_rock += p * d.rock_ratio[i];
      }
      const double d_gold = gold_scale * (d.gold_ratio[chosen] - mean_gold);
      const double d_rock = -rock_scale * (d.rock_ratio[chosen] - mean_rock);
      g_v1 += d_gold;
      g_v3 -= d_gold;
      g_v2 += d_rock;
      g_v4 -= d_rock;
    }
  }

  if constexpr (WithGradient) {
    grad[0] = g_v1;
    grad[1] = g_v2;
    grad[2] = g_v3;
    grad[3] = g_v4;
    grad[4] = g_t1;
    grad[5] = g_t2;
  }
  return lp;
}

}  // namespace tlab
