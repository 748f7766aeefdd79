#pragma once

#include <array>
#include <span>
#include <vector>

#include "tendency_lab/datagen.hpp"
#include "tendency_lab/decision_model.hpp"
#include "tendency_lab/random.hpp"

namespace tlab {

/// Priors: each weight gets a Jeffreys prior (density proportional to 1/w)
/// truncated to [w_min, w_max]; each threshold gets Normal(delta_mean, delta_sd).
struct PriorSpec {
  double w_min = 1e-3;
  double w_max = 10.0;
  double delta_mean = 50.0;
  double delta_sd = 25.0;

  /// Throws ConfigError with a "prior.<field>" path.
  void validate() const;
};

/// Sampler coordinates: v_r = ln w_r for the four weights, then the two
/// thresholds unchanged.
struct UnconstrainedPoint {
  std::array<double, 6> coords{};
};

struct Transformed {
  Theta theta;
  double log_jacobian = 0.0;
};

Transformed transform(const UnconstrainedPoint& point);
UnconstrainedPoint inverse_transform(const Theta& theta);

/// Whether an empty dataset is acceptable. Only prior-recovery checks use Allow.
enum class EmptyData { Reject, Allow };

/// Log prior up to a constant; -inf outside the weight truncation box.
double log_prior(const Theta& theta, const PriorSpec& prior);

/// ln p(m | state) + m * ln p(d | m=1, state). -inf when the chosen direction
/// is blocked; throws std::invalid_argument for m=0 paired with a direction.
double record_log_likelihood(const Theta& theta, const DatasetRecord& record);

/// log_prior plus the summed record log-likelihoods, up to a constant.
/// Throws std::invalid_argument on NaN parameters or a rejected empty dataset.
double log_posterior(const Theta& theta, std::span<const DatasetRecord> data,
                     const PriorSpec& prior, EmptyData empty = EmptyData::Reject);

/// log_posterior(transform(point)) + log_jacobian.
double log_posterior_unconstrained(const UnconstrainedPoint& point,
                                   std::span<const DatasetRecord> data, const PriorSpec& prior,
                                   EmptyData empty = EmptyData::Reject);

/// Analytic gradient of log_posterior_unconstrained with respect to
/// (v1..v4, t1, t2). Zero outside the truncation box.
std::array<double, 6> grad_log_posterior(const UnconstrainedPoint& point,
                                         std::span<const DatasetRecord> data,
                                         const PriorSpec& prior,
                                         EmptyData empty = EmptyData::Reject);

/// Independent draw from the prior, in sampler coordinates.
UnconstrainedPoint sample_prior(const PriorSpec& prior, Rng& rng);

/// Precomputed form of a dataset for repeated value+gradient evaluation in
/// sampler coordinates. Holds its own copy of the per-record quantities.
class PosteriorTarget {
 public:
  PosteriorTarget(std::span<const DatasetRecord> data, const PriorSpec& prior,
                  EmptyData empty = EmptyData::Reject);

  /// Writes the gradient into `grad` and returns the log density;
  /// -inf (with a zero gradient) outside the truncation box.
  double value_and_gradient(std::span<const double, 6> coords, std::span<double, 6> grad) const;

  double value(std::span<const double, 6> coords) const;

  const PriorSpec& prior() const { return prior_; }
  std::size_t size() const { return moves_.size(); }

 private:
  struct MoveTerm {
    double ga;
    double ra;
    bool moved;
  };
  struct DirectionTerm {
    std::array<double, 4> gold_ratio;
    std::array<double, 4> rock_ratio;
    std::array<bool, 4> open;
    int chosen;
  };

  template <bool WithGradient>
  double evaluate(std::span<const double, 6> coords, double* grad) const;

  PriorSpec prior_;
  std::vector<MoveTerm> moves_;
  std::vector<DirectionTerm> directions_;
  bool impossible_ = false;  // some observed direction is blocked
};

}  // namespace tlab
