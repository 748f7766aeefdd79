#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "tendency_lab/datagen.hpp"
#include "tendency_lab/decision_model.hpp"
#include "tendency_lab/posterior.hpp"
#include "tendency_lab/random.hpp"

namespace tlab {

enum class Algorithm { NutsHmc, RandomWalk };

std::string_view algorithm_name(Algorithm a);
/// Accepts "nuts" and "random_walk"; throws ConfigError otherwise.
Algorithm algorithm_from_name(std::string_view name);

/// Shape of the adapted mass matrix. Dense handles the strong weight/threshold
/// correlations of the tendency posterior; Diagonal is the cheaper classic.
enum class MetricKind { Diagonal, Dense };

std::string_view metric_name(MetricKind m);
/// Accepts "diag" and "dense"; throws ConfigError otherwise.
MetricKind metric_from_name(std::string_view name);

struct SamplerConfig {
  int chains = 2;
  int iterations = 10000;  ///< total per chain, burn-in included
  int burn_in = 2000;
  double target_accept = 0.8;
  int max_tree_depth = 10;
  std::uint64_t seed = 2024;
  Algorithm algorithm = Algorithm::NutsHmc;
  MetricKind metric = MetricKind::Dense;
  /// Upper bound on concurrently running chains; 0 means one per chain.
  int threads = 0;

  /// Throws ConfigError with a "sampler.<field>" path.
  void validate() const;
  int kept_draws() const { return iterations - burn_in; }
};

/// Log density with gradient on R^n.
class DensityTarget {
 public:
  virtual ~DensityTarget() = default;
  virtual std::size_t dim() const = 0;
  /// Returns the log density (-inf outside the support) and fills `grad`.
  virtual double log_density_gradient(const Eigen::VectorXd& q, Eigen::VectorXd& grad) const = 0;
  virtual double log_density(const Eigen::VectorXd& q) const {
    Eigen::VectorXd grad(q.size());
    return log_density_gradient(q, grad);
  }
};

/// Posterior of the full six-parameter model in sampler coordinates
/// q = (s1..s4, t1, t2), where each log-weight is squeezed into its
/// truncation interval: v = ln w_min + (ln w_max - ln w_min) * sigmoid(s).
/// The box edges then sit at infinity, so trajectories never hit a hard
/// wall; the sigmoid Jacobian is included, leaving the target unchanged.
class PosteriorDensity final : public DensityTarget {
 public:
  explicit PosteriorDensity(PosteriorTarget target);
  std::size_t dim() const override { return 6; }
  double log_density_gradient(const Eigen::VectorXd& q, Eigen::VectorXd& grad) const override;
  double log_density(const Eigen::VectorXd& q) const override;
  const PosteriorTarget& target() const { return target_; }

  /// Sampler coordinates of a point strictly inside the truncation box.
  Eigen::VectorXd to_sampler(const UnconstrainedPoint& point) const;
  UnconstrainedPoint to_unconstrained(const Eigen::VectorXd& q) const;
  /// log_posterior (theta space, up to a constant) from a sampler-space
  /// log density at q.
  double theta_log_posterior(const Eigen::VectorXd& q, double log_density) const;

 private:
  // Log-Jacobian of q -> (v, t) and, optionally, its per-coordinate gradient.
  double squeeze_log_jacobian(const Eigen::VectorXd& q) const;

  PosteriorTarget target_;
  double log_lo_;
  double log_span_;
};

/// Position, momentum and cached density/gradient at the position.
struct PhasePoint {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
  Eigen::VectorXd grad;
  double log_density = 0.0;
};

/// One leapfrog step of size `step` (negative steps integrate backwards)
/// for kinetic energy 0.5 * p' inv_metric p.
void leapfrog(const DensityTarget& target, const Eigen::MatrixXd& inv_metric, PhasePoint& z,
              double step);

/// Potential plus kinetic energy; +inf when the density is not finite.
double hamiltonian(const PhasePoint& z, const Eigen::MatrixXd& inv_metric);

/// Dual-averaging step-size adaptation toward a target acceptance statistic.
class DualAveraging {
 public:
  DualAveraging(double target_accept, double gamma = 0.05, double t0 = 10.0, double kappa = 0.75)
      : target_(target_accept), gamma_(gamma), t0_(t0), kappa_(kappa) {}

  /// Resets the state around a new initial step size.
  void restart(double step_size);
  /// Returns the step size to use next.
  double learn(double accept_stat);
  /// Averaged step size, used once adaptation ends.
  double final_step_size() const;

 private:
  double target_;
  double gamma_;
  double t0_;
  double kappa_;
  double mu_ = 0.0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
  double counter_ = 0.0;
};

struct ChainStats {
  double step_size = 0.0;  ///< final step size (NUTS) or proposal scale (random walk)
  Eigen::MatrixXd inv_metric;      ///< adapted inverse mass matrix (diagonal or dense)
  std::size_t divergences = 0;      ///< post-burn-in transitions with energy error > 1000
  std::size_t boundary_hits = 0;    ///< post-burn-in transitions stopped at -inf density
  std::size_t max_depth_hits = 0;   ///< post-burn-in NUTS transitions that hit the depth cap
  std::uint64_t leapfrog_steps = 0; ///< all iterations
  double mean_accept_stat = 0.0;    ///< post-burn-in
};

/// Post-burn-in draws of one chain in sampler coordinates.
struct ChainDraws {
  std::vector<Eigen::VectorXd> draws;
  std::vector<double> log_density;
  ChainStats stats;
};

/// Energy error above which a trajectory counts as divergent.
inline constexpr double kDivergenceThreshold = 1000.0;

/// Runs one chain from `init`. Deterministic in (config.seed, chain_index).
/// Throws SamplerError on a non-finite initial density ("initialization
/// failure") or when more than 10% of kept transitions diverge.
ChainDraws run_chain(const DensityTarget& target, const SamplerConfig& config,
                     std::size_t chain_index, const Eigen::VectorXd& init);

/// Same as run_chain but with a caller-owned generator (used for the
/// initialization draw before sampling).
ChainDraws run_chain(const DensityTarget& target, const SamplerConfig& config, Rng& rng,
                     const Eigen::VectorXd& init);

struct ChainResult {
  std::vector<Theta> draws;
  std::vector<double> log_posterior;
  ChainStats stats;
};

/// Theta-space draws of every chain, ordered by chain index.
struct PosteriorChains {
  std::vector<ChainResult> chains;

  std::size_t draws_per_chain() const { return chains.empty() ? 0 : chains.front().draws.size(); }
  std::size_t total_draws() const;
  /// parameter p (0..5, Theta::kNames order) for every chain.
  std::vector<std::vector<double>> parameter(std::size_t p) const;
};

/// Runs config.chains chains, each initialized from an independent prior draw
/// (up to 100 attempts), possibly concurrently, merged by chain index.
PosteriorChains run_inference(std::span<const DatasetRecord> data, const PriorSpec& prior,
                              const SamplerConfig& config, EmptyData empty = EmptyData::Reject);

// Chain CSV: header chain,iter,w1,w2,w3,w4,delta1,delta2,log_post; chain is
// 0-based, iter is the 1-based kept-draw index.
void write_chains_csv(const PosteriorChains& chains, std::ostream& out);
/// Throws InputError("line K: ...") on malformed content.
PosteriorChains read_chains_csv(std::istream& in);

}  // namespace tlab
