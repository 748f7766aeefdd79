#include "tendency_lab/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>

#include "tendency_lab/errors.hpp"
#include "tendency_lab/io_util.hpp"

// REFERENCE: Hoffman, M.D. and Gelman, A., 2014. The No-U-Turn sampler:
// adaptively setting path lengths in Hamiltonian Monte Carlo. JMLR 15.
// The multinomial trajectory sampling and the extra U-turn checks across
// merged subtrees follow Betancourt (2017), arXiv:1701.02434.

namespace tlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxInitAttempts = 100;

double log_sum_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Running mean/covariance for metric estimation.
class Welford {
 public:
  explicit Welford(Eigen::Index dim)
      : mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::MatrixXd::Zero(dim, dim)) {}

  void add(const Eigen::VectorXd& q) {
    ++n_;
    const Eigen::VectorXd delta = q - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (q - mean_).transpose();
  }

  // Sample covariance shrunk toward 1e-3 * I for small windows; off-diagonal
  // terms dropped for a diagonal metric.
  Eigen::MatrixXd regularized(MetricKind kind) const {
    const double n = static_cast<double>(n_);
    Eigen::MatrixXd cov = m2_ / std::max(n - 1.0, 1.0);
    if (kind == MetricKind::Diagonal) cov = Eigen::MatrixXd(cov.diagonal().asDiagonal());
    cov *= n / (n + 5.0);
    cov.diagonal().array() += 1e-3 * (5.0 / (n + 5.0));
    return cov;
  }

  void reset() {
    n_ = 0;
    mean_.setZero();
    m2_.setZero();
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd m2_;
  std::size_t n_ = 0;
};

// Inverse metric with its Cholesky factor (inv = L L').
struct Metric {
  Eigen::MatrixXd inv;
  Eigen::MatrixXd chol;

  explicit Metric(Eigen::Index dim)
      : inv(Eigen::MatrixXd::Identity(dim, dim)), chol(Eigen::MatrixXd::Identity(dim, dim)) {}

  void set(Eigen::MatrixXd m) {
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success) return;  // keep the previous metric
    inv = std::move(m);
    chol = llt.matrixL();
  }
};

// Burn-in metric windows: a fast initial buffer, doubling slow windows and a
// terminal buffer for step size only.
class WindowSchedule {
 public:
  explicit WindowSchedule(int burn_in) : burn_in_(burn_in) {
    if (burn_in < 20) return;
    enabled_ = true;
    init_ = 75;
    term_ = 50;
    window_ = 25;
    if (init_ + window_ + term_ > burn_in) {
      init_ = static_cast<int>(0.15 * burn_in);
      term_ = static_cast<int>(0.1 * burn_in);
      window_ = burn_in - (init_ + term_);
    }
    next_end_ = init_ + window_ - 1;
  }

  bool in_window(int it) const { return enabled_ && it >= init_ && it < burn_in_ - term_; }
  bool end_of_window(int it) const { return enabled_ && it == next_end_; }

  void advance(int it) {
    const int last = burn_in_ - term_ - 1;
    if (next_end_ == last) {
      next_end_ = -1;
      return;
    }
    window_ *= 2;
    next_end_ = it + window_;
    if (next_end_ != last && next_end_ + 2 * window_ >= burn_in_ - term_) next_end_ = last;
  }

 private:
  int burn_in_;
  bool enabled_ = false;
  int init_ = 0;
  int term_ = 0;
  int window_ = 0;
  int next_end_ = -1;
};

struct TransitionInfo {
  double accept_stat = 0.0;
  int depth = 0;
  bool divergent = false;
  bool boundary = false;
  std::uint64_t leapfrog_steps = 0;
};

class NutsKernel {
 public:
  NutsKernel(const DensityTarget& target, const Metric& metric, int max_depth, Rng& rng)
      : target_(target), metric_(metric), inv_metric_(metric.inv), max_depth_(max_depth), rng_(rng) {}

  // p ~ N(0, M) with M = inv(L L'), i.e. p = L^-T xi.
  void draw_momentum(PhasePoint& z) {
    Eigen::VectorXd xi(z.q.size());
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = normal_(rng_);
    z.p = metric_.chol.transpose().triangularView<Eigen::Upper>().solve(xi);
  }

  // Doubles or halves the step until one leapfrog step crosses an
  // acceptance probability of 0.8.
  double init_step_size(const PhasePoint& start, double step) {
    const double log_target = std::log(0.8);
    PhasePoint z = start;
    draw_momentum(z);
    double h0 = hamiltonian(z, inv_metric_);
    leapfrog(target_, inv_metric_, z, step);
    double delta = h0 - hamiltonian(z, inv_metric_);
    const int direction = delta > log_target ? 1 : -1;
    for (int i = 0; i < 100; ++i) {
      z = start;
      draw_momentum(z);
      h0 = hamiltonian(z, inv_metric_);
      leapfrog(target_, inv_metric_, z, step);
      delta = h0 - hamiltonian(z, inv_metric_);
      if (std::isnan(delta)) delta = -kInf;
      if (direction == 1 && !(delta > log_target)) break;
      if (direction == -1 && !(delta < log_target)) break;
      step = direction == 1 ? 2.0 * step : 0.5 * step;
      if (step > 1e7) throw SamplerError("step size search diverged; posterior may be improper");
      if (step < 1e-12) throw SamplerError("step size search collapsed to zero");
    }
    return step;
  }

  TransitionInfo transition(PhasePoint& z, double step) {
    step_ = step;
    info_ = TransitionInfo{};
    draw_momentum(z);
    const double h0 = hamiltonian(z, inv_metric_);

    PhasePoint z_fwd = z;
    PhasePoint z_bck = z;
    PhasePoint z_sample = z;
    PhasePoint z_propose = z;

    const Eigen::VectorXd p_sharp0 = inv_metric_ * z.p;
    Eigen::VectorXd p_fwd_fwd = z.p, p_sharp_fwd_fwd = p_sharp0;
    Eigen::VectorXd p_fwd_bck = z.p, p_sharp_fwd_bck = p_sharp0;
    Eigen::VectorXd p_bck_fwd = z.p, p_sharp_bck_fwd = p_sharp0;
    Eigen::VectorXd p_bck_bck = z.p, p_sharp_bck_bck = p_sharp0;
    Eigen::VectorXd rho = z.p;

    double log_sum_weight = 0.0;
    double sum_metro_prob = 0.0;
    const auto n = z.q.size();

    int depth = 0;
    while (depth < max_depth_) {
      Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(n);
      Eigen::VectorXd rho_bck = Eigen::VectorXd::Zero(n);
      double log_sum_weight_subtree = -kInf;
      bool valid = false;

      if (uniform01(rng_) > 0.5) {
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid = build_tree(depth, z_fwd, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd,
                           p_fwd_bck, p_fwd_fwd, h0, 1.0, log_sum_weight_subtree, sum_metro_prob);
      } else {
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid = build_tree(depth, z_bck, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck,
                           p_bck_fwd, p_bck_bck, h0, -1.0, log_sum_weight_subtree, sum_metro_prob);
      }
      if (!valid) break;
      ++depth;

      if (log_sum_weight_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (uniform01(rng_) < std::exp(log_sum_weight_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

      rho = rho_bck + rho_fwd;
      bool persist = no_u_turn(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      persist = persist && no_u_turn(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck);
      persist = persist && no_u_turn(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd);
      if (!persist) break;
    }

    info_.depth = depth;
    info_.accept_stat =
        info_.leapfrog_steps > 0 ? sum_metro_prob / static_cast<double>(info_.leapfrog_steps) : 0.0;
    z = z_sample;
    return info_;
  }

 private:
  static bool no_u_turn(const Eigen::VectorXd& p_sharp_minus, const Eigen::VectorXd& p_sharp_plus,
                        const Eigen::VectorXd& rho) {
    return p_sharp_plus.dot(rho) > 0.0 && p_sharp_minus.dot(rho) > 0.0;
  }

  // Extends the trajectory from `z` by 2^depth leapfrog steps in direction
  // `sign`; returns false on divergence, a -inf density or a U-turn.
  bool build_tree(int depth, PhasePoint& z, PhasePoint& z_propose, Eigen::VectorXd& p_sharp_beg,
                  Eigen::VectorXd& p_sharp_end, Eigen::VectorXd& rho, Eigen::VectorXd& p_beg,
                  Eigen::VectorXd& p_end, double h0, double sign, double& log_sum_weight,
                  double& sum_metro_prob) {
    if (depth == 0) {
      leapfrog(target_, inv_metric_, z, sign * step_);
      ++info_.leapfrog_steps;
      double h = hamiltonian(z, inv_metric_);
      if (std::isnan(h)) h = kInf;
      if (h == kInf) {
        info_.boundary = true;
        return false;
      }
      if (h - h0 > kDivergenceThreshold) {
        info_.divergent = true;
        return false;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro_prob += h0 - h > 0.0 ? 1.0 : std::exp(h0 - h);
      z_propose = z;
      p_sharp_beg = inv_metric_ * z.p;
      p_sharp_end = p_sharp_beg;
      rho += z.p;
      p_beg = z.p;
      p_end = p_beg;
      return true;
    }

    const auto n = z.q.size();
    Eigen::VectorXd p_init_end(n), p_sharp_init_end(n);
    Eigen::VectorXd rho_init = Eigen::VectorXd::Zero(n);
    double log_sum_weight_init = -kInf;
    if (!build_tree(depth - 1, z, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg,
                    p_init_end, h0, sign, log_sum_weight_init, sum_metro_prob)) {
      return false;
    }

    PhasePoint z_propose_final = z;
    Eigen::VectorXd p_final_beg(n), p_sharp_final_beg(n);
    Eigen::VectorXd rho_final = Eigen::VectorXd::Zero(n);
    double log_sum_weight_final = -kInf;
    if (!build_tree(depth - 1, z, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final,
                    p_final_beg, p_end, h0, sign, log_sum_weight_final, sum_metro_prob)) {
      return false;
    }

    const double log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
    log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
    if (log_sum_weight_final > log_sum_weight_subtree) {
      z_propose = z_propose_final;
    } else if (uniform01(rng_) < std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
      z_propose = z_propose_final;
    }

    const Eigen::VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = no_u_turn(p_sharp_beg, p_sharp_end, rho_subtree);
    persist = persist && no_u_turn(p_sharp_beg, p_sharp_final_beg, rho_init + p_final_beg);
    persist = persist && no_u_turn(p_sharp_init_end, p_sharp_end, rho_final + p_init_end);
    return persist;
  }

  const DensityTarget& target_;
  const Metric& metric_;
  const Eigen::MatrixXd& inv_metric_;
  int max_depth_;
  Rng& rng_;
  std::normal_distribution<double> normal_;
  double step_ = 1.0;
  TransitionInfo info_;
};

}  // namespace

std::string_view algorithm_name(Algorithm a) {
  return a == Algorithm::NutsHmc ? "nuts" : "random_walk";
}

Algorithm algorithm_from_name(std::string_view name) {
  if (name == "nuts") return Algorithm::NutsHmc;
  if (name == "random_walk") return Algorithm::RandomWalk;
  throw ConfigError("sampler.algorithm: expected \"nuts\" or \"random_walk\"");
}

std::string_view metric_name(MetricKind m) { return m == MetricKind::Dense ? "dense" : "diag"; }

MetricKind metric_from_name(std::string_view name) {
  if (name == "dense") return MetricKind::Dense;
  if (name == "diag") return MetricKind::Diagonal;
  throw ConfigError("sampler.metric: expected \"dense\" or \"diag\"");
}

void SamplerConfig::validate() const {
  if (chains <= 0) throw ConfigError("sampler.chains: must be positive");
  if (iterations <= 0) throw ConfigError("sampler.iterations: must be positive");
  if (burn_in < 0) throw ConfigError("sampler.burn_in: must be non-negative");
  if (burn_in >= iterations) throw ConfigError("sampler.burn_in: must be less than iterations");
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw ConfigError("sampler.target_accept: must lie in (0, 1)");
  }
  if (max_tree_depth <= 0) throw ConfigError("sampler.max_tree_depth: must be positive");
  if (threads < 0) throw ConfigError("sampler.threads: must be non-negative");
}

namespace {

// ln sigmoid(x), stable in both tails.
double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

}  // namespace

PosteriorDensity::PosteriorDensity(PosteriorTarget target)
    : target_(std::move(target)),
      log_lo_(std::log(target_.prior().w_min)),
      log_span_(std::log(target_.prior().w_max) - std::log(target_.prior().w_min)) {}

UnconstrainedPoint PosteriorDensity::to_unconstrained(const Eigen::VectorXd& q) const {
  UnconstrainedPoint p;
  for (std::size_t k = 0; k < 4; ++k) {
    const double u = std::exp(log_sigmoid(q[static_cast<Eigen::Index>(k)]));
    p.coords[k] = std::clamp(log_lo_ + log_span_ * u, log_lo_, log_lo_ + log_span_);
  }
  p.coords[4] = q[4];
  p.coords[5] = q[5];
  return p;
}

Eigen::VectorXd PosteriorDensity::to_sampler(const UnconstrainedPoint& point) const {
  Eigen::VectorXd q(6);
  for (std::size_t k = 0; k < 4; ++k) {
    double u = (point.coords[k] - log_lo_) / log_span_;
    if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("point outside the truncation box");
    u = std::clamp(u, 1e-12, 1.0 - 1e-12);  // box edges map to +-27.6
    q[static_cast<Eigen::Index>(k)] = std::log(u) - std::log1p(-u);
  }
  q[4] = point.coords[4];
  q[5] = point.coords[5];
  return q;
}

double PosteriorDensity::squeeze_log_jacobian(const Eigen::VectorXd& q) const {
  double lj = 0.0;
  for (Eigen::Index k = 0; k < 4; ++k) {
    lj += std::log(log_span_) + log_sigmoid(q[k]) + log_sigmoid(-q[k]);
  }
  return lj;
}

double PosteriorDensity::log_density(const Eigen::VectorXd& q) const {
  const UnconstrainedPoint v = to_unconstrained(q);
  const double lp = target_.value(v.coords);
  if (lp == -kInf) return lp;
  return lp + squeeze_log_jacobian(q);
}

double PosteriorDensity::log_density_gradient(const Eigen::VectorXd& q,
                                              Eigen::VectorXd& grad) const {
  grad.resize(6);
  const UnconstrainedPoint v = to_unconstrained(q);
  std::array<double, 6> g{};
  const double lp = target_.value_and_gradient(v.coords, g);
  if (lp == -kInf) {
    grad.setZero();
    return lp;
  }
  for (Eigen::Index k = 0; k < 4; ++k) {
    const double u = std::exp(log_sigmoid(q[k]));
    const double dv = log_span_ * u * (1.0 - u);
    grad[k] = g[static_cast<std::size_t>(k)] * dv + (1.0 - 2.0 * u);
  }
  grad[4] = g[4];
  grad[5] = g[5];
  return lp + squeeze_log_jacobian(q);
}

double PosteriorDensity::theta_log_posterior(const Eigen::VectorXd& q, double log_density) const {
  const UnconstrainedPoint v = to_unconstrained(q);
  // Remove both Jacobians: sigmoid squeeze and w = exp(v).
  return log_density - squeeze_log_jacobian(q) -
         (v.coords[0] + v.coords[1] + v.coords[2] + v.coords[3]);
}

void leapfrog(const DensityTarget& target, const Eigen::MatrixXd& inv_metric, PhasePoint& z,
              double step) {
  z.p += 0.5 * step * z.grad;
  z.q += step * (inv_metric * z.p);
  z.log_density = target.log_density_gradient(z.q, z.grad);
  z.p += 0.5 * step * z.grad;
}

double hamiltonian(const PhasePoint& z, const Eigen::MatrixXd& inv_metric) {
  if (!std::isfinite(z.log_density)) return kInf;
  return -z.log_density + 0.5 * z.p.dot(inv_metric * z.p);
}

void DualAveraging::restart(double step_size) {
  mu_ = std::log(10.0 * step_size);
  s_bar_ = 0.0;
  x_bar_ = 0.0;
  counter_ = 0.0;
}

double DualAveraging::learn(double accept_stat) {
  counter_ += 1.0;
  accept_stat = std::min(1.0, accept_stat);
  const double eta = 1.0 / (counter_ + t0_);
  s_bar_ = (1.0 - eta) * s_bar_ + eta * (target_ - accept_stat);
  const double x = mu_ - s_bar_ * std::sqrt(counter_) / gamma_;
  const double x_eta = std::pow(counter_, -kappa_);
  x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
  return std::exp(x);
}

double DualAveraging::final_step_size() const { return std::exp(x_bar_); }

ChainDraws run_chain(const DensityTarget& target, const SamplerConfig& config,
                     std::size_t chain_index, const Eigen::VectorXd& init) {
  Rng rng = make_rng(config.seed, 1 + static_cast<std::uint64_t>(chain_index));
  return run_chain(target, config, rng, init);
}

ChainDraws run_chain(const DensityTarget& target, const SamplerConfig& config, Rng& rng,
                     const Eigen::VectorXd& init) {
  config.validate();
  const auto dim = static_cast<Eigen::Index>(target.dim());
  if (init.size() != dim) throw std::invalid_argument("initial point has the wrong dimension");

  PhasePoint z;
  z.q = init;
  z.p = Eigen::VectorXd::Zero(dim);
  z.grad = Eigen::VectorXd::Zero(dim);
  z.log_density = target.log_density_gradient(z.q, z.grad);
  if (!std::isfinite(z.log_density)) {
    throw SamplerError("initialization failure: density not finite at the initial point");
  }

  const bool nuts = config.algorithm == Algorithm::NutsHmc;
  Metric metric(dim);
  NutsKernel kernel(target, metric, config.max_tree_depth, rng);
  DualAveraging dual(config.target_accept);
  double step = 1.0;
  if (nuts) {
    step = kernel.init_step_size(z, step);
    dual.restart(step);
  }

  // Random-walk state: proposal covariance is scale^2 * inv_metric.
  double log_scale = std::log(2.38 / std::sqrt(static_cast<double>(dim)));
  std::normal_distribution<double> normal;

  WindowSchedule schedule(config.burn_in);
  Welford welford(dim);

  ChainDraws out;
  out.draws.reserve(static_cast<std::size_t>(config.kept_draws()));
  out.log_density.reserve(static_cast<std::size_t>(config.kept_draws()));
  double accept_sum = 0.0;

  for (int it = 0; it < config.iterations; ++it) {
    const bool warm = it < config.burn_in;
    double accept_stat = 0.0;
    if (nuts) {
      const TransitionInfo info = kernel.transition(z, step);
      out.stats.leapfrog_steps += info.leapfrog_steps;
      accept_stat = info.accept_stat;
      if (!warm) {
        if (info.divergent) ++out.stats.divergences;
        if (info.boundary) ++out.stats.boundary_hits;
        if (info.depth >= config.max_tree_depth) ++out.stats.max_depth_hits;
      }
    } else {
      Eigen::VectorXd xi(dim);
      for (Eigen::Index i = 0; i < dim; ++i) xi[i] = normal(rng);
      const Eigen::VectorXd proposal = z.q + std::exp(log_scale) * (metric.chol * xi);
      const double lp = target.log_density(proposal);
      const double log_ratio = lp - z.log_density;
      accept_stat = std::isfinite(lp) ? std::min(1.0, std::exp(log_ratio)) : 0.0;
      if (!std::isfinite(lp) && !warm) ++out.stats.boundary_hits;
      if (std::isfinite(lp) && uniform01(rng) < accept_stat) {
        z.q = proposal;
        z.log_density = lp;
      }
    }

    if (warm) {
      if (nuts) {
        step = dual.learn(accept_stat);
      } else {
        log_scale += (accept_stat - 0.23) / std::pow(it + 1.0, 0.6);
        log_scale = std::clamp(log_scale, -20.0, 5.0);
      }
      if (schedule.in_window(it)) welford.add(z.q);
      if (schedule.end_of_window(it)) {
        metric.set(welford.regularized(config.metric));
        welford.reset();
        schedule.advance(it);
        if (nuts) {
          step = kernel.init_step_size(z, step);
          dual.restart(step);
        }
      }
      if (it == config.burn_in - 1 && nuts) step = dual.final_step_size();
      continue;
    }

    accept_sum += accept_stat;
    out.draws.push_back(z.q);
    out.log_density.push_back(z.log_density);
  }

  out.stats.step_size = nuts ? step : std::exp(log_scale);
  out.stats.inv_metric = metric.inv;
  const auto kept = static_cast<double>(out.draws.size());
  out.stats.mean_accept_stat = kept > 0 ? accept_sum / kept : 0.0;
  if (static_cast<double>(out.stats.divergences) > 0.1 * kept) {
    throw SamplerError("divergence rate exceeded: " + std::to_string(out.stats.divergences) +
                       " of " + std::to_string(out.draws.size()) + " transitions diverged");
  }
  return out;
}

std::size_t PosteriorChains::total_draws() const {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.draws.size();
  return n;
}

std::vector<std::vector<double>> PosteriorChains::parameter(std::size_t p) const {
  std::vector<std::vector<double>> out;
  out.reserve(chains.size());
  for (const auto& c : chains) {
    std::vector<double> v;
    v.reserve(c.draws.size());
    for (const auto& t : c.draws) v.push_back(t.as_array()[p]);
    out.push_back(std::move(v));
  }
  return out;
}

PosteriorChains run_inference(std::span<const DatasetRecord> data, const PriorSpec& prior,
                              const SamplerConfig& config, EmptyData empty) {
  config.validate();
  prior.validate();
  const PosteriorDensity density(PosteriorTarget(data, prior, empty));

  const auto n_chains = static_cast<std::size_t>(config.chains);
  std::vector<ChainResult> results(n_chains);
  std::vector<std::exception_ptr> errors(n_chains);

  auto run_one = [&](std::size_t c) {
    try {
      Rng rng = make_rng(config.seed, 1 + static_cast<std::uint64_t>(c));
      Eigen::VectorXd init(6);
      bool found = false;
      for (int attempt = 0; attempt < kMaxInitAttempts && !found; ++attempt) {
        init = density.to_sampler(sample_prior(prior, rng));
        found = std::isfinite(density.log_density(init));
      }
      if (!found) {
        throw SamplerError("initialization failure: no finite starting point in " +
                           std::to_string(kMaxInitAttempts) + " prior draws");
      }
      ChainDraws draws = run_chain(density, config, rng, init);
      ChainResult& r = results[c];
      r.stats = draws.stats;
      r.draws.reserve(draws.draws.size());
      r.log_posterior.reserve(draws.draws.size());
      for (std::size_t i = 0; i < draws.draws.size(); ++i) {
        r.draws.push_back(transform(density.to_unconstrained(draws.draws[i])).theta);
        r.log_posterior.push_back(density.theta_log_posterior(draws.draws[i], draws.log_density[i]));
      }
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };

  std::size_t n_threads = config.threads > 0 ? static_cast<std::size_t>(config.threads) : n_chains;
  n_threads = std::min(n_threads, n_chains);
  if (n_threads <= 1) {
    for (std::size_t c = 0; c < n_chains; ++c) run_one(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (std::size_t t = 0; t < n_threads; ++t) {
      workers.emplace_back([&] {
        for (std::size_t c = next++; c < n_chains; c = next++) run_one(c);
      });
    }
    for (auto& w : workers) w.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return PosteriorChains{std::move(results)};
}

void write_chains_csv(const PosteriorChains& chains, std::ostream& out) {
  out << "chain,iter,w1,w2,w3,w4,delta1,delta2,log_post\n";
  for (std::size_t c = 0; c < chains.chains.size(); ++c) {
    const auto& ch = chains.chains[c];
    for (std::size_t i = 0; i < ch.draws.size(); ++i) {
      out << c << ',' << (i + 1);
      for (double v : ch.draws[i].as_array()) out << ',' << format_double(v);
      out << ',' << format_double(ch.log_posterior[i]) << '\n';
    }
  }
}

PosteriorChains read_chains_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw InputError("line 1: empty chains file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "chain,iter,w1,w2,w3,w4,delta1,delta2,log_post") {
    throw InputError("line 1: unexpected header '" + line + "'");
  }
  PosteriorChains out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 9) throw InputError(where + "expected 9 fields");
    try {
      const double chain_d = parse_double(fields[0]);
      const double iter_d = parse_double(fields[1]);
      if (chain_d < 0 || chain_d != std::floor(chain_d) || iter_d < 1 ||
          iter_d != std::floor(iter_d)) {
        throw std::invalid_argument("chain and iter must be integers");
      }
      const auto chain = static_cast<std::size_t>(chain_d);
      if (chain == out.chains.size()) out.chains.emplace_back();
      if (chain + 1 != out.chains.size()) throw std::invalid_argument("chains must be contiguous");
      auto& ch = out.chains.back();
      if (static_cast<std::size_t>(iter_d) != ch.draws.size() + 1) {
        throw std::invalid_argument("iter must count up from 1 within a chain");
      }
      std::array<double, 6> vals{};
      for (std::size_t k = 0; k < 6; ++k) {
        vals[k] = parse_double(fields[k + 2]);
        if (!std::isfinite(vals[k])) throw std::invalid_argument("non-finite parameter value");
      }
      ch.draws.push_back(Theta::from_array(vals));
      ch.log_posterior.push_back(parse_double(fields[8]));
    } catch (const std::invalid_argument& e) {
      throw InputError(where + e.what());
    }
  }
  if (out.chains.empty()) throw InputError("line " + std::to_string(line_no) + ": no draws");
  for (const auto& c : out.chains) {
    if (c.draws.size() != out.chains.front().draws.size()) {
      throw InputError("chains have different lengths");
    }
  }
  return out;
}

}  // namespace tlab
