#pragma once

// Oracles shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "tendency_lab/posterior.hpp"
#include "tendency_lab/sampler.hpp"

namespace tlab::testing {

/// Standard Normal in `dim` dimensions.
class StdNormal final : public DensityTarget {
 public:
  explicit StdNormal(std::size_t dim) : dim_(dim) {}
  std::size_t dim() const override { return dim_; }
  double log_density_gradient(const Eigen::VectorXd& q, Eigen::VectorXd& grad) const override {
    grad = -q;
    return -0.5 * q.squaredNorm();
  }

 private:
  std::size_t dim_;
};

/// Posterior over (ln w1, ln w2) with w3, w4, delta1, delta2 fixed at `fixed`.
class ReducedPosterior final : public DensityTarget {
 public:
  ReducedPosterior(std::span<const DatasetRecord> data, const Theta& fixed,
                   const PriorSpec& prior = {})
      : target_(data, prior), base_(inverse_transform(fixed)) {}

  std::size_t dim() const override { return 2; }

  double log_density_gradient(const Eigen::VectorXd& q, Eigen::VectorXd& grad) const override {
    UnconstrainedPoint p = base_;
    p.coords[0] = q[0];
    p.coords[1] = q[1];
    std::array<double, 6> g{};
    const double lp = target_.value_and_gradient(p.coords, g);
    grad.resize(2);
    grad << g[0], g[1];
    return lp;
  }

  double log_density(const Eigen::VectorXd& q) const override {
    UnconstrainedPoint p = base_;
    p.coords[0] = q[0];
    p.coords[1] = q[1];
    return target_.value(p.coords);
  }

 private:
  PosteriorTarget target_;
  UnconstrainedPoint base_;
};

/// Marginals of a 2-D density tabulated on an n x n midpoint grid.
struct GridMarginals {
  std::array<double, 2> lo{};
  std::array<double, 2> hi{};
  std::array<std::vector<double>, 2> mass;  ///< per-cell probability, sums to 1
};

inline GridMarginals grid_marginals(const DensityTarget& target, std::array<double, 2> lo,
                                    std::array<double, 2> hi, int n) {
  std::vector<double> logp(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  double top = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd q(2);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      q[0] = lo[0] + (hi[0] - lo[0]) * (i + 0.5) / n;
      q[1] = lo[1] + (hi[1] - lo[1]) * (j + 0.5) / n;
      const double v = target.log_density(q);
      logp[static_cast<std::size_t>(i * n + j)] = v;
      top = std::max(top, v);
    }
  }
  GridMarginals out{lo, hi, {std::vector<double>(static_cast<std::size_t>(n)),
                             std::vector<double>(static_cast<std::size_t>(n))}};
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double w = std::exp(logp[static_cast<std::size_t>(i * n + j)] - top);
      out.mass[0][static_cast<std::size_t>(i)] += w;
      out.mass[1][static_cast<std::size_t>(j)] += w;
      total += w;
    }
  }
  for (auto& m : out.mass) {
    for (double& v : m) v /= total;
  }
  return out;
}

/// Grid bounds covering the posterior: a coarse scan of the whole box locates
/// the mass, which is then padded by `pad` coarse standard deviations.
inline std::pair<std::array<double, 2>, std::array<double, 2>> grid_window(
    const DensityTarget& target, const PriorSpec& prior, double pad = 10.0) {
  const double lo = std::log(prior.w_min), hi = std::log(prior.w_max);
  constexpr int n = 400;
  const GridMarginals coarse = grid_marginals(target, {lo, lo}, {hi, hi}, n);
  std::array<double, 2> a{}, b{};
  const double cell = (hi - lo) / n;
  for (std::size_t k = 0; k < 2; ++k) {
    double m = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) m += coarse.mass[k][static_cast<std::size_t>(i)] * (lo + (i + 0.5) * cell);
    for (int i = 0; i < n; ++i) {
      const double d = lo + (i + 0.5) * cell - m;
      s2 += coarse.mass[k][static_cast<std::size_t>(i)] * d * d;
    }
    const double sd = std::max(std::sqrt(s2), cell);
    a[k] = std::max(lo, m - pad * sd);
    b[k] = std::min(hi, m + pad * sd);
  }
  return {a, b};
}

/// Total-variation distance between draws and grid marginal `axis`, with the
/// grid cells pooled into `bins` equal-width bins.
inline double tv_distance(const std::vector<double>& draws, const GridMarginals& grid,
                          std::size_t axis, int bins) {
  const auto& cells = grid.mass[axis];
  const double lo = grid.lo[axis], hi = grid.hi[axis];
  std::vector<double> expected(static_cast<std::size_t>(bins)), observed(expected.size());
  const auto n = static_cast<int>(cells.size());
  for (int i = 0; i < n; ++i) {
    expected[static_cast<std::size_t>(i * bins / n)] += cells[static_cast<std::size_t>(i)];
  }
  double outside = 0.0;
  for (double x : draws) {
    const double u = (x - lo) / (hi - lo);
    if (u < 0.0 || u >= 1.0) {
      outside += 1.0;
      continue;
    }
    // Same cell-to-bin map as the grid so bin edges coincide.
    const int cell = std::min(n - 1, static_cast<int>(u * n));
    observed[static_cast<std::size_t>(cell * bins / n)] += 1.0;
  }
  const double total = static_cast<double>(draws.size());
  double tv = outside / total;
  for (std::size_t b = 0; b < expected.size(); ++b) tv += std::abs(observed[b] / total - expected[b]);
  return 0.5 * tv;
}

}  // namespace tlab::testing
