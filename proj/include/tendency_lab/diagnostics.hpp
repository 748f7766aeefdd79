#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tendency_lab/decision_model.hpp"
#include "tendency_lab/sampler.hpp"

namespace tlab {

/// Posterior summary of one parameter. hdi3/hdi97 bound the 94% highest
/// density interval.
struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double hdi3 = 0.0;
  double hdi97 = 0.0;
  double ess = 0.0;
  double rhat = 1.0;
};

inline constexpr double kHdiProb = 0.94;
inline constexpr std::size_t kMinSummaryDraws = 100;

/// Shortest interval [x_i, x_{i+k-1}] over the sorted draws holding
/// k = ceil(prob * n) of them; ties go to the lowest start.
std::pair<double, double> hdi(std::span<const double> draws, double prob = kHdiProb);

/// Split R-hat over 2 * chains half-chains (no rank normalization).
/// Returns 1 when every draw is identical; never reports less than 1.
double split_rhat(const std::vector<std::vector<double>>& chains);

/// Multi-chain effective sample size with Geyer's initial monotone sequence,
/// capped at the total draw count.
double effective_sample_size(const std::vector<std::vector<double>>& chains);

/// Normalized autocorrelation for lags 0..max_lag, averaged across chains.
/// Throws std::invalid_argument ("degenerate series") on zero variance and
/// when a chain has no more than max_lag draws.
std::vector<double> autocorrelation(const std::vector<std::vector<double>>& chains,
                                    std::size_t max_lag);

/// Summary of each parameter draw set; throws std::invalid_argument
/// ("insufficient draws") below kMinSummaryDraws pooled draws.
ParameterSummary summarize_parameter(std::string name,
                                     const std::vector<std::vector<double>>& chains);

/// Summaries of all six parameters in Theta::kNames order.
std::vector<ParameterSummary> summarize(const PosteriorChains& chains);

struct RecoveryRow {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double hdi3 = 0.0;
  double hdi97 = 0.0;
  bool inside_hdi = false;
};

/// Compares a summary with the true parameters. Throws std::invalid_argument
/// if a summary row names an unknown parameter.
std::vector<RecoveryRow> recovery_report(const std::vector<ParameterSummary>& summary,
                                         const Theta& truth);

std::string summary_to_json(const std::vector<ParameterSummary>& summary);
std::string recovery_to_json(const std::vector<RecoveryRow>& rows);
std::string recovery_to_text(const std::vector<RecoveryRow>& rows);

/// Standalone SVG line plots.
std::string trace_svg(const std::string& name, const std::vector<std::vector<double>>& chains);
std::string autocorrelation_svg(const std::string& name, const std::vector<double>& rho);

}  // namespace tlab
