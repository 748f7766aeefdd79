#include "tendency_lab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "tendency_lab/io_util.hpp"

namespace tlab {

namespace {

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Sample variance (n - 1 denominator).
double variance_of(std::span<const double> x) {
  const double m = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return x.size() > 1 ? ss / static_cast<double>(x.size() - 1) : 0.0;
}

// Biased autocovariance at `lag` (1/n normalization).
double autocovariance(std::span<const double> x, double mean, std::size_t lag) {
  double s = 0.0;
  for (std::size_t i = 0; i + lag < x.size(); ++i) s += (x[i] - mean) * (x[i + lag] - mean);
  return s / static_cast<double>(x.size());
}

std::size_t common_length(const std::vector<std::vector<double>>& chains) {
  if (chains.empty()) throw std::invalid_argument("no chains");
  const std::size_t n = chains.front().size();
  for (const auto& c : chains) {
    if (c.size() != n) throw std::invalid_argument("chains differ in length");
  }
  return n;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

}  // namespace

std::pair<double, double> hdi(std::span<const double> draws, double prob) {
  if (draws.empty()) throw std::invalid_argument("hdi of an empty sample");
  if (!(prob > 0.0 && prob <= 1.0)) throw std::invalid_argument("hdi probability must lie in (0,1]");
  std::vector<double> x(draws.begin(), draws.end());
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  const auto k = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(prob * static_cast<double>(n) - 1e-9)), 1, n);
  std::size_t best = 0;
  double best_width = x[k - 1] - x[0];
  for (std::size_t i = 1; i + k <= n; ++i) {
    const double w = x[i + k - 1] - x[i];
    if (w < best_width) {
      best_width = w;
      best = i;
    }
  }
  return {x[best], x[best + k - 1]};
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
  const std::size_t n = common_length(chains);
  const std::size_t half = n / 2;
  if (half < 2) throw std::invalid_argument("split R-hat needs at least 4 draws per chain");
  std::vector<double> means;
  std::vector<double> vars;
  for (const auto& c : chains) {
    const std::span<const double> all(c);
    for (auto part : {all.first(half), all.last(half)}) {
      means.push_back(mean_of(part));
      vars.push_back(variance_of(part));
    }
  }
  const double h = static_cast<double>(half);
  const double w = mean_of(vars);
  const double b = h * variance_of(means);
  if (w == 0.0) return b == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  const double var_plus = (h - 1.0) / h * w + b / h;
  // Below 1 only by sampling noise when the halves agree; report 1.
  return std::max(1.0, std::sqrt(var_plus / w));
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
  const std::size_t n = common_length(chains);
  const std::size_t m = chains.size();
  const double total = static_cast<double>(n * m);
  if (n < 4) throw std::invalid_argument("ESS needs at least 4 draws per chain");

  std::vector<double> chain_mean(m);
  std::vector<double> chain_var(m);
  for (std::size_t c = 0; c < m; ++c) {
    chain_mean[c] = mean_of(chains[c]);
    chain_var[c] = variance_of(chains[c]);
  }
  const double mean_var = mean_of(chain_var);
  double var_plus = mean_var * (static_cast<double>(n) - 1.0) / static_cast<double>(n);
  if (m > 1) var_plus += variance_of(chain_mean);
  if (var_plus <= 0.0) return total;

  auto mean_acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t c = 0; c < m; ++c) s += autocovariance(chains[c], chain_mean[c], lag);
    return s / static_cast<double>(m);
  };
  auto rho_at = [&](std::size_t lag) { return 1.0 - (mean_var - mean_acov(lag)) / var_plus; };

  std::vector<double> rho(n + 2, 0.0);
  rho[0] = 1.0;
  double rho_even = 1.0;
  double rho_odd = rho_at(1);
  rho[1] = rho_odd;

  std::size_t t = 1;
  while (t + 3 < n && rho_even + rho_odd > 0.0) {
    rho_even = rho_at(t + 1);
    rho_odd = rho_at(t + 2);
    if (rho_even + rho_odd >= 0.0) {
      rho[t + 1] = rho_even;
      rho[t + 2] = rho_odd;
    }
    t += 2;
  }
  const std::size_t max_t = t >= 3 ? t - 2 : 0;

  // Initial monotone sequence: pair sums may not increase.
  for (std::size_t s = 1; s + 2 <= max_t; s += 2) {
    if (rho[s + 1] + rho[s + 2] > rho[s - 1] + rho[s]) {
      rho[s + 1] = 0.5 * (rho[s - 1] + rho[s]);
      rho[s + 2] = rho[s + 1];
    }
  }

  double tau = -1.0;
  for (std::size_t s = 0; s <= max_t; ++s) tau += 2.0 * rho[s];
  tau += std::max(0.0, rho[max_t + 1]);
  tau = std::max(tau, 1.0 / std::log10(total));
  return std::min(total / tau, total);
}

std::vector<double> autocorrelation(const std::vector<std::vector<double>>& chains,
                                    std::size_t max_lag) {
  const std::size_t n = common_length(chains);
  if (n <= max_lag) throw std::invalid_argument("autocorrelation needs more draws than max_lag");
  std::vector<double> out(max_lag + 1, 0.0);
  for (const auto& c : chains) {
    const double mu = mean_of(c);
    const double c0 = autocovariance(c, mu, 0);
    if (!(c0 > 0.0)) throw std::invalid_argument("degenerate series");
    for (std::size_t k = 0; k <= max_lag; ++k) out[k] += autocovariance(c, mu, k) / c0;
  }
  for (double& v : out) v /= static_cast<double>(chains.size());
  return out;
}

ParameterSummary summarize_parameter(std::string name,
                                     const std::vector<std::vector<double>>& chains) {
  common_length(chains);
  std::vector<double> pooled;
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  if (pooled.size() < kMinSummaryDraws) throw std::invalid_argument("insufficient draws");

  ParameterSummary s;
  s.name = std::move(name);
  s.mean = mean_of(pooled);
  s.sd = std::sqrt(variance_of(pooled));
  std::tie(s.hdi3, s.hdi97) = hdi(pooled);
  s.ess = effective_sample_size(chains);
  s.rhat = split_rhat(chains);
  return s;
}

std::vector<ParameterSummary> summarize(const PosteriorChains& chains) {
  std::vector<ParameterSummary> out;
  for (std::size_t p = 0; p < Theta::kSize; ++p) {
    out.push_back(summarize_parameter(std::string(Theta::kNames[p]), chains.parameter(p)));
  }
  return out;
}

std::vector<RecoveryRow> recovery_report(const std::vector<ParameterSummary>& summary,
                                         const Theta& truth) {
  const auto values = truth.as_array();
  std::vector<RecoveryRow> rows;
  for (const auto& s : summary) {
    const auto it = std::find(Theta::kNames.begin(), Theta::kNames.end(), s.name);
    if (it == Theta::kNames.end()) throw std::invalid_argument("unknown parameter " + s.name);
    RecoveryRow r;
    r.name = s.name;
    r.truth = values[static_cast<std::size_t>(it - Theta::kNames.begin())];
    r.mean = s.mean;
    r.bias = s.mean - r.truth;
    r.hdi3 = s.hdi3;
    r.hdi97 = s.hdi97;
    r.inside_hdi = r.truth >= s.hdi3 && r.truth <= s.hdi97;
    rows.push_back(r);
  }
  return rows;
}

std::string summary_to_json(const std::vector<ParameterSummary>& summary) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& s : summary) {
    nlohmann::ordered_json j;
    j["name"] = s.name;
    j["mean"] = s.mean;
    j["sd"] = s.sd;
    j["hdi3"] = s.hdi3;
    j["hdi97"] = s.hdi97;
    j["ess"] = s.ess;
    j["rhat"] = s.rhat;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::string recovery_to_json(const std::vector<RecoveryRow>& rows) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["name"] = r.name;
    j["truth"] = r.truth;
    j["mean"] = r.mean;
    j["bias"] = r.bias;
    j["hdi3"] = r.hdi3;
    j["hdi97"] = r.hdi97;
    j["inside_hdi"] = r.inside_hdi;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::string recovery_to_text(const std::vector<RecoveryRow>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %10s %10s %10s %10s %10s  %s\n", "param", "truth", "mean",
                "bias", "hdi3%", "hdi97%", "inside");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-8s %10.4f %10.4f %10.4f %10.4f %10.4f  %s\n",
                  r.name.c_str(), r.truth, r.mean, r.bias, r.hdi3, r.hdi97,
                  r.inside_hdi ? "yes" : "no");
    out << line;
  }
  return out.str();
}

namespace {

constexpr double kSvgWidth = 800.0;
constexpr double kSvgHeight = 300.0;
constexpr double kMargin = 50.0;

std::string polyline(std::span<const double> ys, double x_max, double y_min, double y_max,
                     const char* color) {
  std::ostringstream out;
  out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1\" points=\"";
  const double span_y = y_max > y_min ? y_max - y_min : 1.0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const double x = kMargin + (kSvgWidth - 2 * kMargin) * (x_max > 0 ? i / x_max : 0.0);
    const double y = kSvgHeight - kMargin - (kSvgHeight - 2 * kMargin) * (ys[i] - y_min) / span_y;
    out << format_double(x) << ',' << format_double(y) << ' ';
  }
  out << "\"/>\n";
  return out.str();
}

std::string svg_frame(const std::string& title, double y_min, double y_max, const std::string& body) {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSvgWidth << "\" height=\""
      << kSvgHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kMargin << "\" y=\"30\" font-size=\"16\">" << title << "</text>\n";
  out << "<text x=\"5\" y=\"" << kMargin << "\" font-size=\"11\">" << fmt("%.4g", y_max)
      << "</text>\n";
  out << "<text x=\"5\" y=\"" << kSvgHeight - kMargin << "\" font-size=\"11\">"
      << fmt("%.4g", y_min) << "</text>\n";
  out << body << "</svg>\n";
  return out.str();
}

}  // namespace

std::string trace_svg(const std::string& name, const std::vector<std::vector<double>>& chains) {
  static constexpr const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  std::size_t n = 0;
  for (const auto& c : chains) {
    for (double v : c) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    n = std::max(n, c.size());
  }
  std::string body;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    body += polyline(chains[c], n > 1 ? static_cast<double>(n - 1) : 1.0, lo, hi, kColors[c % 4]);
  }
  return svg_frame("trace of " + name, lo, hi, body);
}

std::string autocorrelation_svg(const std::string& name, const std::vector<double>& rho) {
  const double lo = std::min(0.0, *std::min_element(rho.begin(), rho.end()));
  const double x_max = rho.size() > 1 ? static_cast<double>(rho.size() - 1) : 1.0;
  const std::vector<double> zero(rho.size(), 0.0);
  std::string body = polyline(zero, x_max, lo, 1.0, "#999999");
  body += polyline(rho, x_max, lo, 1.0, "#1f77b4");
  return svg_frame("autocorrelation of " + name, lo, 1.0, body);
}

}  // namespace tlab
