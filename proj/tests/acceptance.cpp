// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "support.hpp"
#include "tendency_lab/cli.hpp"
#include "tendency_lab/datagen.hpp"
#include "tendency_lab/diagnostics.hpp"

using namespace tlab;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

// Running maximum that treats a non-finite value as the worst possible.
double worse(double so_far, double value) {
  return std::isfinite(value) ? std::max(so_far, value) : std::numeric_limits<double>::infinity();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0 && code != kExitNotDisjoint) std::cerr << err.str();
  return code;
}

// Every regular file under `dir`, keyed by relative path. Wall-clock timing
// files are the only outputs allowed to vary between runs.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  if (!fs::exists(dir)) return files;
  if (fs::is_regular_file(dir)) {
    files[dir.filename().string()] = slurp(dir);
    return files;
  }
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).string();
    if (rel.ends_with(".timing.json")) continue;
    files[rel] = slurp(e.path());
  }
  return files;
}

struct RecoveryRun {
  int exit_code = -1;
  fs::path dir;
  std::map<std::string, std::map<std::string, ParameterSummary>> summary;  // preset -> name -> row
  std::map<std::string, PosteriorChains> chains;
};

RecoveryRun run_recovery(const fs::path& dir) {
  RecoveryRun r;
  r.dir = dir;
  fs::remove_all(dir);
  r.exit_code = cli({"--quiet", "--out", dir.string(), "recover"});
  for (const auto& preset : presets::names()) {
    const fs::path sub = dir / preset;
    if (!fs::exists(sub / "summary.json")) continue;
    const auto j = nlohmann::json::parse(slurp(sub / "summary.json"));
    for (const auto& row : j) {
      ParameterSummary s;
      s.name = row.at("name").get<std::string>();
      s.mean = row.at("mean").get<double>();
      s.sd = row.at("sd").get<double>();
      s.hdi3 = row.at("hdi3").get<double>();
      s.hdi97 = row.at("hdi97").get<double>();
      s.ess = row.at("ess").get<double>();
      s.rhat = row.at("rhat").get<double>();
      r.summary[preset][s.name] = s;
    }
    std::ifstream in(sub / "chains.csv");
    r.chains[preset] = read_chains_csv(in);
  }
  return r;
}

void within(Verdict& v, const std::string& label, double value, double centre, double tol) {
  v.detail << ' ' << label << '=' << value;
  v.require(std::abs(value - centre) <= tol, label + " within " + std::to_string(tol) + " of " +
                                                 std::to_string(centre));
}

void covers(Verdict& v, const ParameterSummary& s, double truth) {
  v.detail << ' ' << s.name << " hdi=[" << s.hdi3 << ", " << s.hdi97 << ']';
  v.require(s.hdi3 <= truth && truth <= s.hdi97, s.name + " HDI covers " + std::to_string(truth));
}

Verdict recovery_agnostic(const RecoveryRun& run) {
  Verdict v;
  const auto it = run.summary.find("rock_agnostic");
  if (it == run.summary.end()) {
    v.require(false, "no summary");
    return v;
  }
  const auto& s = it->second;
  within(v, "w2", s.at("w2").mean, 0.30, 0.10);
  within(v, "w1", s.at("w1").mean, 0.90, 0.15);
  covers(v, s.at("delta1"), 20.0);
  covers(v, s.at("delta2"), 60.0);
  return v;
}

Verdict recovery_averse(const RecoveryRun& run) {
  Verdict v;
  const auto it = run.summary.find("rock_averse");
  if (it == run.summary.end()) {
    v.require(false, "no summary");
    return v;
  }
  within(v, "w2", it->second.at("w2").mean, 0.80, 0.15);
  within(v, "w1", it->second.at("w1").mean, 0.95, 0.15);
  return v;
}

Verdict discrimination(const RecoveryRun& run) {
  Verdict v;
  v.detail << " exit=" << run.exit_code;
  v.require(run.exit_code == 0, "recover exits 0");
  if (run.summary.size() != 2) {
    v.require(false, "both summaries present");
    return v;
  }
  const auto& a = run.summary.at("rock_agnostic").at("w2");
  const auto& b = run.summary.at("rock_averse").at("w2");
  v.detail << " agnostic=[" << a.hdi3 << ", " << a.hdi97 << "] averse=[" << b.hdi3 << ", " << b.hdi97
           << ']';
  v.require(a.hdi97 < b.hdi3 || b.hdi97 < a.hdi3, "disjoint w2 HDIs");
  return v;
}

Verdict convergence(const RecoveryRun& run) {
  Verdict v;
  if (run.summary.size() != 2) {
    v.require(false, "both summaries present");
    return v;
  }
  double worst = 0.0;
  for (const auto& [preset, rows] : run.summary) {
    for (const char* name : {"w1", "w2", "delta1", "delta2"}) {
      const double r = rows.at(name).rhat;
      worst = worse(worst, r);
      v.require(r < 1.01, preset + " " + name + " rhat < 1.01");
    }
    const double rho50 = autocorrelation(run.chains.at(preset).parameter(0), 50).at(50);
    v.detail << ' ' << preset << " acf50(w1)=" << rho50;
    v.require(rho50 < 0.1, preset + " lag-50 autocorrelation of w1 < 0.1");
  }
  v.detail << " max rhat=" << worst;
  return v;
}

Verdict gradient() {
  Verdict v;
  double worst = 0.0;
  const PriorSpec prior;
  for (const Theta& truth : {presets::rock_agnostic(), presets::rock_averse()}) {
    GeneratorConfig g;
    g.seed = 101;
    const Dataset d = generate_dataset(truth, g);
    Rng rng = make_rng(102);
    for (int i = 0; i < 20; ++i) {
      const UnconstrainedPoint p = sample_prior(prior, rng);
      const auto grad = grad_log_posterior(p, d, prior);
      for (std::size_t k = 0; k < 6; ++k) {
        // |log p| reaches 1e5 at prior draws; 1e-4 keeps both the O(h^2)
        // truncation and the eps |log p| / h roundoff near 1e-7.
        constexpr double h = 1e-4;
        UnconstrainedPoint up = p, down = p;
        up.coords[k] += h;
        down.coords[k] -= h;
        const double fd =
            (log_posterior_unconstrained(up, d, prior) - log_posterior_unconstrained(down, d, prior)) /
            (2.0 * h);
        const double rel = std::abs(grad[k] - fd) / std::max(std::abs(fd), 1.0);
        worst = worse(worst, rel);
      }
    }
  }
  v.detail << " points=40 max relative error=" << worst;
  v.require(worst <= 1e-5, "relative error <= 1e-5");
  return v;
}

Verdict normalization() {
  Verdict v;
  Rng rng = make_rng(103);
  GeneratorConfig g;
  g.obstacle_prob = 0.5;
  double worst = 0.0;
  double blocked_mass = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Theta t = transform(sample_prior(PriorSpec{}, rng)).theta;
    const GameStateFeatures s = sample_game_state(g, rng);
    const auto probs = direction_probabilities(t, s);
    double sum = 0.0;
    for (std::size_t d = 0; d < 4; ++d) {
      if (s.dirs[d].oa) {
        blocked_mass = worse(blocked_mass, probs[d]);
      } else {
        sum += probs[d];
      }
    }
    worst = worse(worst, std::abs(sum - 1.0));
  }
  v.detail << " pairs=1000 max |sum-1|=" << worst << " max blocked p=" << blocked_mass;
  v.require(worst <= 1e-12, "sums within 1e-12");
  v.require(blocked_mass == 0.0, "blocked directions have probability 0");
  return v;
}

Verdict sampler_oracle() {
  Verdict v;
  SamplerConfig c;  // 2 chains x 10000 iterations, 2000 burn-in

  // Standard 6-D Normal.
  const testing::StdNormal normal(6);
  std::vector<ChainDraws> chains;
  for (std::size_t k = 0; k < 2; ++k) {
    chains.push_back(run_chain(normal, c, k, Eigen::VectorXd::Constant(6, 1.5)));
  }
  double worst_z = 0.0, worst_var = 0.0;
  for (Eigen::Index k = 0; k < 6; ++k) {
    std::vector<std::vector<double>> draws;
    for (const auto& ch : chains) {
      std::vector<double> x;
      for (const auto& q : ch.draws) x.push_back(q[k]);
      draws.push_back(std::move(x));
    }
    const auto s = summarize_parameter("x", draws);
    worst_z = worse(worst_z, std::abs(s.mean) / (s.sd / std::sqrt(s.ess)));
    worst_var = worse(worst_var, std::abs(s.sd * s.sd - 1.0));
  }
  v.detail << " normal: max |mean|/(sd/sqrt(ess))=" << worst_z << " max |var-1|=" << worst_var;
  v.require(worst_z <= 3.0, "means within 3 sd/sqrt(ESS)");
  v.require(worst_var <= 0.10, "variances within 10%");

  // Reduced posterior over (ln w1, ln w2) against a 200 x 200 grid.
  GeneratorConfig g;
  g.seed = 104;
  const Theta truth = presets::rock_agnostic();
  const Dataset d = generate_dataset(truth, g);
  const testing::ReducedPosterior reduced(d, truth);
  const auto [lo, hi] = testing::grid_window(reduced, PriorSpec{});
  const auto grid = testing::grid_marginals(reduced, lo, hi, 200);
  std::array<std::vector<double>, 2> draws;
  for (std::size_t k = 0; k < 2; ++k) {
    const auto ch = run_chain(reduced, c, k, Eigen::Vector2d(std::log(0.5), std::log(0.5)));
    for (const auto& q : ch.draws) {
      draws[0].push_back(q[0]);
      draws[1].push_back(q[1]);
    }
  }
  for (std::size_t axis = 0; axis < 2; ++axis) {
    const double tv = testing::tv_distance(draws[axis], grid, axis, 20);
    v.detail << " tv(" << (axis == 0 ? "w1" : "w2") << ")=" << tv;
    v.require(tv <= 0.05, "total variation <= 0.05");
  }
  return v;
}

// Runs `args` twice writing to `target`, moving the first result aside, and
// compares every output byte for byte.
bool repeat_identical(const std::vector<std::string>& args, const fs::path& target,
                      std::string& why) {
  const fs::path meta = target.string() + ".meta.json";
  auto outputs = [&] {
    auto files = snapshot(target);
    if (fs::exists(meta)) files["<meta>"] = slurp(meta);
    return files;
  };
  fs::remove_all(target);
  const int first = cli(args);
  const auto a = outputs();
  fs::remove_all(target);
  const int second = cli(args);
  const auto b = outputs();
  if (first != second) {
    why = "exit codes differ";
    return false;
  }
  if (a.empty()) {
    why = "no output";
    return false;
  }
  if (a != b) {
    for (const auto& [name, bytes] : a) {
      if (!b.contains(name) || b.at(name) != bytes) why = name + " differs";
    }
    if (why.empty()) why = "file sets differ";
    return false;
  }
  return true;
}

Verdict determinism(const RecoveryRun& run, const fs::path& work) {
  Verdict v;
  // Full recovery: rerun into the same directory and compare.
  const auto first = snapshot(run.dir);
  const RecoveryRun again = run_recovery(run.dir);
  const auto second = snapshot(run.dir);
  v.detail << " recover files=" << first.size();
  v.require(again.exit_code == run.exit_code && !first.empty() && first == second,
            "recover outputs identical");

  const fs::path dir = work / "determinism";
  fs::create_directories(dir);
  const std::string data = (dir / "d.jsonl").string();
  const std::string chains = (dir / "c.csv").string();
  struct Step {
    std::vector<std::string> args;
    fs::path target;
  };
  const std::vector<Step> steps = {
      {{"--quiet", "--seed", "5", "--out", (dir / "map.jsonl").string(), "simulate", "--n", "300",
        "--mode", "map"},
       dir / "map.jsonl"},
      {{"--quiet", "--seed", "5", "--out", data, "simulate", "--preset", "rock_averse", "--n", "800"},
       data},
      {{"--quiet", "--seed", "5", "--out", chains, "infer", data, "--iters", "1500", "--burnin", "500",
        "--chains", "3"},
       chains},
      {{"--quiet", "--out", (dir / "diag").string(), "diagnose", chains, "--truth", "rock_averse",
        "--svg"},
       dir / "diag"},
      {{"presets", "show", "rock_agnostic"}, {}},
  };
  for (const auto& step : steps) {
    if (step.target.empty()) {
      std::ostringstream o1, e1, o2, e2;
      run_cli(step.args, o1, e1);
      run_cli(step.args, o2, e2);
      v.require(o1.str() == o2.str(), "presets output identical");
      continue;
    }
    std::string why;
    const bool same = repeat_identical(step.args, step.target, why);
    v.detail << ' ' << step.target.filename().string() << '=' << (same ? "same" : why);
    v.require(same, step.target.filename().string() + " identical");
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string workdir = "acceptance_runs";
  app.add_option("--workdir", workdir, "Scratch directory for recovery runs");
  CLI11_PARSE(app, argc, argv);

  const fs::path work = fs::absolute(workdir);
  fs::create_directories(work);

  int failures = 0;
  auto report = [&](const std::string& name, const Verdict& v) {
    std::cout << (v.pass ? "PASS " : "FAIL ") << name << ':' << v.detail.str() << std::endl;
    if (!v.pass) ++failures;
  };

  const RecoveryRun run = run_recovery(work / "recover");
  report("recovery rock-agnostic", recovery_agnostic(run));
  report("recovery rock-averse", recovery_averse(run));
  report("tendency discrimination", discrimination(run));
  report("convergence", convergence(run));
  report("gradient correctness", gradient());
  report("likelihood normalization", normalization());
  report("sampler oracle", sampler_oracle());
  report("determinism", determinism(run, work));

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
