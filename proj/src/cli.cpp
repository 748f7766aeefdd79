#include "tendency_lab/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tendency_lab/diagnostics.hpp"
#include "tendency_lab/errors.hpp"
#include "tendency_lab/io_util.hpp"

namespace tlab {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

// ---------------------------------------------------------------------------
// JSON <-> config

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || item.key() == k;
    if (!known) throw ConfigError(path + "." + item.key() + ": unknown field");
  }
}

template <class T>
void read_field(const json& j, const char* key, T& dst, const std::string& path) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

template <class Range, class T>
void read_range(const json& j, const char* key, Range& dst, const std::string& path) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ConfigError(path + "." + key + ": expected [lo, hi]");
  }
  dst.lo = v[0].get<T>();
  dst.hi = v[1].get<T>();
}

std::string mode_name(GeneratorMode m) { return m == GeneratorMode::MapBased ? "map" : "direct"; }

GeneratorMode mode_from_name(const std::string& s) {
  if (s == "direct") return GeneratorMode::DirectFeatures;
  if (s == "map") return GeneratorMode::MapBased;
  throw ConfigError("generator.mode: expected \"direct\" or \"map\"");
}

std::string scheme_name(CountScheme c) {
  return c == CountScheme::PerDirection ? "per_direction" : "global_total";
}

CountScheme scheme_from_name(const std::string& s) {
  if (s == "global_total") return CountScheme::GlobalTotal;
  if (s == "per_direction") return CountScheme::PerDirection;
  throw ConfigError("generator.count_scheme: expected \"global_total\" or \"per_direction\"");
}

void read_generator(const json& j, GeneratorConfig& g) {
  const std::string path = "generator";
  reject_unknown(j, {"n", "seed", "mode", "count_scheme", "gold_counts", "rock_counts", "distance",
                     "obstacle_prob", "map"},
                 path);
  read_field(j, "n", g.n, path);
  read_field(j, "seed", g.seed, path);
  if (j.contains("mode")) {
    std::string m;
    read_field(j, "mode", m, path);
    g.mode = mode_from_name(m);
  }
  if (j.contains("count_scheme")) {
    std::string s;
    read_field(j, "count_scheme", s, path);
    g.count_scheme = scheme_from_name(s);
  }
  read_range<IntRange, int>(j, "gold_counts", g.gold_counts, path);
  read_range<IntRange, int>(j, "rock_counts", g.rock_counts, path);
  read_range<RealRange, double>(j, "distance", g.distance, path);
  read_field(j, "obstacle_prob", g.obstacle_prob, path);
  if (j.contains("map")) {
    const auto& m = j.at("map");
    const std::string mp = path + ".map";
    reject_unknown(m, {"width", "height", "radius", "density"}, mp);
    read_field(m, "width", g.map.width, mp);
    read_field(m, "height", g.map.height, mp);
    read_field(m, "radius", g.map.radius, mp);
    if (m.contains("density")) {
      const auto& d = m.at("density");
      const std::string dp = mp + ".density";
      reject_unknown(d, {"road", "rock", "gold", "obstacle"}, dp);
      read_field(d, "road", g.map.density.road, dp);
      read_field(d, "rock", g.map.density.rock, dp);
      read_field(d, "gold", g.map.density.gold, dp);
      read_field(d, "obstacle", g.map.density.obstacle, dp);
    }
  }
}

ordered_json generator_to_json(const GeneratorConfig& g) {
  ordered_json j;
  j["n"] = g.n;
  j["seed"] = g.seed;
  j["mode"] = mode_name(g.mode);
  j["count_scheme"] = scheme_name(g.count_scheme);
  j["gold_counts"] = {g.gold_counts.lo, g.gold_counts.hi};
  j["rock_counts"] = {g.rock_counts.lo, g.rock_counts.hi};
  j["distance"] = {g.distance.lo, g.distance.hi};
  j["obstacle_prob"] = g.obstacle_prob;
  ordered_json density;
  density["road"] = g.map.density.road;
  density["rock"] = g.map.density.rock;
  density["gold"] = g.map.density.gold;
  density["obstacle"] = g.map.density.obstacle;
  ordered_json map;
  map["width"] = g.map.width;
  map["height"] = g.map.height;
  map["radius"] = g.map.radius;
  map["density"] = density;
  j["map"] = map;
  return j;
}

void read_prior(const json& j, PriorSpec& p) {
  const std::string path = "prior";
  reject_unknown(j, {"w_min", "w_max", "delta_mean", "delta_sd"}, path);
  read_field(j, "w_min", p.w_min, path);
  read_field(j, "w_max", p.w_max, path);
  read_field(j, "delta_mean", p.delta_mean, path);
  read_field(j, "delta_sd", p.delta_sd, path);
}

ordered_json prior_to_json(const PriorSpec& p) {
  ordered_json j;
  j["w_min"] = p.w_min;
  j["w_max"] = p.w_max;
  j["delta_mean"] = p.delta_mean;
  j["delta_sd"] = p.delta_sd;
  return j;
}

void read_sampler(const json& j, SamplerConfig& s) {
  const std::string path = "sampler";
  reject_unknown(j, {"chains", "iterations", "burn_in", "target_accept", "max_tree_depth", "seed",
                     "algorithm", "metric", "threads"},
                 path);
  read_field(j, "chains", s.chains, path);
  read_field(j, "iterations", s.iterations, path);
  read_field(j, "burn_in", s.burn_in, path);
  read_field(j, "target_accept", s.target_accept, path);
  read_field(j, "max_tree_depth", s.max_tree_depth, path);
  read_field(j, "seed", s.seed, path);
  read_field(j, "threads", s.threads, path);
  if (j.contains("algorithm")) {
    std::string a;
    read_field(j, "algorithm", a, path);
    s.algorithm = algorithm_from_name(a);
  }
  if (j.contains("metric")) {
    std::string m;
    read_field(j, "metric", m, path);
    s.metric = metric_from_name(m);
  }
}

ordered_json sampler_to_json(const SamplerConfig& s) {
  ordered_json j;
  j["chains"] = s.chains;
  j["iterations"] = s.iterations;
  j["burn_in"] = s.burn_in;
  j["target_accept"] = s.target_accept;
  j["max_tree_depth"] = s.max_tree_depth;
  j["seed"] = s.seed;
  j["algorithm"] = std::string(algorithm_name(s.algorithm));
  j["metric"] = std::string(metric_name(s.metric));
  j["threads"] = s.threads;
  return j;
}

// ---------------------------------------------------------------------------
// Command plumbing

struct GlobalFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::string out;
  bool quiet = false;
  bool dry_run = false;
};

struct Io {
  std::ostream& out;
  std::ostream& err;
  bool quiet;
  void info(const std::string& msg) const {
    if (!quiet) out << msg << '\n';
  }
};

RunConfig load_base_config(const GlobalFlags& g) {
  RunConfig cfg;
  if (!g.config_path.empty()) {
    json j;
    try {
      j = json::parse(read_file(g.config_path));
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    } catch (const InputError& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    cfg = run_config_from_json(j, cfg);
  }
  return cfg;
}

Theta resolve_truth(const std::string& spec, std::string& preset_out) {
  if (auto t = presets::find(spec)) {
    preset_out = spec;
    return *t;
  }
  json j;
  try {
    j = json::parse(read_file(spec));
  } catch (const json::exception& e) {
    throw ConfigError("theta: invalid JSON in " + spec + ": " + e.what());
  } catch (const InputError&) {
    throw ConfigError("theta: '" + spec + "' is neither a preset nor a readable file");
  }
  preset_out.clear();
  return theta_from_json(j);
}

int effective_threads(const SamplerConfig& s) {
  int threads = s.threads > 0 ? s.threads : s.chains;
  if (const char* env = std::getenv("TENDENCY_LAB_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap > 0) threads = std::min(threads, cap);
    } catch (const std::exception&) {
      throw ConfigError("TENDENCY_LAB_THREADS: expected a positive integer");
    }
  }
  return threads;
}

std::string config_hash(const RunConfig& cfg) { return fnv1a_hex(run_config_to_json(cfg).dump()); }

ordered_json metadata_header(const std::string& command, const RunConfig& cfg,
                             const std::string& replay) {
  ordered_json m;
  m["tool"] = kToolName;
  m["version"] = kToolVersion;
  m["command"] = command;
  m["config_hash"] = config_hash(cfg);
  m["replay"] = replay;
  return m;
}

std::string meta_path(const std::string& path) { return path + ".meta.json"; }

std::string fmt_seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f s", s);
  return buf;
}

struct SimulateResult {
  std::size_t records = 0;
  double move_rate = 0.0;
};

SimulateResult do_simulate(const RunConfig& cfg, const std::string& out_path) {
  const Dataset data = generate_dataset(cfg.theta_truth, cfg.generator);
  std::ostringstream body;
  write_dataset(data, body);
  atomic_write(out_path, body.str());

  SimulateResult res;
  res.records = data.size();
  std::size_t moves = 0;
  for (const auto& r : data) moves += r.decision.move ? 1 : 0;
  res.move_rate = static_cast<double>(moves) / static_cast<double>(data.size());

  RunConfig replay_cfg = cfg;
  replay_cfg.paths.dataset = out_path;
  ordered_json meta = metadata_header(
      "simulate", replay_cfg,
      std::string(kToolName) + " simulate --config " + meta_path(out_path));
  meta["seed"] = cfg.generator.seed;
  meta["preset"] = cfg.truth_preset.empty() ? ordered_json(nullptr) : ordered_json(cfg.truth_preset);
  meta["theta_truth"] = theta_to_json(cfg.theta_truth);
  meta["records"] = res.records;
  meta["move_rate"] = res.move_rate;
  meta["config"] = run_config_to_json(replay_cfg);
  atomic_write(meta_path(out_path), meta.dump(2) + "\n");
  return res;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset " + path);
  Dataset data = read_dataset(in);
  if (data.empty()) throw InputError(path + ": dataset has no records");
  return data;
}

PosteriorChains do_infer(const RunConfig& cfg, const std::string& data_path,
                         const std::string& out_path, const Io& io) {
  const Dataset data = load_dataset(data_path);
  SamplerConfig sampler = cfg.sampler;
  sampler.threads = effective_threads(sampler);

  const auto start = std::chrono::steady_clock::now();
  PosteriorChains chains = run_inference(data, cfg.prior, sampler);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::ostringstream csv;
  write_chains_csv(chains, csv);
  atomic_write(out_path, csv.str());

  RunConfig replay_cfg = cfg;
  replay_cfg.paths.dataset = data_path;
  replay_cfg.paths.chains = out_path;
  ordered_json meta = metadata_header(
      "infer", replay_cfg, std::string(kToolName) + " infer --config " + meta_path(out_path));
  meta["dataset"] = data_path;
  meta["dataset_hash"] = fnv1a_hex(read_file(data_path));
  meta["records"] = data.size();
  meta["draws_per_chain"] = chains.draws_per_chain();
  auto stats = ordered_json::array();
  std::size_t divergences = 0;
  for (std::size_t c = 0; c < chains.chains.size(); ++c) {
    const ChainStats& s = chains.chains[c].stats;
    divergences += s.divergences;
    ordered_json js;
    js["chain"] = c;
    js["step_size"] = s.step_size;
    auto rows = ordered_json::array();
    for (Eigen::Index r = 0; r < s.inv_metric.rows(); ++r) {
      auto row = ordered_json::array();
      for (Eigen::Index k = 0; k < s.inv_metric.cols(); ++k) row.push_back(s.inv_metric(r, k));
      rows.push_back(std::move(row));
    }
    js["inv_metric"] = std::move(rows);
    js["divergences"] = s.divergences;
    js["boundary_hits"] = s.boundary_hits;
    js["max_depth_hits"] = s.max_depth_hits;
    js["leapfrog_steps"] = s.leapfrog_steps;
    js["mean_accept_stat"] = s.mean_accept_stat;
    stats.push_back(std::move(js));
  }
  meta["divergences"] = divergences;
  meta["chains"] = std::move(stats);
  meta["config"] = run_config_to_json(replay_cfg);
  atomic_write(meta_path(out_path), meta.dump(2) + "\n");

  // Wall time is kept apart so the files above stay byte-reproducible.
  ordered_json timing;
  timing["wall_seconds"] = wall;
  atomic_write(out_path + ".timing.json", timing.dump(2) + "\n");

  io.info("wrote " + std::to_string(chains.total_draws()) + " draws to " + out_path + " (" +
          std::to_string(divergences) + " divergences, " + fmt_seconds(wall) + ")");
  return chains;
}


struct DiagnoseOptions {
  std::optional<Theta> truth;
  bool svg = false;
  std::size_t max_lag = 100;
};

struct DiagnoseResult {
  std::vector<ParameterSummary> summary;
  std::vector<RecoveryRow> recovery;
};

DiagnoseResult do_diagnose(const PosteriorChains& chains, const std::string& out_dir,
                           const DiagnoseOptions& opts, const Io& io) {
  DiagnoseResult res;
  res.summary = summarize(chains);
  for (const auto& s : res.summary) {
    if (s.sd == 0.0) io.err << "warning: " << s.name << " is constant across all draws (sd 0)\n";
  }
  const fs::path dir(out_dir);
  atomic_write(dir / "summary.json", summary_to_json(res.summary));
  if (opts.truth) {
    res.recovery = recovery_report(res.summary, *opts.truth);
    atomic_write(dir / "recovery.json", recovery_to_json(res.recovery));
    atomic_write(dir / "recovery.txt", recovery_to_text(res.recovery));
  }
  if (opts.svg) {
    for (std::size_t p = 0; p < Theta::kSize; ++p) {
      const std::string name(Theta::kNames[p]);
      const auto draws = chains.parameter(p);
      atomic_write(dir / ("trace_" + name + ".svg"), trace_svg(name, draws));
      if (res.summary[p].sd == 0.0) continue;
      const std::size_t lag = std::min(opts.max_lag, chains.draws_per_chain() - 1);
      atomic_write(dir / ("acf_" + name + ".svg"), autocorrelation_svg(name, autocorrelation(draws, lag)));
    }
  }
  return res;
}

PosteriorChains load_chains(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open chains file " + path);
  return read_chains_csv(in);
}

int do_recover(const RunConfig& cfg, const std::string& out_dir, bool svg, const Io& io) {
  const fs::path dir(out_dir);
  const std::vector<std::string> names = presets::names();
  std::vector<std::pair<double, double>> w2_hdis;
  ordered_json comparison;
  auto runs = ordered_json::array();

  for (std::size_t k = 0; k < names.size(); ++k) {
    RunConfig run = cfg;
    run.truth_preset = names[k];
    run.theta_truth = *presets::find(names[k]);
    run.generator.seed = cfg.generator.seed + k;
    run.sampler.seed = cfg.sampler.seed + k;
    const fs::path sub = dir / names[k];
    const std::string data_path = (sub / "data.jsonl").string();
    const std::string chains_path = (sub / "chains.csv").string();

    io.info("[" + names[k] + "] simulating " + std::to_string(run.generator.n) + " decisions");
    const SimulateResult sim = do_simulate(run, data_path);
    io.info("[" + names[k] + "] move rate " + format_double(sim.move_rate) + "; sampling");
    const PosteriorChains chains = do_infer(run, data_path, chains_path, io);
    DiagnoseOptions opts;
    opts.truth = run.theta_truth;
    opts.svg = svg;
    const DiagnoseResult diag = do_diagnose(chains, sub.string(), opts, io);
    io.info(recovery_to_text(diag.recovery));

    const auto& w2 = diag.summary[1];
    w2_hdis.emplace_back(w2.hdi3, w2.hdi97);
    ordered_json r;
    r["preset"] = names[k];
    r["w2_mean"] = w2.mean;
    r["w2_hdi"] = {w2.hdi3, w2.hdi97};
    runs.push_back(std::move(r));
  }

  const bool disjoint =
      w2_hdis[0].second < w2_hdis[1].first || w2_hdis[1].second < w2_hdis[0].first;
  comparison["runs"] = runs;
  comparison["w2_hdis_disjoint"] = disjoint;
  atomic_write(dir / "comparison.json", comparison.dump(2) + "\n");

  std::ostringstream text;
  text << "w2 94% HDI " << names[0] << ": [" << format_double(w2_hdis[0].first) << ", "
       << format_double(w2_hdis[0].second) << "]\n";
  text << "w2 94% HDI " << names[1] << ": [" << format_double(w2_hdis[1].first) << ", "
       << format_double(w2_hdis[1].second) << "]\n";
  text << (disjoint ? "disjoint: the rock weight separates the two tendencies\n"
                    : "overlapping: the data do not separate the two tendencies\n");
  atomic_write(dir / "comparison.txt", text.str());

  const std::string run_json = (dir / "run.json").string();
  ordered_json meta = metadata_header("recover", cfg,
                                      std::string(kToolName) + " recover --config " + run_json +
                                          " --out " + out_dir);
  meta["config"] = run_config_to_json(cfg);
  atomic_write(run_json, meta.dump(2) + "\n");

  if (disjoint) {
    io.info(text.str());
    return kExitOk;
  }
  io.err << text.str();
  return kExitNotDisjoint;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitConfig;
  if (dynamic_cast<const InputError*>(&e)) return kExitInput;
  return kExitRuntime;
}

}  // namespace

void RunConfig::validate() const {
  generator.validate();
  theta_truth.validate();
  prior.validate();
  sampler.validate();
}

ordered_json theta_to_json(const Theta& theta) {
  ordered_json j;
  const auto v = theta.as_array();
  for (std::size_t i = 0; i < Theta::kSize; ++i) j[std::string(Theta::kNames[i])] = v[i];
  return j;
}

Theta theta_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  std::array<double, Theta::kSize> v{};
  for (std::size_t i = 0; i < Theta::kSize; ++i) {
    const std::string key(Theta::kNames[i]);
    if (!j.contains(key)) throw ConfigError(path + "." + key + ": missing");
    if (!j.at(key).is_number()) throw ConfigError(path + "." + key + ": expected a number");
    v[i] = j.at(key).get<double>();
  }
  for (const auto& item : j.items()) {
    if (std::find(Theta::kNames.begin(), Theta::kNames.end(), item.key()) == Theta::kNames.end()) {
      throw ConfigError(path + "." + item.key() + ": unknown field");
    }
  }
  return Theta::from_array(v);
}

RunConfig run_config_from_json(const json& j_in, RunConfig base) {
  const json& j = (j_in.is_object() && j_in.contains("tool") && j_in.contains("config"))
                      ? j_in.at("config")
                      : j_in;
  reject_unknown(j, {"generator", "theta_truth", "prior", "sampler", "paths"}, "config");
  if (j.contains("generator")) read_generator(j.at("generator"), base.generator);
  if (j.contains("theta_truth")) {
    const auto& t = j.at("theta_truth");
    if (t.is_string()) {
      const auto name = t.get<std::string>();
      const auto preset = presets::find(name);
      if (!preset) throw ConfigError("theta_truth: unknown preset '" + name + "'");
      base.truth_preset = name;
      base.theta_truth = *preset;
    } else {
      base.theta_truth = theta_from_json(t, "theta_truth");
      base.truth_preset.clear();
    }
  }
  if (j.contains("prior")) read_prior(j.at("prior"), base.prior);
  if (j.contains("sampler")) read_sampler(j.at("sampler"), base.sampler);
  if (j.contains("paths")) {
    const auto& p = j.at("paths");
    reject_unknown(p, {"dataset", "chains", "out_dir"}, "paths");
    read_field(p, "dataset", base.paths.dataset, "paths");
    read_field(p, "chains", base.paths.chains, "paths");
    read_field(p, "out_dir", base.paths.out_dir, "paths");
  }
  return base;
}

ordered_json run_config_to_json(const RunConfig& cfg) {
  ordered_json j;
  j["generator"] = generator_to_json(cfg.generator);
  j["theta_truth"] =
      cfg.truth_preset.empty() ? theta_to_json(cfg.theta_truth) : ordered_json(cfg.truth_preset);
  j["prior"] = prior_to_json(cfg.prior);
  j["sampler"] = sampler_to_json(cfg.sampler);
  ordered_json paths;
  paths["dataset"] = cfg.paths.dataset;
  paths["chains"] = cfg.paths.chains;
  paths["out_dir"] = cfg.paths.out_dir;
  j["paths"] = paths;
  return j;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulate player movement decisions and recover behaviour tendencies by MCMC",
               kToolName};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  app.add_option("--config", g.config_path, "Run configuration JSON (or a run metadata file)");
  g.seed_opt = app.add_option("--seed", g.seed, "Seed for data generation and sampling");
  app.add_option("--out", g.out, "Output file (simulate, infer) or directory (diagnose, recover)");
  app.add_flag("--quiet", g.quiet, "Suppress progress messages");
  app.add_flag("--dry-run", g.dry_run, "Print the resolved configuration and exit");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic decision dataset");
  std::string sim_preset, sim_theta, sim_mode, sim_scheme;
  std::int64_t sim_n = 0;
  auto* sim_preset_opt = sim->add_option("--preset", sim_preset, "Built-in tendency preset");
  auto* sim_theta_opt = sim->add_option("--theta", sim_theta, "Theta JSON file");
  auto* sim_n_opt = sim->add_option("--n", sim_n, "Number of decisions");
  auto* sim_mode_opt = sim->add_option("--mode", sim_mode, "direct | map");
  auto* sim_scheme_opt = sim->add_option("--count-scheme", sim_scheme, "global_total | per_direction");
  sim_preset_opt->excludes(sim_theta_opt);

  // infer
  auto* inf = app.add_subcommand("infer", "Sample the posterior of a dataset");
  std::string inf_data, inf_algo, inf_metric;
  int inf_chains = 0, inf_iters = 0, inf_burn = 0, inf_depth = 0, inf_threads = 0;
  double inf_accept = 0.0;
  auto* inf_data_opt = inf->add_option("dataset,--data", inf_data, "Dataset (JSON lines)");
  auto* inf_chains_opt = inf->add_option("--chains", inf_chains, "Number of chains");
  auto* inf_iters_opt = inf->add_option("--iters", inf_iters, "Iterations per chain, burn-in included");
  auto* inf_burn_opt = inf->add_option("--burnin", inf_burn, "Burn-in iterations");
  auto* inf_algo_opt = inf->add_option("--algorithm", inf_algo, "nuts | random_walk");
  auto* inf_metric_opt = inf->add_option("--metric", inf_metric, "dense | diag");
  auto* inf_accept_opt = inf->add_option("--target-accept", inf_accept, "Target acceptance");
  auto* inf_depth_opt = inf->add_option("--max-depth", inf_depth, "Maximum tree depth");
  auto* inf_threads_opt = inf->add_option("--threads", inf_threads, "Concurrent chains");

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "Summarize chains and compare with the truth");
  std::string diag_chains, diag_truth;
  bool diag_svg = false;
  std::size_t diag_lag = 100;
  auto* diag_chains_opt = diag->add_option("chains,--chains", diag_chains, "Chains CSV");
  diag->add_option("--truth", diag_truth, "Preset name or theta JSON file");
  diag->add_flag("--svg", diag_svg, "Write trace and autocorrelation plots");
  diag->add_option("--max-lag", diag_lag, "Largest autocorrelation lag plotted");

  // recover
  auto* rec = app.add_subcommand("recover", "Simulate, infer and diagnose both presets");
  std::int64_t rec_n = 0;
  int rec_chains = 0, rec_iters = 0, rec_burn = 0;
  bool rec_svg = false;
  auto* rec_n_opt = rec->add_option("--n", rec_n, "Decisions per preset");
  auto* rec_chains_opt = rec->add_option("--chains", rec_chains, "Number of chains");
  auto* rec_iters_opt = rec->add_option("--iters", rec_iters, "Iterations per chain");
  auto* rec_burn_opt = rec->add_option("--burnin", rec_burn, "Burn-in iterations");
  rec->add_flag("--svg", rec_svg, "Write trace and autocorrelation plots");

  // presets
  auto* pre = app.add_subcommand("presets", "List or show built-in tendency presets");
  std::string pre_action, pre_name;
  pre->add_option("action", pre_action, "show")->check(CLI::IsMember({"show"}));
  pre->add_option("name", pre_name, "Preset name");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  const Io io{out, err, g.quiet};
  try {
    if (*pre) {
      ordered_json j;
      if (!pre_name.empty()) {
        const auto t = presets::find(pre_name);
        if (!t) throw ConfigError("presets: unknown preset '" + pre_name + "'");
        j[pre_name] = theta_to_json(*t);
      } else {
        for (const auto& n : presets::names()) j[n] = theta_to_json(*presets::find(n));
      }
      out << j.dump(2) << '\n';
      return kExitOk;
    }

    RunConfig cfg = load_base_config(g);
    if (g.seed_opt->count() > 0) {
      cfg.generator.seed = g.seed;
      cfg.sampler.seed = g.seed;
    }

    if (*sim) {
      if (sim_preset_opt->count() > 0) cfg.theta_truth = resolve_truth(sim_preset, cfg.truth_preset);
      if (sim_theta_opt->count() > 0) cfg.theta_truth = resolve_truth(sim_theta, cfg.truth_preset);
      if (sim_n_opt->count() > 0) cfg.generator.n = sim_n;
      if (sim_mode_opt->count() > 0) cfg.generator.mode = mode_from_name(sim_mode);
      if (sim_scheme_opt->count() > 0) cfg.generator.count_scheme = scheme_from_name(sim_scheme);
      if (!g.out.empty()) cfg.paths.dataset = g.out;
      cfg.validate();
      if (g.dry_run) {
        out << run_config_to_json(cfg).dump(2) << '\n';
        return kExitOk;
      }
      const SimulateResult r = do_simulate(cfg, cfg.paths.dataset);
      io.info("wrote " + std::to_string(r.records) + " records to " + cfg.paths.dataset +
              " (move rate " + format_double(r.move_rate) + ")");
      return kExitOk;
    }

    if (*inf) {
      if (inf_data_opt->count() > 0) cfg.paths.dataset = inf_data;
      if (inf_chains_opt->count() > 0) cfg.sampler.chains = inf_chains;
      if (inf_iters_opt->count() > 0) cfg.sampler.iterations = inf_iters;
      if (inf_burn_opt->count() > 0) cfg.sampler.burn_in = inf_burn;
      if (inf_algo_opt->count() > 0) cfg.sampler.algorithm = algorithm_from_name(inf_algo);
      if (inf_metric_opt->count() > 0) cfg.sampler.metric = metric_from_name(inf_metric);
      if (inf_accept_opt->count() > 0) cfg.sampler.target_accept = inf_accept;
      if (inf_depth_opt->count() > 0) cfg.sampler.max_tree_depth = inf_depth;
      if (inf_threads_opt->count() > 0) cfg.sampler.threads = inf_threads;
      if (!g.out.empty()) cfg.paths.chains = g.out;
      cfg.validate();
      if (g.dry_run) {
        out << run_config_to_json(cfg).dump(2) << '\n';
        return kExitOk;
      }
      do_infer(cfg, cfg.paths.dataset, cfg.paths.chains, io);
      return kExitOk;
    }

    if (*diag) {
      if (diag_chains_opt->count() > 0) cfg.paths.chains = diag_chains;
      DiagnoseOptions opts;
      opts.svg = diag_svg;
      opts.max_lag = diag_lag;
      if (!diag_truth.empty()) {
        std::string ignored;
        opts.truth = resolve_truth(diag_truth, ignored);
      }
      const std::string out_dir = g.out.empty() ? std::string("diagnostics") : g.out;
      if (g.dry_run) {
        out << run_config_to_json(cfg).dump(2) << '\n';
        return kExitOk;
      }
      const PosteriorChains chains = load_chains(cfg.paths.chains);
      if (chains.total_draws() < kMinSummaryDraws) {
        throw InputError(cfg.paths.chains + ": insufficient draws (need at least " +
                         std::to_string(kMinSummaryDraws) + ")");
      }
      const DiagnoseResult res = do_diagnose(chains, out_dir, opts, io);
      if (opts.truth) {
        io.info(recovery_to_text(res.recovery));
      } else {
        io.info(summary_to_json(res.summary));
      }
      return kExitOk;
    }

    if (*rec) {
      if (rec_n_opt->count() > 0) cfg.generator.n = rec_n;
      if (rec_chains_opt->count() > 0) cfg.sampler.chains = rec_chains;
      if (rec_iters_opt->count() > 0) cfg.sampler.iterations = rec_iters;
      if (rec_burn_opt->count() > 0) cfg.sampler.burn_in = rec_burn;
      if (!g.out.empty()) cfg.paths.out_dir = g.out;
      cfg.validate();
      if (g.dry_run) {
        out << run_config_to_json(cfg).dump(2) << '\n';
        return kExitOk;
      }
      return do_recover(cfg, cfg.paths.out_dir, rec_svg, io);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitConfig;
}

}  // namespace tlab
