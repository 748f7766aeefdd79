#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tendency_lab/datagen.hpp"
#include "tendency_lab/decision_model.hpp"
#include "tendency_lab/posterior.hpp"
#include "tendency_lab/sampler.hpp"

namespace tlab {

inline constexpr const char* kToolName = "tendency_lab";
inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes of every command.
enum ExitCode : int {
  kExitOk = 0,
  kExitNotDisjoint = 1,  ///< recover: the two w2 intervals overlap
  kExitConfig = 2,
  kExitInput = 3,
  kExitRuntime = 4,
};

struct RunPaths {
  std::string dataset = "data.jsonl";
  std::string chains = "chains.csv";
  std::string out_dir = "recovery";
};

/// Everything needed to reproduce a run.
struct RunConfig {
  GeneratorConfig generator;
  /// Preset name, or empty when `theta_truth` holds explicit values.
  std::string truth_preset = "rock_agnostic";
  Theta theta_truth = presets::rock_agnostic();
  PriorSpec prior;
  SamplerConfig sampler;
  RunPaths paths;

  /// Throws ConfigError with the path of the first invalid field.
  void validate() const;
};

/// Overlays the fields present in `j` onto `base`. A JSON document with
/// top-level "tool" and "config" keys (a run metadata file) is read through
/// its "config" member. Throws ConfigError naming the offending field.
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::ordered_json run_config_to_json(const RunConfig& config);

nlohmann::ordered_json theta_to_json(const Theta& theta);
/// Throws ConfigError("<path>.<field>: ...") on missing or non-numeric fields.
Theta theta_from_json(const nlohmann::json& j, const std::string& path = "theta");

/// Entry point shared by the executable and the tests. `args` excludes the
/// program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tlab
