#pragma once

#include <string>
#include <string_view>

#include "chanimp/montecarlo.hpp"

namespace chanimp {

/// Parses "re+imj", "re-imj", "re", "imj" (also with i instead of j).
cdouble parse_complex(std::string_view text);

Method parse_method(std::string_view name);

/// Run configuration as read from a TOML file.
///
///   [scenario]  antenna, z1, z2 (complex ohms), T, K, zc_root, noise_var,
///               training (optional explicit symbols, overrides Zadoff-Chu)
///   [prior]     kind = iid | slow_fading | exponential | explicit,
///               sigma_H2, r, covariance (explicit only)
///   [sweep]     study = sweep | bias | correlation, snr_db, L, trials,
///               estimators, seed, fidelity = packets | stats, trim_fraction,
///               ci_level, threads, max_failure_rate, F_values (bias study)
///   [solver]    root_tolerance, max_iterations, dedupe_radius, multistart
///
/// Complex values may be written as [re, im] or as "re+imj" strings. Unknown
/// keys are rejected.
struct RunConfig {
  ReceiverScenario scenario = reference_scenario();
  PriorSpec prior;
  /// Present only when the file has a [sweep] table.
  std::optional<SweepConfig> sweep;
  SolverSettings solver;
  double max_failure_rate = 0.01;
};

RunConfig parse_run_config(std::string_view toml_text);
RunConfig load_run_config(const std::string& path);

/// Same document rendered as JSON, for run manifests.
std::string config_to_json(std::string_view toml_text);

/// TOML holding the [scenario] table with explicit training symbols.
std::string scenario_to_toml(const ReceiverScenario& scenario, std::size_t zc_root);

}  // namespace chanimp
