#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace chanimp::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kNumericalFailure = 3,
  kIoError = 4,
};

struct SweepArgs {
  std::string config_path;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string manifest_path;  // empty: no manifest
};

struct EstimateArgs {
  std::string stats_path;
  std::string config_path;  // optional; supplies [prior] and Z1/Z2
  std::string method = "map_ml_general";
  std::optional<std::string> prior_kind;
  std::optional<double> sigma_h2;
  std::optional<double> r;
  bool json = false;
};

struct BoundArgs {
  std::string config_path;  // optional
  std::size_t packets = 1;
  std::optional<double> snr_db;
  std::optional<double> sigma_h2;
  std::optional<std::string> prior_kind;
  bool json = false;
};

struct GenArgs {
  std::size_t length = 64;
  std::optional<std::size_t> split;
  std::size_t root = 1;
  std::string out_path;
};

struct SimulateArgs {
  std::string config_path;  // optional
  std::string out_path;
  std::size_t packets = 1;
  std::optional<double> snr_db;
  std::optional<double> noise_var;
  std::uint64_t seed = 1;
  std::string fidelity = "packets";
};

int cmd_sweep(const SweepArgs& args, std::ostream& out, std::ostream& err);
int cmd_estimate(const EstimateArgs& args, std::ostream& out, std::ostream& err);
int cmd_bound(const BoundArgs& args, std::ostream& out, std::ostream& err);
int cmd_gen(const GenArgs& args, std::ostream& out, std::ostream& err);
int cmd_simulate(const SimulateArgs& args, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a subcommand.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace chanimp::cli
