#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace spde_hmm {

enum ExitCode : int { exit_ok = 0, exit_failure = 1, exit_config = 2, exit_statistics = 3 };

struct RunOptions {
  std::string subcommand;
  std::string config_path;
  std::optional<std::string> out_dir;
  int threads = 1;
  std::optional<std::uint64_t> seed;
  /// Value of SPDE_HMM_SEED; the CLI fills it from the environment.
  std::optional<std::string> seed_env;
};

/// simulate, invariant-check, rate-strong, rate-weak, hmm-sweep, poisson-check, mixing-sums
const std::vector<std::string>& subcommands();

/// Loads the config, runs one subcommand and writes its artifacts. Failures
/// are reported as a JSON record on `err` and in <out>/error.json.
int run(const RunOptions& options, std::ostream& out, std::ostream& err);

}  // namespace spde_hmm
