#include "spde_hmm/runner.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"Spectral Galerkin slow-fast SPDE simulator and error studies"};
  app.set_version_flag("--version", "spde_hmm 1.0");

  spde_hmm::RunOptions options;
  std::string out_dir;
  std::uint64_t seed = 0;
  options.threads = 1;

  app.add_option("subcommand", options.subcommand, "simulate | invariant-check | rate-strong | rate-weak | hmm-sweep | poisson-check | mixing-sums")
      ->required()
      ->check(CLI::IsMember(spde_hmm::subcommands()));
  app.add_option("--config", options.config_path, "Configuration file")->required();
  auto* out_opt = app.add_option("--out", out_dir, "Output directory (overrides output.dir)");
  app.add_option("--threads", options.threads, "Worker threads for replica loops")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "Master seed (overrides SPDE_HMM_SEED and the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : spde_hmm::exit_config;
  }

  if (out_opt->count() > 0) options.out_dir = out_dir;
  if (seed_opt->count() > 0) options.seed = seed;
  if (const char* env = std::getenv("SPDE_HMM_SEED")) options.seed_env = std::string(env);

  return spde_hmm::run(options, std::cout, std::cerr);
}
