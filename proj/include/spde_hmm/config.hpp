#pragma once

// Run configuration: flat "key = value" text with dotted sections.
//
//   # comment (also after a value)
//   basis.n_modes = 32
//   slow.covariance = powerlaw(1)
//   experiment.epsilons = 0.25, 0.125, 0.0625
//
// Numbers are decimal with optional exponent; lists are comma separated;
// states are "zero" or sums of "mode(k)" / "mode(k, a)" terms.

#include "spde_hmm/errors.hpp"
#include "spde_hmm/forcing.hpp"
#include "spde_hmm/harness.hpp"
#include "spde_hmm/poisson.hpp"
#include "spde_hmm/reaction.hpp"
#include "spde_hmm/schemes.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace spde_hmm {

/// All problems found while loading, one entry per field.
class ConfigIssues : public ConfigError {
 public:
  struct Issue {
    std::string field;
    std::string message;
    int line = 0;  // 0 when the issue is not tied to a line
  };

  explicit ConfigIssues(std::vector<Issue> issues);
  const std::vector<Issue>& issues() const noexcept { return issues_; }

 private:
  std::vector<Issue> issues_;
};

/// sum of amplitude * e_k; empty means zero.
struct StateSpec {
  std::vector<std::pair<int, double>> terms;

  static StateSpec parse(const std::string& text);
  std::string to_string() const;
  SpectralField build(const BasisPtr& basis) const;

  friend bool operator==(const StateSpec&, const StateSpec&) = default;
};

struct RunConfig {
  std::uint64_t seed = 1;

  int n_modes = 32;
  int grid_points = 0;

  CovarianceKind slow{CovarianceFamily::powerlaw, 1.0, 1, 0.0};
  CovarianceKind fast{CovarianceFamily::powerlaw, 1.0, 1, 0.0};
  std::optional<double> fast_gamma_max;

  FastCoupling family = FastCoupling::cosine_y;
  SlowPart g = SlowPart::sin;
  double c = 1.0;

  StateSpec x0{{{1, 1.0}}};
  StateSpec y0{};

  Scheme scheme = Scheme::hmm;
  double epsilon = 0.1;
  double dt = 0.0625;
  double tau = 0.1;
  int M = 0;
  int Ma = 1;
  double T = 0.5;
  double delta = 0.0;
  bool regular_case = false;
  int fine_ratio = 64;

  std::vector<double> epsilons{0.25, 0.125, 0.0625, 0.03125};
  int replicas = 128;
  std::vector<int> Ma_list{4, 16, 64, 256};
  int M_factor = 2;
  ScalarMap phi = ScalarMap::cos;
  int phi_mode = 1;

  double mixing_c = 0.0;  // 0 selects the spectral gap lambda_1

  int invariant_samples = 100000;
  int invariant_modes = 8;
  int invariant_steps = 200;
  std::vector<double> invariant_taus{0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625, 0.001953125, 0.0009765625};
  int invariant_sum_modes = 256;

  PoissonLemma poisson_lemma = PoissonLemma::phi_0;
  std::vector<double> poisson_scales{0.0, 1.0, 2.0, 4.0, 8.0};
  double poisson_gamma = 0.2;
  double poisson_horizon = 0.0;
  double poisson_fd_step = 1e-4;
  StateSpec poisson_x{{{1, 0.5}}};
  StateSpec poisson_y{{{1, 1.0}, {2, -0.5}}};
  StateSpec poisson_theta{{{1, 1.0}}};

  std::string output_dir = "out";

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Parses and validates; throws ConfigIssues listing every bad field.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Canonical text form: every key, fixed order, round-trip exact.
std::string serialize_config(const RunConfig& config);

/// Cross-field checks (also run by parse_config).
void validate_config(const RunConfig& config);

std::vector<std::string> config_keys();

HmmParams make_params(const RunConfig& config);
SlowFastSystem make_system(const RunConfig& config);
ExperimentSetup make_setup(const RunConfig& config, int threads);

}  // namespace spde_hmm
