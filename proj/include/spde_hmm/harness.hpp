#pragma once

// Monte Carlo error studies: coupled strong/weak errors against epsilon, the
// HMM gap against the averaging window, log-log rate fits, the R1/R2 mixing
// sums and the delta/epsilon balance of the less regular case.
//
// Every replica owns its Philox streams (seed, replica id, role) and writes its
// statistics into a slot indexed by replica id; the reduction walks the slots
// in order, so reports do not depend on the thread schedule.

#include "spde_hmm/schemes.hpp"
#include "spde_hmm/spectral.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace spde_hmm {

enum class ScalarMap { cos, tanh };
std::string to_string(ScalarMap map);
ScalarMap parse_scalar_map(const std::string& name);

/// phi(x) = <omega, phi~(x(.))> by grid quadrature.
class TestFunctional {
 public:
  TestFunctional(SpectralField weight, ScalarMap map);

  const SpectralField& weight() const noexcept { return weight_; }
  ScalarMap map() const noexcept { return map_; }
  std::string name() const;

  double operator()(const SpectralField& x) const;
  /// sum_j w_j |omega(xi_j)| * sup |phi~|.
  double bound() const;

 private:
  SpectralField weight_;
  ScalarMap map_;
  Eigen::ArrayXd weighted_omega_;
};

/// Everything a study needs besides its sweep values.
struct ExperimentSetup {
  SlowFastSystem system;
  SpectralField x0;
  SpectralField y0;
  HmmParams params;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<TestFunctional> functionals;
};

struct RateFit {
  std::string metric;
  double slope = 0.0;
  double slope_se = 0.0;
  double intercept = 0.0;
  int points = 0;
  std::vector<std::string> warnings;
};

/// OLS of log(error) on log(parameter). Nonpositive errors are dropped with a
/// warning; fewer than 2 survivors throw StatisticsError.
RateFit fit_rate(const std::vector<double>& parameters, const std::vector<double>& errors,
                 const std::string& metric = "error");

struct ErrorRow {
  double parameter = 0.0;
  int replicas = 0;
  double strong = 0.0;
  double strong_se = 0.0;
  double strong_time = 0.0;  // snapshot where the reported value was taken
  std::vector<double> weak;  // one per functional
  std::vector<double> weak_se;
  std::vector<double> weak_time;
};

/// Statistics at one (parameter, snapshot time) pair.
struct SeriesRow {
  double parameter = 0.0;
  double time = 0.0;
  double strong = 0.0;
  double strong_se = 0.0;
  std::vector<double> weak;
  std::vector<double> weak_se;
};

struct ManifestEntry {
  double parameter = 0.0;
  std::uint32_t first_replica = 0;
  std::uint32_t replica_count = 0;
  std::vector<std::string> roles;
};

struct SeedManifest {
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;
};

struct ErrorReport {
  std::string experiment;
  std::string parameter_name;
  /// "sup" (largest value over snapshots) or "terminal".
  std::string time_reduction;
  std::vector<std::string> functionals;
  std::vector<ErrorRow> rows;
  std::vector<SeriesRow> series;
  std::vector<RateFit> fits;
  SeedManifest manifest;
};

/// X^eps (direct, step h = params.fine_step()) against X-bar (averaged, same h,
/// same slow-noise stream), for each epsilon. Reports the sup over snapshots
/// of the RMS L^2 distance (jackknife se) and of |mean phi(X^eps) - phi(X-bar)|
/// for every functional in the setup; fits both against epsilon.
ErrorReport strong_error_vs_epsilon(const ExperimentSetup& setup, const std::vector<double>& epsilons, int replicas);

/// Same coupled runs; the weak fits are the focus and at least one functional is required.
ErrorReport weak_error_vs_epsilon(const ExperimentSetup& setup, const std::vector<double>& epsilons, int replicas);

/// HMM against tau-averaged (shared slow noise) at M = m_factor * Ma for each
/// Ma; reports the terminal RMS gap and its slope against Ma.
ErrorReport hmm_gap_vs_Ma(const ExperimentSetup& setup, const std::vector<int>& windows, int replicas,
                          int m_factor = 2);

struct MixingSums {
  double r1 = 0.0;
  double r2 = 0.0;
};

/// R1 = (1/Ma) sum_{m=M-Ma+1}^{M} e^{-c m tau},
/// R2 = (1/Ma^2) sum_{M-Ma+1 <= m1 < m2 <= M} e^{-c (m2 - m1) tau}.
MixingSums mixing_sums(int M, int Ma, double tau, double c);

struct BalancedDelta {
  double delta = 0.0;
  double beta = 0.0;  // predicted strong rate alpha / (1 + alpha - gamma)
};

/// delta = eps^{1/(1 + alpha - gamma)}; requires 0 < gamma <= alpha < 1.
BalancedDelta balance_delta(double epsilon, double alpha, double gamma);

enum class RateVerdict { pass, fail, inconclusive };
std::string to_string(RateVerdict verdict);

struct RateAssessment {
  RateVerdict verdict = RateVerdict::fail;
  double slope = 0.0;
  double slope_se = 0.0;
  bool competing_in_interval = false;  // slope +- 2 se covers the competing rate
  bool certificate = false;            // error is o(eps^competing) at the two smallest parameters
  std::string detail;
};

/// Slope window check with a fallback for noisy fits. When slope +- 2 se
/// covers `competing`, the result is inconclusive provided the upper bound
/// (error + 2 se) / eps^competing at each of the two smallest eps lies below
/// the point value of that ratio at the largest eps and decreases between
/// them; otherwise it fails.
RateAssessment assess_rate(const RateFit& fit, const std::vector<double>& parameters,
                           const std::vector<double>& errors, const std::vector<double>& errors_se, double lo,
                           double hi, double competing);

}  // namespace spde_hmm
