#pragma once

// Time integrators for the slow component:
//   direct        fully coupled reference (X^eps, Y^eps) on a fine step h
//   averaged      linear implicit Euler for the averaged equation (F-bar)
//   tau_averaged  same with F-bar^tau (the micro-scheme's invariant law)
//   hmm           macro step fed by a window average of F over a micro chain
// All slow updates share the form x' = S_dt (x + dt * drift + dW), S_dt = (I - dt A)^{-1}.

#include "spde_hmm/fast_dynamics.hpp"
#include "spde_hmm/forcing.hpp"
#include "spde_hmm/reaction.hpp"
#include "spde_hmm/spectral.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace spde_hmm {

struct HmmParams {
  double epsilon = 0.1;
  double dt = 0.05;  // macro step; also the snapshot interval of every scheme
  double tau = 0.1;  // micro step in the fast clock
  int M = 0;         // micro steps per macro step; 0 derives ceil(dt / (epsilon tau))
  int Ma = 1;        // averaging window, 1 <= Ma <= M
  double T = 0.5;
  int n_modes = 32;
  double delta = 0.0;   // extra mollification of the slow noise
  int fine_ratio = 64;  // direct scheme: h <= epsilon / fine_ratio

  /// Copy with M filled in from M tau = dt / epsilon when it was left at 0.
  HmmParams resolved() const;
  /// Throws ConfigError on broken invariants (Ma > M, T/dt not integral, ...).
  void validate() const;
  int macro_steps() const;
  /// Fine step used by the direct scheme: the largest dt / k not above epsilon / fine_ratio.
  double fine_step() const;
};

struct SlowFastSystem {
  BasisPtr basis;
  CovarianceSpec slow_noise;
  FastProcessModel fast;
  NonlinearitySpec reaction;
};

enum class Scheme { hmm, averaged, tau_averaged, direct };
std::string to_string(Scheme scheme);
Scheme parse_scheme(const std::string& name);

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<SpectralField> snapshots;
  std::optional<SpectralField> final_fast_state;
  std::vector<StreamId> streams;
};

struct HmmStepResult {
  SpectralField x;
  MicroSchemeState chain;
};

struct DirectStepResult {
  SpectralField x;
  SpectralField y;
};

/// One macro step: advance the chain M micro steps, average F(x, Y_{n,m}) over
/// m = M - Ma + 1..M, then x' = S_dt(x + dt F~ + dW).
HmmStepResult step_hmm_macro(const SpectralField& x, const MicroSchemeState& chain, const HmmParams& params,
                             const NonlinearitySpec& spec, const CovarianceSpec& slow_noise,
                             const FastProcessModel& fast, RngStream& slow_rng, RngStream& fast_rng);

/// x' = S_dt(x + dt F-bar(x) + dW); the variant is fixed by how `avg` was built.
SpectralField step_averaged(const SpectralField& x, const AveragedCoefficient& avg, double dt,
                            const CovarianceSpec& slow_noise, RngStream& slow_rng);

/// One coupled step of size h: x' = S_h(x + h F(x, y) + dW(h)), y' = exact OU
/// transition over h / epsilon. Throws ConfigError when h > epsilon / lambda_1.
DirectStepResult step_direct(const SpectralField& x, const SpectralField& y, double epsilon, double h,
                             const NonlinearitySpec& spec, const CovarianceSpec& slow_noise,
                             const FastProcessModel& fast, RngStream& slow_rng, RngStream& fast_rng);

struct IntegrationOptions {
  /// Step for the averaged schemes (defaults to dt); ignored by hmm and direct.
  std::optional<double> step;
  /// When set, every slow-noise increment is appended here.
  std::vector<Eigen::VectorXd>* slow_increment_log = nullptr;
};

/// The slow noise actually used by a run: the system's covariance with its
/// mollification extended by params.delta.
CovarianceSpec effective_slow_noise(const SlowFastSystem& system, const HmmParams& params);

TrajectoryRecord integrate(Scheme scheme, const SlowFastSystem& system, const SpectralField& x0,
                           const SpectralField& y0, const HmmParams& params, std::uint64_t seed,
                           std::uint32_t replica, const IntegrationOptions& options = {});

}  // namespace spde_hmm
