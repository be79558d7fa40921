#pragma once

// The fast process: a linear Ornstein-Uhlenbeck SPDE dY = AY dt + dw^q,
// its exact transition, the linear implicit Euler micro-scheme, and the
// closed-form invariant laws mu (exact) and mu^tau (micro-scheme).

#include "spde_hmm/forcing.hpp"
#include "spde_hmm/spectral.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>

namespace spde_hmm {

class FastProcessModel {
 public:
  /// gamma_max defaults to the covariance family's declared value.
  explicit FastProcessModel(CovarianceSpec covariance, std::optional<double> gamma_max = std::nullopt);

  const CovarianceSpec& covariance() const noexcept { return covariance_; }
  const BasisPtr& basis() const noexcept { return covariance_.basis(); }
  double gamma_max() const noexcept { return gamma_max_; }
  /// c = lambda_1, so rho(t) = e^{-ct}.
  double spectral_gap() const { return basis()->eigenvalue(1); }
  /// v_n = q_n / (2 lambda_n).
  const Eigen::VectorXd& stationary_variance() const noexcept { return stationary_variance_; }

 private:
  CovarianceSpec covariance_;
  double gamma_max_;
  Eigen::VectorXd stationary_variance_;
};

struct MicroSchemeState {
  SpectralField field;
  double tau;
  std::uint64_t step = 0;
};

/// Exact OU transition over a fixed dt, with decay and spread precomputed.
class OuTransition {
 public:
  OuTransition(const FastProcessModel& model, double dt);

  double dt() const noexcept { return dt_; }
  SpectralField apply(const SpectralField& y, RngStream& rng) const;

 private:
  BasisPtr basis_;
  double dt_;
  Eigen::ArrayXd decay_;
  Eigen::ArrayXd spread_;
};

/// y' = e^{-lambda dt} y + sqrt(v (1 - e^{-2 lambda dt})) Z, mode by mode.
SpectralField ou_exact_step(const SpectralField& y, const FastProcessModel& model, double dt, RngStream& rng);

/// y' = (y + sqrt(q tau) Z) / (1 + tau lambda), mode by mode.
MicroSchemeState micro_step(const MicroSchemeState& state, const FastProcessModel& model, RngStream& rng);

/// Per-mode variances of mu (tau = 0) or mu^tau (tau > 0): q/(2 lambda) or q/(lambda (2 + tau lambda)).
Eigen::VectorXd invariant_law_moments(const FastProcessModel& model, double tau);

/// rho(t) = e^{-lambda_1 t}.
double mixing_rate(const FastProcessModel& model, double t);

/// One exact draw from mu (tau = 0) or mu^tau.
SpectralField sample_invariant(const FastProcessModel& model, double tau, RngStream& rng);

}  // namespace spde_hmm
