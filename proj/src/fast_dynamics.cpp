#include "spde_hmm/fast_dynamics.hpp"

#include "spde_hmm/errors.hpp"

#include <cmath>

namespace spde_hmm {

FastProcessModel::FastProcessModel(CovarianceSpec covariance, std::optional<double> gamma_max)
    : covariance_(std::move(covariance)),
      gamma_max_(gamma_max.value_or(covariance_.kind().gamma_max())) {
  if (!(gamma_max_ > 0.0 && gamma_max_ <= 0.5)) {
    throw ConfigError("gamma_max must lie in (0, 1/2]", "fast.gamma_max");
  }
  stationary_variance_ =
      (covariance_.effective_weights().array() / (2.0 * basis()->eigenvalues().array())).matrix();
}

OuTransition::OuTransition(const FastProcessModel& model, double dt) : basis_(model.basis()), dt_(dt) {
  if (!(dt > 0.0)) throw DomainError("ou_exact_step: dt must be positive");
  const auto lambda = basis_->eigenvalues().array();
  decay_ = (-lambda * dt).exp();
  spread_ = (model.stationary_variance().array() * (1.0 - (-2.0 * lambda * dt).exp())).sqrt();
}

SpectralField OuTransition::apply(const SpectralField& y, RngStream& rng) const {
  if (!y.basis()->compatible(*basis_)) throw StructuralError("ou_exact_step: basis mismatch");
  const Eigen::VectorXd z = rng.next_normals(y.size());
  return SpectralField(y.basis(), (decay_ * y.coefficients().array() + spread_ * z.array()).matrix());
}

SpectralField ou_exact_step(const SpectralField& y, const FastProcessModel& model, double dt, RngStream& rng) {
  return OuTransition(model, dt).apply(y, rng);
}

MicroSchemeState micro_step(const MicroSchemeState& state, const FastProcessModel& model, RngStream& rng) {
  if (!(state.tau > 0.0)) throw DomainError("micro_step: tau must be positive");
  const auto lambda = model.basis()->eigenvalues().array();
  const Eigen::VectorXd z = rng.next_normals(state.field.size());
  const Eigen::ArrayXd kick = model.covariance().effective_sqrt().array() * std::sqrt(state.tau) * z.array();
  Eigen::VectorXd next = ((state.field.coefficients().array() + kick) / (1.0 + state.tau * lambda)).matrix();
  return {SpectralField(state.field.basis(), std::move(next)), state.tau, state.step + 1};
}

Eigen::VectorXd invariant_law_moments(const FastProcessModel& model, double tau) {
  if (!(tau >= 0.0)) throw DomainError("invariant_law_moments: tau must be nonnegative");
  const auto lambda = model.basis()->eigenvalues().array();
  const auto q = model.covariance().effective_weights().array();
  return (q / (lambda * (2.0 + tau * lambda))).matrix();
}

double mixing_rate(const FastProcessModel& model, double t) {
  if (!(t >= 0.0)) throw DomainError("mixing_rate: t must be nonnegative");
  return std::exp(-model.spectral_gap() * t);
}

SpectralField sample_invariant(const FastProcessModel& model, double tau, RngStream& rng) {
  const Eigen::VectorXd sd = invariant_law_moments(model, tau).cwiseSqrt();
  Eigen::VectorXd z = rng.next_normals(static_cast<int>(sd.size()));
  z.array() *= sd.array();
  return SpectralField(model.basis(), std::move(z));
}

}  // namespace spde_hmm
