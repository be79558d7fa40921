#include "spde_hmm/spectral.hpp"

#include "spde_hmm/errors.hpp"

#include <gsl/gsl_integration.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace spde_hmm {

namespace {

struct FixedDeleter {
  void operator()(gsl_integration_fixed_workspace* w) const { gsl_integration_fixed_free(w); }
};

}  // namespace

EigenBasis::EigenBasis(int n_modes, int grid_points) : n_modes_(n_modes) {
  if (n_modes < 1) throw DomainError("EigenBasis: n_modes must be positive");
  if (grid_points == 0) grid_points = 8 * n_modes;
  if (grid_points < n_modes) {
    throw DomainError("EigenBasis: grid_points (" + std::to_string(grid_points) +
                      ") must be at least n_modes");
  }

  eigenvalues_.resize(n_modes);
  for (int n = 1; n <= n_modes; ++n) {
    eigenvalues_(n - 1) = std::numbers::pi * std::numbers::pi * n * n;
  }

  // Golub-Welsch rule: accurate for every size, unlike the tabulated glfixed sizes.
  std::unique_ptr<gsl_integration_fixed_workspace, FixedDeleter> gl(gsl_integration_fixed_alloc(
      gsl_integration_fixed_legendre, static_cast<size_t>(grid_points), 0.0, 1.0, 0.0, 0.0));
  if (!gl) throw DomainError("EigenBasis: cannot build Gauss-Legendre rule");

  nodes_ = Eigen::Map<const Eigen::VectorXd>(gsl_integration_fixed_nodes(gl.get()), grid_points);
  weights_ = Eigen::Map<const Eigen::VectorXd>(gsl_integration_fixed_weights(gl.get()), grid_points);

  table_.resize(n_modes, grid_points);
  for (int n = 1; n <= n_modes; ++n) {
    for (int j = 0; j < grid_points; ++j) table_(n - 1, j) = eigenfunction(n, nodes_(j));
  }
  weighted_table_ = table_ * weights_.asDiagonal();
}

std::shared_ptr<const EigenBasis> EigenBasis::make(int n_modes, int grid_points) {
  return std::make_shared<const EigenBasis>(n_modes, grid_points);
}

Eigen::VectorXd EigenBasis::synthesize(const Eigen::VectorXd& coefficients) const {
  if (coefficients.size() != n_modes_) throw StructuralError("synthesize: coefficient count mismatch");
  return table_.transpose() * coefficients;
}

Eigen::VectorXd EigenBasis::project(const Eigen::VectorXd& grid_values) const {
  if (grid_values.size() != nodes_.size()) throw StructuralError("project: grid size mismatch");
  return weighted_table_ * grid_values;
}

double EigenBasis::integrate_product(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
  if (a.size() != nodes_.size() || b.size() != nodes_.size()) {
    throw StructuralError("integrate_product: grid size mismatch");
  }
  return (weights_.array() * a.array() * b.array()).sum();
}

double EigenBasis::eigenfunction(int n, double xi) {
  return std::numbers::sqrt2 * std::sin(n * std::numbers::pi * xi);
}

bool EigenBasis::compatible(const EigenBasis& other) const noexcept {
  return this == &other || (n_modes_ == other.n_modes_ && nodes_.size() == other.nodes_.size());
}

SpectralField::SpectralField(BasisPtr basis, Eigen::VectorXd coefficients)
    : basis_(std::move(basis)), coefficients_(std::move(coefficients)) {
  if (!basis_) throw StructuralError("SpectralField: null basis");
  if (coefficients_.size() != basis_->n_modes()) {
    throw StructuralError("SpectralField: expected " + std::to_string(basis_->n_modes()) +
                          " coefficients, got " + std::to_string(coefficients_.size()));
  }
}

SpectralField SpectralField::zero(BasisPtr basis) {
  const int n = basis->n_modes();
  return SpectralField(std::move(basis), Eigen::VectorXd::Zero(n));
}

SpectralField SpectralField::mode(BasisPtr basis, int n, double amplitude) {
  if (n < 1 || n > basis->n_modes()) throw DomainError("SpectralField::mode: index out of range");
  Eigen::VectorXd c = Eigen::VectorXd::Zero(basis->n_modes());
  c(n - 1) = amplitude;
  return SpectralField(std::move(basis), std::move(c));
}

void require_same_basis(const SpectralField& a, const SpectralField& b) {
  if (!a.basis()->compatible(*b.basis())) throw StructuralError("fields live on different bases");
}

SpectralField operator+(const SpectralField& a, const SpectralField& b) {
  require_same_basis(a, b);
  return SpectralField(a.basis_, a.coefficients_ + b.coefficients_);
}

SpectralField operator-(const SpectralField& a, const SpectralField& b) {
  require_same_basis(a, b);
  return SpectralField(a.basis_, a.coefficients_ - b.coefficients_);
}

SpectralField operator*(double s, const SpectralField& a) {
  return SpectralField(a.basis_, s * a.coefficients_);
}

double inner_product(const SpectralField& a, const SpectralField& b) {
  require_same_basis(a, b);
  return a.coefficients().dot(b.coefficients());
}

SpectralField semigroup_apply(const SpectralField& x, double t) {
  if (!(t >= 0.0)) throw DomainError("semigroup_apply: t must be nonnegative");
  const auto& lambda = x.basis()->eigenvalues();
  return SpectralField(x.basis(), ((-t * lambda.array()).exp() * x.coefficients().array()).matrix());
}

SpectralField fractional_power_apply(const SpectralField& x, double gamma) {
  const auto& lambda = x.basis()->eigenvalues();
  return SpectralField(x.basis(), (lambda.array().pow(gamma) * x.coefficients().array()).matrix());
}

SpectralField resolvent_apply(const SpectralField& x, double h) {
  if (!(h >= 0.0)) throw DomainError("resolvent_apply: step must be positive");
  const auto& lambda = x.basis()->eigenvalues();
  return SpectralField(x.basis(), (x.coefficients().array() / (1.0 + h * lambda.array())).matrix());
}

double lp_norm(const SpectralField& x, double p, double gamma) {
  if (!(p >= 2.0)) throw DomainError("lp_norm: p must lie in [2, inf]");
  const EigenBasis& basis = *x.basis();
  const Eigen::VectorXd values =
      basis.synthesize(gamma == 0.0 ? x.coefficients() : fractional_power_apply(x, gamma).coefficients());
  if (std::isinf(p)) return values.cwiseAbs().maxCoeff();
  if (p == 2.0) return std::sqrt(basis.integrate_product(values, values));
  const double integral = (basis.weights().array() * values.array().abs().pow(p)).sum();
  return std::pow(integral, 1.0 / p);
}

}  // namespace spde_hmm
