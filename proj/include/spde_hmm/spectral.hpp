#pragma once

// Galerkin truncation of the Dirichlet Laplacian on (0,1).
//
// A = d^2/dxi^2 with homogeneous Dirichlet conditions has eigenpairs
//   A e_n = -lambda_n e_n,  lambda_n = pi^2 n^2,  e_n(xi) = sqrt(2) sin(n pi xi),
// so the semigroup, the resolvent and the fractional powers are all diagonal
// on span{e_1..e_N}. Pointwise (Nemytskii) maps go through a Gauss-Legendre
// grid: synthesize -> evaluate -> project.

#include <Eigen/Dense>

#include <memory>

namespace spde_hmm {

class EigenBasis {
 public:
  /// `grid_points == 0` selects the default grid of 8 * n_modes points.
  explicit EigenBasis(int n_modes, int grid_points = 0);

  static std::shared_ptr<const EigenBasis> make(int n_modes, int grid_points = 0);

  int dimension() const noexcept { return 1; }
  int n_modes() const noexcept { return n_modes_; }
  int grid_size() const noexcept { return static_cast<int>(nodes_.size()); }

  /// lambda_1..lambda_N (index 0 holds lambda_1).
  const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }
  /// 1-based mode index.
  double eigenvalue(int n) const { return eigenvalues_(n - 1); }

  const Eigen::VectorXd& nodes() const noexcept { return nodes_; }
  const Eigen::VectorXd& weights() const noexcept { return weights_; }

  /// N x P table of e_n(xi_j).
  const Eigen::MatrixXd& table() const noexcept { return table_; }

  /// Grid values sum_n c_n e_n(xi_j).
  Eigen::VectorXd synthesize(const Eigen::VectorXd& coefficients) const;
  /// Quadrature coefficients <g, e_n> from grid values g(xi_j).
  Eigen::VectorXd project(const Eigen::VectorXd& grid_values) const;
  /// Quadrature inner product of two grid functions.
  double integrate_product(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const;

  /// Exact e_n(xi), off-grid.
  static double eigenfunction(int n, double xi);

  bool compatible(const EigenBasis& other) const noexcept;

 private:
  int n_modes_;
  Eigen::VectorXd eigenvalues_;
  Eigen::VectorXd nodes_;
  Eigen::VectorXd weights_;
  Eigen::MatrixXd table_;
  Eigen::MatrixXd weighted_table_;  // e_n(xi_j) * w_j
};

using BasisPtr = std::shared_ptr<const EigenBasis>;

/// A slow or fast state: coefficients c_n = <x, e_n> on a fixed basis.
class SpectralField {
 public:
  SpectralField(BasisPtr basis, Eigen::VectorXd coefficients);

  static SpectralField zero(BasisPtr basis);
  /// amplitude * e_n (1-based n).
  static SpectralField mode(BasisPtr basis, int n, double amplitude = 1.0);

  const BasisPtr& basis() const noexcept { return basis_; }
  const Eigen::VectorXd& coefficients() const noexcept { return coefficients_; }
  /// 1-based mode index.
  double coefficient(int n) const { return coefficients_(n - 1); }
  int size() const noexcept { return static_cast<int>(coefficients_.size()); }

  Eigen::VectorXd grid_values() const { return basis_->synthesize(coefficients_); }

  /// Parseval: |x|_{L^2} on the truncation.
  double l2_norm() const { return coefficients_.norm(); }

  friend SpectralField operator+(const SpectralField& a, const SpectralField& b);
  friend SpectralField operator-(const SpectralField& a, const SpectralField& b);
  friend SpectralField operator*(double s, const SpectralField& a);

 private:
  BasisPtr basis_;
  Eigen::VectorXd coefficients_;
};

/// Throws StructuralError unless both fields live on compatible bases.
void require_same_basis(const SpectralField& a, const SpectralField& b);

double inner_product(const SpectralField& a, const SpectralField& b);

/// e^{tA} x; t >= 0.
SpectralField semigroup_apply(const SpectralField& x, double t);
/// (-A)^gamma x for any real gamma.
SpectralField fractional_power_apply(const SpectralField& x, double gamma);
/// (I - hA)^{-1} x; h = 0 is the identity, h < 0 is rejected.
SpectralField resolvent_apply(const SpectralField& x, double h);
/// |(-A)^gamma x|_{L^p} by grid quadrature, p in [2, inf]. Pass
/// std::numeric_limits<double>::infinity() for the sup norm (grid max).
double lp_norm(const SpectralField& x, double p, double gamma = 0.0);

}  // namespace spde_hmm
