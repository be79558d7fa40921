#pragma once

// Pointwise reaction f(z1, z2) = g(z1) + c h(z2), its Nemytskii lift F and the
// averaged coefficients F-bar (under mu) and F-bar^tau (under mu^tau).
//
// mu and mu^tau are centred product Gaussians over modes, so y(xi) is a scalar
// Gaussian with variance sigma^2(xi) = sum_n v_n e_n(xi)^2 and the average of
// F(x, .) reduces to a pointwise Gaussian expectation of h.

#include "spde_hmm/fast_dynamics.hpp"
#include "spde_hmm/spectral.hpp"

#include <Eigen/Dense>

#include <string>

namespace spde_hmm {

enum class FastCoupling { affine_y, quadratic_y, cosine_y };
enum class SlowPart { zero, sin, tanh, linear_clipped };

std::string to_string(FastCoupling family);
std::string to_string(SlowPart g);
FastCoupling parse_fast_coupling(const std::string& name);
SlowPart parse_slow_part(const std::string& name);

class NonlinearitySpec {
 public:
  NonlinearitySpec(FastCoupling family, SlowPart g, double c);

  FastCoupling family() const noexcept { return family_; }
  SlowPart slow_part() const noexcept { return g_; }
  double coupling() const noexcept { return c_; }

  double slow(double z1) const;
  double slow_derivative(double z1) const;
  double slow_second_derivative(double z1) const;
  /// h(z2) such that f = g(z1) + c h(z2).
  double fast(double z2) const;
  double fast_derivative(double z2) const;
  /// E[h(Z)] for Z ~ N(0, variance).
  double fast_gaussian_mean(double variance) const;

  double operator()(double z1, double z2) const { return slow(z1) + c_ * fast(z2); }
  double d_z1(double z1, double /*z2*/) const { return slow_derivative(z1); }
  double d_z2(double /*z1*/, double z2) const { return c_ * fast_derivative(z2); }
  double d_z1z1(double z1, double /*z2*/) const { return slow_second_derivative(z1); }

  /// f-bar(z1; sigma^2) = E[f(z1, Z)], Z ~ N(0, sigma^2).
  double averaged(double z1, double variance) const { return slow(z1) + c_ * fast_gaussian_mean(variance); }

  /// sup |d f / d z1|.
  double lipschitz_x() const;

  /// Grid evaluation of f(x(xi_j), y(xi_j)).
  Eigen::ArrayXd evaluate(const Eigen::ArrayXd& x_values, const Eigen::ArrayXd& y_values) const;
  Eigen::ArrayXd evaluate_slow(const Eigen::ArrayXd& x_values) const;
  Eigen::ArrayXd evaluate_fast(const Eigen::ArrayXd& y_values) const;

 private:
  FastCoupling family_;
  SlowPart g_;
  double c_;
};

class AveragedCoefficient {
 public:
  /// `grid_variance` holds sigma^2(xi_j) on the basis grid.
  AveragedCoefficient(NonlinearitySpec spec, BasisPtr basis, Eigen::VectorXd grid_variance);

  /// tau = 0 averages against mu, tau > 0 against mu^tau.
  static AveragedCoefficient for_model(const NonlinearitySpec& spec, const FastProcessModel& model, double tau);

  const NonlinearitySpec& spec() const noexcept { return spec_; }
  const BasisPtr& basis() const noexcept { return basis_; }
  const Eigen::VectorXd& grid_variance() const noexcept { return grid_variance_; }
  /// c E[h(y(xi_j))] on the grid.
  const Eigen::ArrayXd& fast_mean() const noexcept { return fast_mean_; }

  Eigen::ArrayXd evaluate(const Eigen::ArrayXd& x_values) const;

 private:
  NonlinearitySpec spec_;
  BasisPtr basis_;
  Eigen::VectorXd grid_variance_;
  Eigen::ArrayXd fast_mean_;
};

/// sigma^2(xi_j) = sum_n v_n e_n(xi_j)^2.
Eigen::VectorXd pointwise_variance(const EigenBasis& basis, const Eigen::VectorXd& mode_variance);

SpectralField apply_F(const NonlinearitySpec& spec, const SpectralField& x, const SpectralField& y);
SpectralField apply_averaged(const AveragedCoefficient& avg, const SpectralField& x);
/// F(x, y) - F-bar(x).
SpectralField averaging_residual(const NonlinearitySpec& spec, const AveragedCoefficient& avg,
                                 const SpectralField& x, const SpectralField& y);

}  // namespace spde_hmm
