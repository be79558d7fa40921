#include "spde_hmm/reaction.hpp"

#include "spde_hmm/errors.hpp"

#include <cmath>

namespace spde_hmm {

std::string to_string(FastCoupling family) {
  switch (family) {
    case FastCoupling::affine_y: return "affine_y";
    case FastCoupling::quadratic_y: return "quadratic_y";
    case FastCoupling::cosine_y: return "cosine_y";
  }
  return "affine_y";
}

std::string to_string(SlowPart g) {
  switch (g) {
    case SlowPart::zero: return "zero";
    case SlowPart::sin: return "sin";
    case SlowPart::tanh: return "tanh";
    case SlowPart::linear_clipped: return "linear_clipped";
  }
  return "zero";
}

FastCoupling parse_fast_coupling(const std::string& name) {
  if (name == "affine_y") return FastCoupling::affine_y;
  if (name == "quadratic_y") return FastCoupling::quadratic_y;
  if (name == "cosine_y") return FastCoupling::cosine_y;
  throw ConfigError("unknown family '" + name + "' (affine_y, quadratic_y, cosine_y)", "nonlinearity.family");
}

SlowPart parse_slow_part(const std::string& name) {
  if (name == "zero") return SlowPart::zero;
  if (name == "sin") return SlowPart::sin;
  if (name == "tanh") return SlowPart::tanh;
  if (name == "linear_clipped") return SlowPart::linear_clipped;
  throw ConfigError("unknown slow part '" + name + "' (zero, sin, tanh, linear_clipped)", "nonlinearity.g");
}

NonlinearitySpec::NonlinearitySpec(FastCoupling family, SlowPart g, double c) : family_(family), g_(g), c_(c) {
  if (!std::isfinite(c)) throw ConfigError("coupling must be finite", "nonlinearity.c");
}

// linear_clipped is the smooth clip z / sqrt(1 + z^2): identity near 0,
// saturating at +-1, all derivatives bounded.
double NonlinearitySpec::slow(double z) const {
  switch (g_) {
    case SlowPart::zero: return 0.0;
    case SlowPart::sin: return std::sin(z);
    case SlowPart::tanh: return std::tanh(z);
    case SlowPart::linear_clipped: return z / std::sqrt(1.0 + z * z);
  }
  return 0.0;
}

double NonlinearitySpec::slow_derivative(double z) const {
  switch (g_) {
    case SlowPart::zero: return 0.0;
    case SlowPart::sin: return std::cos(z);
    case SlowPart::tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case SlowPart::linear_clipped: return std::pow(1.0 + z * z, -1.5);
  }
  return 0.0;
}

double NonlinearitySpec::slow_second_derivative(double z) const {
  switch (g_) {
    case SlowPart::zero: return 0.0;
    case SlowPart::sin: return -std::sin(z);
    case SlowPart::tanh: {
      const double t = std::tanh(z);
      return -2.0 * t * (1.0 - t * t);
    }
    case SlowPart::linear_clipped: return -3.0 * z * std::pow(1.0 + z * z, -2.5);
  }
  return 0.0;
}

double NonlinearitySpec::fast(double z) const {
  switch (family_) {
    case FastCoupling::affine_y: return z;
    case FastCoupling::quadratic_y: return z * z;
    case FastCoupling::cosine_y: return std::cos(z);
  }
  return 0.0;
}

double NonlinearitySpec::fast_derivative(double z) const {
  switch (family_) {
    case FastCoupling::affine_y: return 1.0;
    case FastCoupling::quadratic_y: return 2.0 * z;
    case FastCoupling::cosine_y: return -std::sin(z);
  }
  return 0.0;
}

double NonlinearitySpec::fast_gaussian_mean(double variance) const {
  switch (family_) {
    case FastCoupling::affine_y: return 0.0;
    case FastCoupling::quadratic_y: return variance;
    case FastCoupling::cosine_y: return std::exp(-0.5 * variance);
  }
  return 0.0;
}

double NonlinearitySpec::lipschitz_x() const { return g_ == SlowPart::zero ? 0.0 : 1.0; }

Eigen::ArrayXd NonlinearitySpec::evaluate_slow(const Eigen::ArrayXd& x) const {
  switch (g_) {
    case SlowPart::zero: return Eigen::ArrayXd::Zero(x.size());
    case SlowPart::sin: return x.sin();
    case SlowPart::tanh: return x.tanh();
    case SlowPart::linear_clipped: return x / (1.0 + x.square()).sqrt();
  }
  return Eigen::ArrayXd::Zero(x.size());
}

Eigen::ArrayXd NonlinearitySpec::evaluate_fast(const Eigen::ArrayXd& y) const {
  switch (family_) {
    case FastCoupling::affine_y: return y;
    case FastCoupling::quadratic_y: return y.square();
    case FastCoupling::cosine_y: return y.cos();
  }
  return y;
}

Eigen::ArrayXd NonlinearitySpec::evaluate(const Eigen::ArrayXd& x, const Eigen::ArrayXd& y) const {
  if (c_ == 0.0) return evaluate_slow(x);
  return evaluate_slow(x) + c_ * evaluate_fast(y);
}

Eigen::VectorXd pointwise_variance(const EigenBasis& basis, const Eigen::VectorXd& mode_variance) {
  return basis.table().array().square().matrix().transpose() * mode_variance;
}

AveragedCoefficient::AveragedCoefficient(NonlinearitySpec spec, BasisPtr basis, Eigen::VectorXd grid_variance)
    : spec_(spec), basis_(std::move(basis)), grid_variance_(std::move(grid_variance)) {
  if (grid_variance_.size() != basis_->grid_size()) throw StructuralError("AveragedCoefficient: grid size mismatch");
  fast_mean_.resize(grid_variance_.size());
  for (Eigen::Index j = 0; j < grid_variance_.size(); ++j) {
    fast_mean_(j) = spec_.coupling() * spec_.fast_gaussian_mean(grid_variance_(j));
  }
}

AveragedCoefficient AveragedCoefficient::for_model(const NonlinearitySpec& spec, const FastProcessModel& model,
                                                   double tau) {
  const BasisPtr& basis = model.basis();
  return {spec, basis, pointwise_variance(*basis, invariant_law_moments(model, tau))};
}

Eigen::ArrayXd AveragedCoefficient::evaluate(const Eigen::ArrayXd& x_values) const {
  return spec_.evaluate_slow(x_values) + fast_mean_;
}

SpectralField apply_F(const NonlinearitySpec& spec, const SpectralField& x, const SpectralField& y) {
  require_same_basis(x, y);
  const EigenBasis& basis = *x.basis();
  const Eigen::ArrayXd values = spec.evaluate(basis.synthesize(x.coefficients()).array(),
                                              basis.synthesize(y.coefficients()).array());
  return SpectralField(x.basis(), basis.project(values.matrix()));
}

SpectralField apply_averaged(const AveragedCoefficient& avg, const SpectralField& x) {
  if (!x.basis()->compatible(*avg.basis())) throw StructuralError("apply_averaged: basis mismatch");
  const EigenBasis& basis = *x.basis();
  const Eigen::ArrayXd values = avg.evaluate(basis.synthesize(x.coefficients()).array());
  return SpectralField(x.basis(), basis.project(values.matrix()));
}

SpectralField averaging_residual(const NonlinearitySpec& spec, const AveragedCoefficient& avg,
                                 const SpectralField& x, const SpectralField& y) {
  return apply_F(spec, x, y) - apply_averaged(avg, x);
}

}  // namespace spde_hmm
