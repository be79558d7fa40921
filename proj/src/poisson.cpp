#include "spde_hmm/poisson.hpp"

#include "spde_hmm/errors.hpp"

#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>

namespace spde_hmm {

namespace {

constexpr double kTailBound = 1e-10;
constexpr double kDefaultHorizonScale = 25.0;

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Probabilists' Gauss-Hermite: E[h(Z)] = sum w_i h(z_i), Z ~ N(0,1).
Rule gauss_hermite(int order) {
  const gsl_integration_fixed_type* type = gsl_integration_fixed_hermite;
  std::unique_ptr<gsl_integration_fixed_workspace, decltype(&gsl_integration_fixed_free)> ws(
      gsl_integration_fixed_alloc(type, static_cast<size_t>(order), 0.0, 0.5, 0.0, 0.0), &gsl_integration_fixed_free);
  if (!ws) throw DomainError("gauss_hermite: cannot build rule");
  const double* x = gsl_integration_fixed_nodes(ws.get());
  const double* w = gsl_integration_fixed_weights(ws.get());
  Rule rule;
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (int i = 0; i < order; ++i) {
    rule.nodes.push_back(x[i]);
    rule.weights.push_back(w[i] * norm);
  }
  return rule;
}

// Gauss-Legendre nodes on geometrically graded panels [T 2^{-k-1}, T 2^{-k}]
// (first panel [0, T 2^{-L+1}]), each split into `refinement` equal pieces.
Rule graded_time_rule(double horizon, double fastest_rate, int refinement, int order) {
  const int levels = std::max(4, static_cast<int>(std::ceil(std::log2(horizon * 2.0 * fastest_rate))) + 2);
  std::vector<double> edges{0.0};
  for (int k = levels - 1; k >= 0; --k) edges.push_back(horizon * std::ldexp(1.0, -k));

  std::unique_ptr<gsl_integration_glfixed_table, decltype(&gsl_integration_glfixed_table_free)> gl(
      gsl_integration_glfixed_table_alloc(static_cast<size_t>(order)), &gsl_integration_glfixed_table_free);
  if (!gl) throw DomainError("graded_time_rule: cannot build Gauss-Legendre table");

  Rule rule;
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const double width = (edges[p + 1] - edges[p]) / refinement;
    for (int r = 0; r < refinement; ++r) {
      const double a = edges[p] + r * width;
      for (int i = 0; i < order; ++i) {
        double t = 0.0;
        double w = 0.0;
        gsl_integration_glfixed_point(a, a + width, static_cast<size_t>(i), &t, &w, gl.get());
        rule.nodes.push_back(t);
        rule.weights.push_back(w);
      }
    }
  }
  return rule;
}

}  // namespace

double PoissonProbe::resolved_horizon() const {
  if (horizon > 0.0) return horizon;
  return kDefaultHorizonScale / x.basis()->eigenvalue(1);
}

void validate_probe(const PoissonProbe& probe) {
  require_same_basis(probe.x, probe.y);
  require_same_basis(probe.x, probe.theta);
  const double tq = probe.resolved_horizon();
  if (!(std::exp(-probe.x.basis()->eigenvalue(1) * tq) < kTailBound)) {
    throw ConfigError("quadrature horizon too short: e^{-lambda_1 T_q} must be below 1e-10", "poisson.horizon");
  }
  if (probe.panel_refinement < 1 || probe.panel_order < 1 || probe.hermite_order < 1) {
    throw ConfigError("quadrature orders must be positive", "poisson");
  }
}

double evaluate_corrector(const PoissonProbe& probe, const NonlinearitySpec& spec, const FastProcessModel& model) {
  validate_probe(probe);
  const EigenBasis& basis = *probe.x.basis();
  if (!basis.compatible(*model.basis())) throw StructuralError("evaluate_corrector: basis mismatch");
  if (spec.coupling() == 0.0) return 0.0;  // F does not depend on y: the source vanishes

  const auto lambda = basis.eigenvalues().array();
  const Eigen::ArrayXd v = model.stationary_variance().array();
  const Eigen::MatrixXd table_sq = basis.table().array().square().matrix().transpose();  // P x N
  const Eigen::ArrayXd theta_w = basis.synthesize(probe.theta.coefficients()).array() * basis.weights().array();
  const AveragedCoefficient avg = AveragedCoefficient::for_model(spec, model, 0.0);
  const Eigen::ArrayXd& fast_mean = avg.fast_mean();
  const double c = spec.coupling();

  const Rule hermite = gauss_hermite(probe.hermite_order);
  const Rule time = graded_time_rule(probe.resolved_horizon(), lambda.maxCoeff(), probe.panel_refinement,
                                     probe.panel_order);

  double total = 0.0;
  for (std::size_t k = 0; k < time.nodes.size(); ++k) {
    const double t = time.nodes[k];
    const Eigen::ArrayXd mean = basis.synthesize((( -lambda * t).exp() * probe.y.coefficients().array()).matrix()).array();
    const Eigen::VectorXd mode_var = (v * (1.0 - (-2.0 * lambda * t).exp())).matrix();
    const Eigen::ArrayXd sd = (table_sq * mode_var).array().max(0.0).sqrt();

    double integrand = 0.0;
    for (Eigen::Index j = 0; j < mean.size(); ++j) {
      double expectation = 0.0;
      for (std::size_t i = 0; i < hermite.nodes.size(); ++i) {
        expectation += hermite.weights[i] * spec.fast(mean(j) + sd(j) * hermite.nodes[i]);
      }
      // The slow part g(x) cancels between F and F-bar pointwise.
      integrand += theta_w(j) * (c * expectation - fast_mean(j));
    }
    total += time.weights[k] * integrand;
  }
  return total;
}

double affine_corrector(const NonlinearitySpec& spec, const SpectralField& y, const SpectralField& theta) {
  if (spec.family() != FastCoupling::affine_y) throw DomainError("affine_corrector: affine_y family only");
  return spec.coupling() * inner_product(fractional_power_apply(y, -1.0), theta);
}

GeneratorCheck generator_identity_check(const PoissonProbe& probe, const NonlinearitySpec& spec,
                                        const FastProcessModel& model, double fd_step) {
  if (!(fd_step > 0.0)) throw DomainError("generator_identity_check: step must be positive");
  const EigenBasis& basis = *probe.x.basis();
  const auto& lambda = basis.eigenvalues();
  const auto& q = model.covariance().effective_weights();

  auto corrector_at = [&](const Eigen::VectorXd& y) {
    PoissonProbe shifted = probe;
    shifted.y = SpectralField(probe.y.basis(), y);
    return evaluate_corrector(shifted, spec, model);
  };

  const Eigen::VectorXd y0 = probe.y.coefficients();
  const double phi0 = corrector_at(y0);
  double generator = 0.0;
  for (int n = 0; n < basis.n_modes(); ++n) {
    if (y0(n) == 0.0 && q(n) == 0.0) continue;
    Eigen::VectorXd up = y0;
    Eigen::VectorXd down = y0;
    up(n) += fd_step;
    down(n) -= fd_step;
    const double phi_up = corrector_at(up);
    const double phi_down = corrector_at(down);
    const double first = (phi_up - phi_down) / (2.0 * fd_step);
    const double second = (phi_up - 2.0 * phi0 + phi_down) / (fd_step * fd_step);
    generator += -lambda(n) * y0(n) * first + 0.5 * q(n) * second;
  }

  const AveragedCoefficient avg = AveragedCoefficient::for_model(spec, model, 0.0);
  const Eigen::ArrayXd xv = basis.synthesize(probe.x.coefficients()).array();
  const Eigen::ArrayXd yv = basis.synthesize(y0).array();
  const Eigen::ArrayXd tv = basis.synthesize(probe.theta.coefficients()).array();
  const Eigen::ArrayXd diff = spec.evaluate(xv, yv) - avg.evaluate(xv);

  GeneratorCheck check;
  check.generator_value = generator;
  check.source = basis.integrate_product(diff.matrix(), tv.matrix());
  check.residual = std::abs(generator + check.source);
  return check;
}

std::string to_string(PoissonLemma lemma) { return lemma == PoissonLemma::phi_0 ? "Phi_0" : "Phi_0ter"; }

PoissonLemma parse_poisson_lemma(const std::string& name) {
  if (name == "Phi_0" || name == "phi_0") return PoissonLemma::phi_0;
  if (name == "Phi_0ter" || name == "phi_0ter") return PoissonLemma::phi_0ter;
  throw ConfigError("unknown lemma '" + name + "' (Phi_0, Phi_0ter)", "poisson.lemma");
}

BoundTable bound_probe(PoissonLemma lemma, const BoundSweep& sweep, const NonlinearitySpec& spec,
                       const FastProcessModel& model) {
  if (sweep.scales.empty()) throw ConfigError("sweep needs at least one scale", "poisson.scales");
  const BasisPtr& basis = sweep.x.basis();
  const double inf = std::numeric_limits<double>::infinity();
  BoundTable table;
  table.lemma = lemma;

  for (double s : sweep.scales) {
    PoissonProbe probe{sweep.x, sweep.y, sweep.theta};
    probe.horizon = sweep.horizon;
    double bound = 0.0;
    if (lemma == PoissonLemma::phi_0) {
      probe.y = s * sweep.y;
      bound = (1.0 + probe.y.l2_norm()) * probe.theta.l2_norm();
    } else {
      const int k = static_cast<int>(std::lround(s));
      if (k < 1 || k > basis->n_modes()) throw ConfigError("mode index out of range", "poisson.scales");
      probe.theta = SpectralField::mode(basis, k);
      const double kappa = sweep.kappa > 0.0 ? sweep.kappa : 0.5 * (model.gamma_max() - sweep.gamma);
      const double smooth = sweep.gamma + kappa;
      const double xs = lp_norm(sweep.x, 4.0, smooth);
      const double ys = lp_norm(sweep.y, 4.0, smooth);
      bound = (1.0 + xs * xs + ys * ys) * fractional_power_apply(probe.theta, -sweep.gamma).l2_norm();
    }
    BoundRow row;
    row.scale = s;
    row.value = std::abs(evaluate_corrector(probe, spec, model));
    row.bound = bound;
    row.ratio = bound > 0.0 ? row.value / bound : (row.value == 0.0 ? 0.0 : inf);
    table.rows.push_back(row);
  }

  std::size_t argmax = 0;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    if (table.rows[i].ratio > table.rows[argmax].ratio) argmax = i;
  }
  table.max_ratio = table.rows[argmax].ratio;

  if (lemma == PoissonLemma::phi_0) {
    // Least-squares exponent of |Phi| vs s over the positive upper half of the sweep.
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = table.rows.size() / 2; i < table.rows.size(); ++i) {
      const auto& r = table.rows[i];
      if (r.scale > 0.0 && r.value > 0.0) pts.emplace_back(std::log(r.scale), std::log(r.value));
    }
    double exponent = 0.0;
    if (pts.size() >= 2) {
      double mx = 0.0, my = 0.0;
      for (auto [a, b] : pts) { mx += a; my += b; }
      mx /= pts.size();
      my /= pts.size();
      double sxy = 0.0, sxx = 0.0;
      for (auto [a, b] : pts) { sxy += (a - mx) * (b - my); sxx += (a - mx) * (a - mx); }
      exponent = sxx > 0.0 ? sxy / sxx : 0.0;
    }
    table.growth_exponent = exponent;
    table.bounded = std::isfinite(table.max_ratio) && exponent <= 1.0 + 0.05;
  } else {
    bool nonincreasing = true;
    for (std::size_t i = argmax + 1; i < table.rows.size(); ++i) {
      if (table.rows[i].ratio > table.rows[i - 1].ratio * (1.0 + 1e-9) + 1e-15) nonincreasing = false;
    }
    table.bounded = std::isfinite(table.max_ratio) && nonincreasing;
  }
  return table;
}

}  // namespace spde_hmm
