#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spde_hmm/errors.hpp"
#include "spde_hmm/poisson.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace spde_hmm;

namespace {

constexpr double pi = std::numbers::pi;

SpectralField random_field(const BasisPtr& basis, unsigned seed, double scale = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd c(basis->n_modes());
  for (int i = 0; i < c.size(); ++i) c(i) = scale * normal(gen) / (1.0 + i);
  return SpectralField(basis, c);
}

}  // namespace

TEST_CASE("affine family: corrector is <(-A)^{-1} y, theta>") {
  const auto basis = EigenBasis::make(8);
  const FastProcessModel model(CovarianceSpec::white(basis));
  const NonlinearitySpec spec(FastCoupling::affine_y, SlowPart::zero, 1.0);
  const auto e1 = SpectralField::mode(basis, 1);
  PoissonProbe probe{random_field(basis, 1), e1, e1};
  CHECK(std::abs(evaluate_corrector(probe, spec, model) - 1.0 / (pi * pi)) < 1e-10);

  probe.y = SpectralField::zero(basis);
  CHECK(std::abs(evaluate_corrector(probe, spec, model)) < 1e-14);

  const NonlinearitySpec spec2(FastCoupling::affine_y, SlowPart::sin, 1.7);
  for (unsigned s = 0; s < 3; ++s) {
    PoissonProbe p{random_field(basis, 10 + s), random_field(basis, 20 + s), random_field(basis, 30 + s)};
    CHECK(std::abs(evaluate_corrector(p, spec2, model) - affine_corrector(spec2, p.y, p.theta)) < 1e-10);
  }
}

TEST_CASE("quadratic family, one fast mode: closed form c <e_1^2, theta> (y_1^2 - v_1) / (2 lambda_1)") {
  const auto basis = EigenBasis::make(4);
  const FastProcessModel model(CovarianceSpec::single(basis, 1));
  const NonlinearitySpec spec(FastCoupling::quadratic_y, SlowPart::tanh, 0.6);
  const double l1 = basis->eigenvalue(1);
  const double v1 = 1.0 / (2.0 * l1);
  const double e1sq_e1 = 8.0 * std::sqrt(2.0) / (3.0 * pi);  // <e_1^2, e_1>
  const double e1sq_e3 = -8.0 * std::sqrt(2.0) / (15.0 * pi);  // <e_1^2, e_3>
  for (double a : {0.0, 0.3, 1.2}) {
    PoissonProbe probe{SpectralField::mode(basis, 2, 0.4), SpectralField::mode(basis, 1, a), SpectralField::mode(basis, 1)};
    const double expected = 0.6 * e1sq_e1 * (a * a - v1) / (2.0 * l1);
    CHECK(evaluate_corrector(probe, spec, model) == doctest::Approx(expected).epsilon(1e-9));
    probe.theta = SpectralField::mode(basis, 3);
    CHECK(evaluate_corrector(probe, spec, model) == doctest::Approx(0.6 * e1sq_e3 * (a * a - v1) / (2.0 * l1)).epsilon(1e-9));
  }
}

TEST_CASE("quadratic family agrees with a Monte Carlo evaluation of the time integral") {
  const auto basis = EigenBasis::make(4);
  const FastProcessModel model(CovarianceSpec::single(basis, 1));
  const NonlinearitySpec spec(FastCoupling::quadratic_y, SlowPart::zero, 1.0);
  const double a = 0.5;
  PoissonProbe probe{SpectralField::zero(basis), SpectralField::mode(basis, 1, a), SpectralField::mode(basis, 1)};
  const double value = evaluate_corrector(probe, spec, model);

  // Scalar OU paths Y_1 with exact transitions; trapezoid in time over [0, T_q].
  const double l1 = basis->eigenvalue(1);
  const double v1 = 1.0 / (2.0 * l1);
  const double horizon = probe.resolved_horizon();
  const int steps = 1500;
  const double dt = horizon / steps;
  const double decay = std::exp(-l1 * dt);
  const double spread = std::sqrt(v1 * -std::expm1(-2.0 * l1 * dt));
  const double weight = 8.0 * std::sqrt(2.0) / (3.0 * pi);
  const int K = 100000;
  std::mt19937_64 gen(2024);
  std::normal_distribution<double> normal;
  double s1 = 0.0, s2 = 0.0;
  for (int k = 0; k < K; ++k) {
    double y = a;
    double integral = 0.5 * (y * y - v1);
    for (int i = 1; i <= steps; ++i) {
      y = decay * y + spread * normal(gen);
      integral += (i == steps ? 0.5 : 1.0) * (y * y - v1);
    }
    const double sample = weight * integral * dt;
    s1 += sample;
    s2 += sample * sample;
  }
  const double mean = s1 / K;
  const double se = std::sqrt((s2 / K - mean * mean) / K);
  CHECK(std::abs(value - mean) < 4.0 * se);
}

TEST_CASE("linearity in theta and quadrature refinement") {
  const auto basis = EigenBasis::make(6);
  const FastProcessModel model(CovarianceSpec::white(basis));
  const NonlinearitySpec spec(FastCoupling::cosine_y, SlowPart::sin, 1.0);
  const auto x = random_field(basis, 3);
  const auto y = random_field(basis, 4, 0.3);
  const auto t1 = random_field(basis, 5);
  const auto t2 = random_field(basis, 6);
  auto phi = [&](const SpectralField& theta, int refinement = 1) {
    PoissonProbe p{x, y, theta};
    p.panel_refinement = refinement;
    return evaluate_corrector(p, spec, model);
  };
  const double a = 0.7, b = -1.9;
  CHECK(std::abs(phi(a * t1 + b * t2) - (a * phi(t1) + b * phi(t2))) < 1e-10);
  CHECK(std::abs(phi(t1, 2) - phi(t1)) < 1e-8);
  const NonlinearitySpec quad(FastCoupling::quadratic_y, SlowPart::sin, 1.0);
  PoissonProbe p{x, y, t1};
  const double base = evaluate_corrector(p, quad, model);
  p.panel_refinement = 2;
  CHECK(std::abs(evaluate_corrector(p, quad, model) - base) < 1e-8);
}

TEST_CASE("corrector is centred under mu") {
  const auto basis = EigenBasis::make(4);
  const FastProcessModel model(CovarianceSpec::white(basis));
  const NonlinearitySpec spec(FastCoupling::cosine_y, SlowPart::sin, 1.0);
  const auto x = SpectralField::mode(basis, 1, 0.5);
  const auto theta = SpectralField::mode(basis, 1);
  const int K = 600;
  double s1 = 0.0, s2 = 0.0;
  RngStream rng(31, 0, StreamRole::fast_noise);
  for (int k = 0; k < K; ++k) {
    PoissonProbe p{x, sample_invariant(model, 0.0, rng), theta};
    const double v = evaluate_corrector(p, spec, model);
    s1 += v;
    s2 += v * v;
  }
  const double mean = s1 / K;
  const double se = std::sqrt((s2 / K - mean * mean) / K);
  CHECK(std::abs(mean) < 4.0 * se);
}

TEST_CASE("generator identity") {
  SUBCASE("affine family, N = 8") {
    const auto basis = EigenBasis::make(8);
    const FastProcessModel model(CovarianceSpec::white(basis));
    const NonlinearitySpec spec(FastCoupling::affine_y, SlowPart::tanh, 1.0);
    PoissonProbe p{random_field(basis, 41), random_field(basis, 42), random_field(basis, 43)};
    CHECK(generator_identity_check(p, spec, model).residual <= 1e-6);
  }
  SUBCASE("no fast dependence") {
    const auto basis = EigenBasis::make(8);
    const FastProcessModel model(CovarianceSpec::white(basis));
    const NonlinearitySpec spec(FastCoupling::cosine_y, SlowPart::sin, 0.0);
    PoissonProbe p{random_field(basis, 44), random_field(basis, 45), random_field(basis, 46)};
    CHECK(generator_identity_check(p, spec, model).residual <= 1e-10);
  }
  SUBCASE("quadratic family, N = 4, one fast mode") {
    const auto basis = EigenBasis::make(4);
    const FastProcessModel model(CovarianceSpec::single(basis, 1));
    const NonlinearitySpec spec(FastCoupling::quadratic_y, SlowPart::sin, 1.0);
    PoissonProbe p{random_field(basis, 47), random_field(basis, 48), random_field(basis, 49)};
    CHECK(generator_identity_check(p, spec, model).residual <= 1e-4);
  }
}

TEST_CASE("horizon must make the mixing tail negligible") {
  const auto basis = EigenBasis::make(4);
  const FastProcessModel model(CovarianceSpec::white(basis));
  const NonlinearitySpec spec(FastCoupling::affine_y, SlowPart::zero, 1.0);
  PoissonProbe p{SpectralField::zero(basis), SpectralField::mode(basis, 1), SpectralField::mode(basis, 1)};
  p.horizon = 10.0 / basis->eigenvalue(1);
  CHECK_THROWS_AS(evaluate_corrector(p, spec, model), ConfigError);
  p.horizon = 24.0 / basis->eigenvalue(1);
  CHECK_NOTHROW(evaluate_corrector(p, spec, model));
}

TEST_CASE("bound probes") {
  const auto basis = EigenBasis::make(8);
  const FastProcessModel model(CovarianceSpec::white(basis));
  const NonlinearitySpec spec(FastCoupling::affine_y, SlowPart::zero, 1.0);

  BoundSweep sweep{SpectralField::mode(basis, 1, 0.5), SpectralField::mode(basis, 1) + SpectralField::mode(basis, 2, 0.5),
                   SpectralField::mode(basis, 1), {0.0, 1.0, 2.0, 4.0, 8.0}};
  const BoundTable t0 = bound_probe(PoissonLemma::phi_0, sweep, spec, model);
  CHECK(t0.rows[0].value < 1e-14);
  CHECK(t0.rows[0].value <= t0.rows[0].bound);
  for (std::size_t i = 2; i < t0.rows.size(); ++i) {
    CHECK(t0.rows[i].value / t0.rows[i].scale == doctest::Approx(t0.rows[1].value).epsilon(1e-9));
  }
  CHECK(t0.growth_exponent == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(t0.bounded);

  // Flat y: the ratio goes like lambda_k^{gamma - 1} and must decrease.
  BoundSweep modes = sweep;
  modes.y = SpectralField(basis, Eigen::VectorXd::Ones(8));
  modes.scales = {1, 2, 3, 4, 5, 6, 7, 8};
  const BoundTable t1 = bound_probe(PoissonLemma::phi_0ter, modes, spec, model);
  REQUIRE(t1.rows.size() == 8);
  CHECK(t1.bounded);
  CHECK(t1.max_ratio == t1.rows[0].ratio);
  for (std::size_t i = 1; i < t1.rows.size(); ++i) {
    const double k = t1.rows[i].scale;
    CHECK(t1.rows[i].ratio / t1.rows[0].ratio == doctest::Approx(std::pow(k, 2.0 * (modes.gamma - 1.0))).epsilon(1e-9));
  }

  // Random y: values follow the per-mode closed form and the constant is finite.
  modes.y = random_field(basis, 9);
  const BoundTable t2 = bound_probe(PoissonLemma::phi_0ter, modes, spec, model);
  CHECK(std::isfinite(t2.max_ratio));
  for (const auto& r : t2.rows) {
    const int k = static_cast<int>(r.scale);
    CHECK(r.value == doctest::Approx(std::abs(modes.y.coefficient(k)) / basis->eigenvalue(k)).epsilon(1e-9));
    CHECK(r.ratio <= t2.max_ratio);
  }
}
