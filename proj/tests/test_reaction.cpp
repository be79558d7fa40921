#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spde_hmm/errors.hpp"
#include "spde_hmm/reaction.hpp"

#include <cmath>
#include <numbers>

using namespace spde_hmm;

namespace {

// E[h(Z)], Z ~ N(0, var), by a wide midpoint rule.
double gaussian_mean(const std::function<double(double)>& h, double var) {
  const double sd = std::sqrt(var);
  const int n = 200000;
  const double a = -12.0, b = 12.0, dz = (b - a) / n;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = a + (i + 0.5) * dz;
    s += h(sd * z) * std::exp(-0.5 * z * z);
  }
  return s * dz / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

TEST_CASE("Gaussian means of the fast parts") {
  for (double var : {0.01, 0.3, 2.0}) {
    const NonlinearitySpec affine(FastCoupling::affine_y, SlowPart::zero, 1.0);
    const NonlinearitySpec quad(FastCoupling::quadratic_y, SlowPart::zero, 1.0);
    const NonlinearitySpec cosine(FastCoupling::cosine_y, SlowPart::zero, 1.0);
    CHECK(std::abs(affine.fast_gaussian_mean(var) - gaussian_mean([](double z) { return z; }, var)) < 1e-10);
    CHECK(quad.fast_gaussian_mean(var) == doctest::Approx(gaussian_mean([](double z) { return z * z; }, var)).epsilon(1e-9));
    CHECK(cosine.fast_gaussian_mean(var) ==
          doctest::Approx(gaussian_mean([](double z) { return std::cos(z); }, var)).epsilon(1e-9));
  }
}

TEST_CASE("derivatives agree with central differences") {
  const double h = 1e-5;
  for (SlowPart g : {SlowPart::sin, SlowPart::tanh, SlowPart::linear_clipped}) {
    for (FastCoupling f : {FastCoupling::affine_y, FastCoupling::quadratic_y, FastCoupling::cosine_y}) {
      const NonlinearitySpec s(f, g, 0.7);
      for (double z : {-1.3, 0.2, 2.1}) {
        CHECK(s.d_z1(z, 0.4) == doctest::Approx((s(z + h, 0.4) - s(z - h, 0.4)) / (2 * h)).epsilon(1e-8));
        CHECK(s.d_z2(0.4, z) == doctest::Approx((s(0.4, z + h) - s(0.4, z - h)) / (2 * h)).epsilon(1e-8));
        CHECK(s.d_z1z1(z, 0.4) ==
              doctest::Approx((s.d_z1(z + h, 0.4) - s.d_z1(z - h, 0.4)) / (2 * h)).epsilon(1e-7));
      }
      CHECK(s.lipschitz_x() == 1.0);
    }
  }
  CHECK(NonlinearitySpec(FastCoupling::cosine_y, SlowPart::zero, 1.0).lipschitz_x() == 0.0);
}

TEST_CASE("pointwise variance equals sum v_n e_n(xi)^2") {
  const auto basis = EigenBasis::make(8);
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(8, 0.1, 0.01);
  const Eigen::VectorXd s2 = pointwise_variance(*basis, v);
  for (int j = 0; j < basis->grid_size(); j += 7) {
    double expected = 0.0;
    for (int n = 1; n <= 8; ++n) expected += v(n - 1) * std::pow(EigenBasis::eigenfunction(n, basis->nodes()(j)), 2);
    CHECK(s2(j) == doctest::Approx(expected).epsilon(1e-13));
  }
}

TEST_CASE("averaged coefficients have the pointwise closed forms") {
  const auto basis = EigenBasis::make(8);
  const FastProcessModel model(CovarianceSpec::white(basis));
  const Eigen::ArrayXd x = SpectralField::mode(basis, 2, 0.8).grid_values().array();
  for (double tau : {0.0, 0.1}) {
    const Eigen::ArrayXd s2 = pointwise_variance(*basis, invariant_law_moments(model, tau)).array();
    const AveragedCoefficient quad =
        AveragedCoefficient::for_model(NonlinearitySpec(FastCoupling::quadratic_y, SlowPart::tanh, 0.5), model, tau);
    const AveragedCoefficient cosine =
        AveragedCoefficient::for_model(NonlinearitySpec(FastCoupling::cosine_y, SlowPart::sin, 2.0), model, tau);
    CHECK(((quad.evaluate(x) - (x.tanh() + 0.5 * s2)).abs().maxCoeff()) < 1e-14);
    CHECK(((cosine.evaluate(x) - (x.sin() + 2.0 * (-0.5 * s2).exp())).abs().maxCoeff()) < 1e-14);
  }
}

TEST_CASE("F-bar matches Monte Carlo averages over mu coefficient by coefficient") {
  const auto basis = EigenBasis::make(6);
  const FastProcessModel model(CovarianceSpec::white(basis));
  const SpectralField x = SpectralField::mode(basis, 1, 0.5);
  const int K = 20000;
  for (FastCoupling family : {FastCoupling::quadratic_y, FastCoupling::cosine_y}) {
    const NonlinearitySpec spec(family, SlowPart::sin, 1.0);
    const AveragedCoefficient avg = AveragedCoefficient::for_model(spec, model, 0.0);
    const Eigen::ArrayXd exact = apply_averaged(avg, x).coefficients().array();
    Eigen::ArrayXd s1 = Eigen::ArrayXd::Zero(6), s2 = Eigen::ArrayXd::Zero(6);
    RngStream rng(8, 0, StreamRole::fast_noise);
    for (int k = 0; k < K; ++k) {
      const Eigen::ArrayXd f = apply_F(spec, x, sample_invariant(model, 0.0, rng)).coefficients().array();
      s1 += f;
      s2 += f.square();
    }
    const Eigen::ArrayXd mean = s1 / K;
    const Eigen::ArrayXd se = ((s2 / K - mean.square()) / K).sqrt();
    for (int n = 0; n < 6; ++n) CHECK(std::abs(mean(n) - exact(n)) < 4.0 * se(n) + 1e-14);
  }
}

TEST_CASE("zero coupling removes the fast dependence exactly") {
  const auto basis = EigenBasis::make(8);
  const NonlinearitySpec spec(FastCoupling::quadratic_y, SlowPart::sin, 0.0);
  const FastProcessModel model(CovarianceSpec::white(basis));
  const auto x = SpectralField::mode(basis, 1, 0.3);
  const auto y = SpectralField::mode(basis, 3, 5.0);
  const auto avg = AveragedCoefficient::for_model(spec, model, 0.0);
  CHECK((apply_F(spec, x, y).coefficients() - apply_averaged(avg, x).coefficients()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(averaging_residual(spec, avg, x, y).l2_norm() == 0.0);
}

TEST_CASE("parsing") {
  CHECK(parse_fast_coupling("cosine_y") == FastCoupling::cosine_y);
  CHECK(parse_slow_part("linear_clipped") == SlowPart::linear_clipped);
  CHECK_THROWS_AS(parse_fast_coupling("cubic_y"), ConfigError);
  CHECK_THROWS_AS(parse_slow_part("exp"), ConfigError);
}
