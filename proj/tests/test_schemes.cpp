#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spde_hmm/errors.hpp"
#include "spde_hmm/schemes.hpp"

#include <cmath>

using namespace spde_hmm;

namespace {

SlowFastSystem make_system(int n, FastCoupling family, SlowPart g, double c, const std::string& slow = "powerlaw(1)",
                           const std::string& fast = "powerlaw(1)") {
  const auto basis = EigenBasis::make(n);
  return {basis, CovarianceSpec(basis, CovarianceKind::parse(slow)),
          FastProcessModel(CovarianceSpec(basis, CovarianceKind::parse(fast))), NonlinearitySpec(family, g, c)};
}

HmmParams params(double eps, int n_modes) {
  HmmParams p;
  p.epsilon = eps;
  p.dt = 0.0625;
  p.T = 0.25;
  p.tau = 0.1;
  p.n_modes = n_modes;
  return p;
}

double max_diff(const SpectralField& a, const SpectralField& b) {
  return (a.coefficients() - b.coefficients()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("parameter resolution and validation") {
  HmmParams p = params(0.1, 8);
  CHECK(p.resolved().M == 7);  // ceil(0.0625 / 0.01)
  p.dt = 0.05;
  p.T = 0.5;
  CHECK(p.resolved().M == 5);  // exact ratio does not round up
  CHECK(p.macro_steps() == 10);
  p.epsilon = 0.0625;
  p.dt = 0.0625;
  p.fine_ratio = 64;
  CHECK(p.fine_step() == doctest::Approx(0.0625 / 64));

  HmmParams bad = params(0.1, 8);
  bad.Ma = 8;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = params(0.1, 8);
  bad.T = 0.3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = params(0.0, 8);
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(parse_scheme("tau_averaged") == Scheme::tau_averaged);
  CHECK_THROWS_AS(parse_scheme("rk4"), ConfigError);
}

TEST_CASE("noise-free linear problem reproduces (1 + dt lambda)^{-n}") {
  auto sys = make_system(6, FastCoupling::affine_y, SlowPart::zero, 0.0, "zero", "white");
  const auto x0 = SpectralField(sys.basis, Eigen::VectorXd::Ones(6));
  const auto y0 = SpectralField::zero(sys.basis);
  const HmmParams p = params(0.5, 6);
  const auto rec = integrate(Scheme::averaged, sys, x0, y0, p, 1, 0);
  REQUIRE(rec.snapshots.size() == 5);
  for (std::size_t k = 0; k < rec.snapshots.size(); ++k) {
    for (int n = 1; n <= 6; ++n) {
      const double expected = std::pow(1.0 + p.dt * sys.basis->eigenvalue(n), -static_cast<double>(k));
      CHECK(rec.snapshots[k].coefficient(n) == doctest::Approx(expected).epsilon(1e-13));
    }
  }
}

TEST_CASE("one averaged step equals S_dt(x + dt F-bar(x) + dW)") {
  auto sys = make_system(8, FastCoupling::cosine_y, SlowPart::sin, 1.0);
  const auto x = SpectralField::mode(sys.basis, 1, 0.9);
  const auto avg = AveragedCoefficient::for_model(sys.reaction, sys.fast, 0.0);
  RngStream rng(3, 0, StreamRole::slow_noise);
  const double dt = 0.01;
  const auto next = step_averaged(x, avg, dt, sys.slow_noise, rng);
  RngStream replay(3, 0, StreamRole::slow_noise);
  const auto dw = wiener_increment(sys.slow_noise, dt, replay);
  const auto expected = resolvent_apply(x + dt * apply_averaged(avg, x) + dw, dt);
  CHECK(max_diff(next, expected) < 1e-14);
}

TEST_CASE("one HMM macro step averages F over the last Ma chain states") {
  auto sys = make_system(6, FastCoupling::quadratic_y, SlowPart::tanh, 0.8, "white", "white");
  const auto x = SpectralField::mode(sys.basis, 2, 0.4);
  HmmParams p = params(0.1, 6);
  p.M = 5;
  p.Ma = 3;
  MicroSchemeState chain{SpectralField::mode(sys.basis, 1, 0.2), p.tau, 0};
  RngStream slow(9, 4, StreamRole::slow_noise), fast(9, 4, StreamRole::fast_noise);
  const auto result = step_hmm_macro(x, chain, p, sys.reaction, sys.slow_noise, sys.fast, slow, fast);

  // Oracle: rebuild the chain by hand and average F on the coefficient side.
  RngStream fast2(9, 4, StreamRole::fast_noise), slow2(9, 4, StreamRole::slow_noise);
  MicroSchemeState s = chain;
  SpectralField sum = SpectralField::zero(sys.basis);
  for (int m = 1; m <= p.M; ++m) {
    s = micro_step(s, sys.fast, fast2);
    if (m > p.M - p.Ma) sum = sum + apply_F(sys.reaction, x, s.field);
  }
  const auto drift = (1.0 / p.Ma) * sum;
  const auto dw = wiener_increment(sys.slow_noise, p.dt, slow2);
  const auto expected = resolvent_apply(x + p.dt * drift + dw, p.dt);
  CHECK(max_diff(result.x, expected) < 1e-13);
  CHECK(max_diff(result.chain.field, s.field) == 0.0);
  CHECK(result.chain.step == 5);
}

TEST_CASE("one direct step couples implicit Euler and the exact OU transition") {
  auto sys = make_system(6, FastCoupling::cosine_y, SlowPart::sin, 1.0);
  const auto x = SpectralField::mode(sys.basis, 1, 1.0);
  const auto y = SpectralField::mode(sys.basis, 2, 0.3);
  const double eps = 0.1, h = 0.1 / 64;
  RngStream slow(1, 0, StreamRole::slow_noise), fast(1, 0, StreamRole::fast_noise);
  const auto r = step_direct(x, y, eps, h, sys.reaction, sys.slow_noise, sys.fast, slow, fast);
  RngStream slow2(1, 0, StreamRole::slow_noise), fast2(1, 0, StreamRole::fast_noise);
  const auto dw = wiener_increment(sys.slow_noise, h, slow2);
  CHECK(max_diff(r.x, resolvent_apply(x + h * apply_F(sys.reaction, x, y) + dw, h)) < 1e-14);
  CHECK(max_diff(r.y, ou_exact_step(y, sys.fast, h / eps, fast2)) < 1e-15);
  CHECK_THROWS_AS(step_direct(x, y, eps, 0.2, sys.reaction, sys.slow_noise, sys.fast, slow, fast), ConfigError);
}

TEST_CASE("direct and averaged runs share the slow noise increment by increment") {
  auto sys = make_system(8, FastCoupling::cosine_y, SlowPart::sin, 1.0);
  const auto x0 = SpectralField::mode(sys.basis, 1);
  const auto y0 = SpectralField::zero(sys.basis);
  const HmmParams p = params(0.25, 8);
  std::vector<Eigen::VectorXd> a, b;
  IntegrationOptions oa;
  oa.slow_increment_log = &a;
  IntegrationOptions ob;
  ob.slow_increment_log = &b;
  ob.step = p.fine_step();
  integrate(Scheme::direct, sys, x0, y0, p, 17, 2, oa);
  integrate(Scheme::averaged, sys, x0, y0, p, 17, 2, ob);
  REQUIRE(a.size() == b.size());
  REQUIRE(a.size() == static_cast<std::size_t>(std::llround(p.T / p.fine_step())));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK((a[i] - b[i]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("zero coupling makes every scheme pathwise equal to its average") {
  auto sys = make_system(8, FastCoupling::quadratic_y, SlowPart::sin, 0.0);
  const auto x0 = SpectralField::mode(sys.basis, 1);
  const auto y0 = SpectralField::mode(sys.basis, 2);
  HmmParams p = params(0.25, 8);
  p.Ma = 2;
  IntegrationOptions fine;
  fine.step = p.fine_step();
  const auto d = integrate(Scheme::direct, sys, x0, y0, p, 5, 0);
  const auto a = integrate(Scheme::averaged, sys, x0, y0, p, 5, 0, fine);
  const auto h = integrate(Scheme::hmm, sys, x0, y0, p, 5, 0);
  const auto t = integrate(Scheme::tau_averaged, sys, x0, y0, p, 5, 0);
  for (std::size_t k = 0; k < d.snapshots.size(); ++k) {
    CHECK(max_diff(d.snapshots[k], a.snapshots[k]) == 0.0);
    CHECK(max_diff(h.snapshots[k], t.snapshots[k]) == 0.0);
  }
}

TEST_CASE("trajectories are reproducible and replica-specific") {
  auto sys = make_system(8, FastCoupling::cosine_y, SlowPart::sin, 1.0);
  const auto x0 = SpectralField::mode(sys.basis, 1);
  const auto y0 = SpectralField::zero(sys.basis);
  HmmParams p = params(0.1, 8);
  p.Ma = 3;
  for (Scheme s : {Scheme::hmm, Scheme::direct, Scheme::averaged, Scheme::tau_averaged}) {
    const auto r1 = integrate(s, sys, x0, y0, p, 77, 1);
    const auto r2 = integrate(s, sys, x0, y0, p, 77, 1);
    const auto r3 = integrate(s, sys, x0, y0, p, 77, 2);
    CHECK(max_diff(r1.snapshots.back(), r2.snapshots.back()) == 0.0);
    CHECK(max_diff(r1.snapshots.back(), r3.snapshots.back()) > 0.0);
    CHECK(r1.times.back() == doctest::Approx(p.T));
  }
}

TEST_CASE("HMM with a long window approaches the tau-averaged scheme") {
  auto sys = make_system(8, FastCoupling::quadratic_y, SlowPart::sin, 1.0, "powerlaw(1)", "white");
  const auto x0 = SpectralField::mode(sys.basis, 1);
  const auto y0 = SpectralField::zero(sys.basis);
  HmmParams p = params(0.1, 8);
  auto gap = [&](int Ma) {
    p.Ma = Ma;
    p.M = 2 * Ma;
    double s = 0.0;
    for (std::uint32_t k = 0; k < 24; ++k) {
      const auto a = integrate(Scheme::hmm, sys, x0, y0, p, 3, k);
      const auto b = integrate(Scheme::tau_averaged, sys, x0, y0, p, 3, k);
      s += (a.snapshots.back() - b.snapshots.back()).l2_norm();
    }
    return s / 24;
  };
  CHECK(gap(256) < 0.5 * gap(4));
}
