#include "spde_hmm/schemes.hpp"

#include "spde_hmm/errors.hpp"

#include <cmath>
#include <string>

namespace spde_hmm {

namespace {

constexpr double kIntegralTolerance = 1e-9;

// n such that n * step == span, or -1.
long integral_ratio(double span, double step) {
  const double r = span / step;
  const double n = std::round(r);
  if (std::abs(r - n) > kIntegralTolerance * std::max(1.0, r)) return -1;
  return static_cast<long>(n);
}

// S_dt(x + dt * drift + dW) on raw coefficients.
Eigen::VectorXd implicit_euler_update(const EigenBasis& basis, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& drift, const Eigen::VectorXd& increment, double dt) {
  return ((x + dt * drift + increment).array() / (1.0 + dt * basis.eigenvalues().array())).matrix();
}

Eigen::VectorXd draw_increment(const CovarianceSpec& cov, double dt, RngStream& rng,
                               std::vector<Eigen::VectorXd>* log) {
  Eigen::VectorXd inc = wiener_increment(cov, dt, rng).coefficients();
  if (log) log->push_back(inc);
  return inc;
}

void check_direct_step(double epsilon, double h, const FastProcessModel& fast) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive", "epsilon");
  if (!(h > 0.0)) throw ConfigError("fine step must be positive", "direct.fine_ratio");
  if (h > epsilon / fast.spectral_gap()) {
    throw ConfigError("fine step " + std::to_string(h) + " does not resolve the fast scale (needs h <= epsilon / lambda_1)",
                      "direct.fine_ratio");
  }
}

}  // namespace

HmmParams HmmParams::resolved() const {
  HmmParams p = *this;
  if (p.M == 0 && epsilon > 0.0 && tau > 0.0) {
    // Guard against 1e-16 overshoot turning an exact ratio into ratio + 1.
    p.M = static_cast<int>(std::ceil(dt / (epsilon * tau) * (1.0 - 1e-12)));
  }
  return p;
}

void HmmParams::validate() const {
  if (!(epsilon > 0.0 && epsilon <= 1.0)) throw ConfigError("must lie in (0, 1]", "epsilon");
  if (!(dt > 0.0)) throw ConfigError("must be positive", "dt");
  if (!(tau > 0.0)) throw ConfigError("must be positive", "tau");
  if (!(T >= 0.0)) throw ConfigError("must be nonnegative", "T");
  if (integral_ratio(T, dt) < 0) throw ConfigError("T / dt must be an integer", "T");
  if (n_modes < 1) throw ConfigError("must be positive", "basis.n_modes");
  if (!(delta >= 0.0)) throw ConfigError("must be nonnegative", "delta");
  if (fine_ratio < 1) throw ConfigError("must be positive", "direct.fine_ratio");
  const int m = resolved().M;
  if (m < 1) throw ConfigError("must be positive", "M");
  if (Ma < 1 || Ma > m) throw ConfigError("averaging window must satisfy 1 <= Ma <= M", "Ma");
}

int HmmParams::macro_steps() const { return static_cast<int>(integral_ratio(T, dt)); }

double HmmParams::fine_step() const {
  const double k = std::ceil(dt * fine_ratio / epsilon * (1.0 - 1e-12));
  return dt / k;
}

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::hmm: return "hmm";
    case Scheme::averaged: return "averaged";
    case Scheme::tau_averaged: return "tau_averaged";
    case Scheme::direct: return "direct";
  }
  return "hmm";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "hmm") return Scheme::hmm;
  if (name == "averaged") return Scheme::averaged;
  if (name == "tau_averaged") return Scheme::tau_averaged;
  if (name == "direct") return Scheme::direct;
  throw ConfigError("unknown scheme '" + name + "' (hmm, averaged, tau_averaged, direct)", "scheme");
}

namespace {

HmmStepResult hmm_macro_impl(const SpectralField& x, const MicroSchemeState& chain, const HmmParams& params,
                             const NonlinearitySpec& spec, const CovarianceSpec& slow_noise,
                             const FastProcessModel& fast, RngStream& slow_rng, RngStream& fast_rng,
                             std::vector<Eigen::VectorXd>* log) {
  const int M = params.M;
  const int Ma = params.Ma;
  const EigenBasis& basis = *x.basis();
  const bool coupled = spec.coupling() != 0.0;

  MicroSchemeState state = chain;
  Eigen::ArrayXd window_sum = Eigen::ArrayXd::Zero(basis.grid_size());
  for (int m = 1; m <= M; ++m) {
    state = micro_step(state, fast, fast_rng);
    if (coupled && m >= M - Ma + 1) {
      window_sum += spec.evaluate_fast(basis.synthesize(state.field.coefficients()).array());
    }
  }
  const Eigen::ArrayXd slow_part = spec.evaluate_slow(basis.synthesize(x.coefficients()).array());
  const Eigen::ArrayXd averaged = coupled ? Eigen::ArrayXd(slow_part + spec.coupling() * window_sum / Ma) : slow_part;
  const Eigen::VectorXd drift = basis.project(averaged.matrix());
  const Eigen::VectorXd inc = draw_increment(slow_noise, params.dt, slow_rng, log);
  return {SpectralField(x.basis(), implicit_euler_update(basis, x.coefficients(), drift, inc, params.dt)),
          std::move(state)};
}

SpectralField averaged_impl(const SpectralField& x, const AveragedCoefficient& avg, double dt,
                            const CovarianceSpec& slow_noise, RngStream& slow_rng,
                            std::vector<Eigen::VectorXd>* log) {
  const EigenBasis& basis = *x.basis();
  const Eigen::VectorXd drift = basis.project(avg.evaluate(basis.synthesize(x.coefficients()).array()).matrix());
  const Eigen::VectorXd inc = draw_increment(slow_noise, dt, slow_rng, log);
  return SpectralField(x.basis(), implicit_euler_update(basis, x.coefficients(), drift, inc, dt));
}

DirectStepResult direct_impl(const SpectralField& x, const SpectralField& y, double h, const NonlinearitySpec& spec,
                             const CovarianceSpec& slow_noise, const OuTransition& transition,
                             RngStream& slow_rng, RngStream& fast_rng, std::vector<Eigen::VectorXd>* log) {
  const EigenBasis& basis = *x.basis();
  const Eigen::VectorXd drift = apply_F(spec, x, y).coefficients();
  const Eigen::VectorXd inc = draw_increment(slow_noise, h, slow_rng, log);
  SpectralField x_next(x.basis(), implicit_euler_update(basis, x.coefficients(), drift, inc, h));
  return {std::move(x_next), transition.apply(y, fast_rng)};
}

}  // namespace

HmmStepResult step_hmm_macro(const SpectralField& x, const MicroSchemeState& chain, const HmmParams& params,
                             const NonlinearitySpec& spec, const CovarianceSpec& slow_noise,
                             const FastProcessModel& fast, RngStream& slow_rng, RngStream& fast_rng) {
  const HmmParams p = params.resolved();
  if (p.M < 1 || p.Ma < 1 || p.Ma > p.M) throw ConfigError("averaging window must satisfy 1 <= Ma <= M", "Ma");
  if (!(p.dt > 0.0)) throw ConfigError("must be positive", "dt");
  require_same_basis(x, chain.field);
  return hmm_macro_impl(x, chain, p, spec, slow_noise, fast, slow_rng, fast_rng, nullptr);
}

SpectralField step_averaged(const SpectralField& x, const AveragedCoefficient& avg, double dt,
                            const CovarianceSpec& slow_noise, RngStream& slow_rng) {
  if (!x.basis()->compatible(*avg.basis())) throw StructuralError("step_averaged: basis mismatch");
  return averaged_impl(x, avg, dt, slow_noise, slow_rng, nullptr);
}

DirectStepResult step_direct(const SpectralField& x, const SpectralField& y, double epsilon, double h,
                             const NonlinearitySpec& spec, const CovarianceSpec& slow_noise,
                             const FastProcessModel& fast, RngStream& slow_rng, RngStream& fast_rng) {
  check_direct_step(epsilon, h, fast);
  require_same_basis(x, y);
  return direct_impl(x, y, h, spec, slow_noise, OuTransition(fast, h / epsilon), slow_rng, fast_rng, nullptr);
}

CovarianceSpec effective_slow_noise(const SlowFastSystem& system, const HmmParams& params) {
  if (params.delta == 0.0) return system.slow_noise;
  return system.slow_noise.with_delta(system.slow_noise.delta() + params.delta);
}

TrajectoryRecord integrate(Scheme scheme, const SlowFastSystem& system, const SpectralField& x0,
                           const SpectralField& y0, const HmmParams& params, std::uint64_t seed,
                           std::uint32_t replica, const IntegrationOptions& options) {
  const HmmParams p = params.resolved();
  p.validate();
  if (p.n_modes != system.basis->n_modes()) throw ConfigError("does not match the basis", "basis.n_modes");
  require_same_basis(x0, y0);
  require_same_basis(x0, SpectralField::zero(system.basis));

  const CovarianceSpec slow_noise = effective_slow_noise(system, p);
  const StreamId slow_id{seed, replica, StreamRole::slow_noise};
  const StreamId fast_id{seed, replica, StreamRole::fast_noise};
  RngStream slow_rng(slow_id);
  RngStream fast_rng(fast_id);
  auto* log = options.slow_increment_log;

  TrajectoryRecord record;
  record.streams.push_back(slow_id);
  if (scheme == Scheme::hmm || scheme == Scheme::direct) record.streams.push_back(fast_id);

  const int snapshots = p.macro_steps();
  record.times.reserve(snapshots + 1);
  record.snapshots.reserve(snapshots + 1);
  record.times.push_back(0.0);
  record.snapshots.push_back(x0);

  SpectralField x = x0;
  switch (scheme) {
    case Scheme::hmm: {
      MicroSchemeState chain{y0, p.tau, 0};
      for (int n = 1; n <= snapshots; ++n) {
        auto result = hmm_macro_impl(x, chain, p, system.reaction, slow_noise, system.fast, slow_rng, fast_rng, log);
        x = std::move(result.x);
        chain = std::move(result.chain);
        record.times.push_back(n * p.dt);
        record.snapshots.push_back(x);
      }
      record.final_fast_state = chain.field;
      break;
    }
    case Scheme::averaged:
    case Scheme::tau_averaged: {
      const double tau = scheme == Scheme::averaged ? 0.0 : p.tau;
      const AveragedCoefficient avg = AveragedCoefficient::for_model(system.reaction, system.fast, tau);
      const double step = options.step.value_or(p.dt);
      const long sub = integral_ratio(p.dt, step);
      if (sub < 1) throw ConfigError("averaged step must divide dt", "dt");
      for (int n = 1; n <= snapshots; ++n) {
        for (long k = 0; k < sub; ++k) x = averaged_impl(x, avg, step, slow_noise, slow_rng, log);
        record.times.push_back(n * p.dt);
        record.snapshots.push_back(x);
      }
      break;
    }
    case Scheme::direct: {
      const double h = p.fine_step();
      check_direct_step(p.epsilon, h, system.fast);
      const long sub = integral_ratio(p.dt, h);
      const OuTransition transition(system.fast, h / p.epsilon);
      SpectralField y = y0;
      for (int n = 1; n <= snapshots; ++n) {
        for (long k = 0; k < sub; ++k) {
          auto result = direct_impl(x, y, h, system.reaction, slow_noise, transition, slow_rng, fast_rng, log);
          x = std::move(result.x);
          y = std::move(result.y);
        }
        record.times.push_back(n * p.dt);
        record.snapshots.push_back(x);
      }
      record.final_fast_state = y;
      break;
    }
  }
  return record;
}

}  // namespace spde_hmm
