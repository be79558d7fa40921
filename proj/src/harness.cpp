#include "spde_hmm/harness.hpp"

#include "spde_hmm/errors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace spde_hmm {

std::string to_string(ScalarMap map) { return map == ScalarMap::cos ? "cos" : "tanh"; }

ScalarMap parse_scalar_map(const std::string& name) {
  if (name == "cos") return ScalarMap::cos;
  if (name == "tanh") return ScalarMap::tanh;
  throw ConfigError("unknown test map '" + name + "' (cos, tanh)", "experiment.phi");
}

TestFunctional::TestFunctional(SpectralField weight, ScalarMap map) : weight_(std::move(weight)), map_(map) {
  const EigenBasis& basis = *weight_.basis();
  weighted_omega_ = weight_.grid_values().array() * basis.weights().array();
}

std::string TestFunctional::name() const {
  std::ostringstream os;
  os << to_string(map_) << "|w=";
  const auto& c = weight_.coefficients();
  int nonzero = 0;
  int last = 0;
  for (int n = 0; n < c.size(); ++n) {
    if (c(n) != 0.0) {
      ++nonzero;
      last = n + 1;
    }
  }
  if (nonzero == 1 && c(last - 1) == 1.0) {
    os << "e" << last;
  } else {
    os << "custom";
  }
  return os.str();
}

double TestFunctional::operator()(const SpectralField& x) const {
  if (!x.basis()->compatible(*weight_.basis())) throw StructuralError("test functional: basis mismatch");
  const Eigen::ArrayXd v = x.grid_values().array();
  const Eigen::ArrayXd mapped = map_ == ScalarMap::cos ? Eigen::ArrayXd(v.cos()) : Eigen::ArrayXd(v.tanh());
  return (weighted_omega_ * mapped).sum();
}

double TestFunctional::bound() const { return weighted_omega_.abs().sum(); }

RateFit fit_rate(const std::vector<double>& parameters, const std::vector<double>& errors,
                 const std::string& metric) {
  if (parameters.size() != errors.size()) throw DomainError("fit_rate: size mismatch");
  RateFit fit;
  fit.metric = metric;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < parameters.size(); ++i) {
    if (!(errors[i] > 0.0) || !(parameters[i] > 0.0)) {
      std::ostringstream os;
      os.precision(17);
      os << "excluded point parameter=" << parameters[i] << " error=" << errors[i] << " (nonpositive)";
      fit.warnings.push_back(os.str());
      continue;
    }
    lx.push_back(std::log(parameters[i]));
    ly.push_back(std::log(errors[i]));
  }
  const std::size_t n = lx.size();
  fit.points = static_cast<int>(n);
  if (n < 2) throw StatisticsError("fit_rate: fewer than 2 usable points for '" + metric + "'");

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw StatisticsError("fit_rate: parameters do not vary for '" + metric + "'");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (n > 2) {
    double ssr = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
      ssr += r * r;
    }
    fit.slope_se = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
  }
  return fit;
}

namespace {

// Per-replica record: squared L^2 distance and functional differences at each snapshot.
struct ReplicaTrace {
  std::vector<double> sq;                // [snapshot]
  std::vector<std::vector<double>> phi;  // [functional][snapshot]
};

std::vector<ReplicaTrace> run_replicas(int count, int threads, const std::function<ReplicaTrace(int)>& job) {
  std::vector<ReplicaTrace> out(static_cast<std::size_t>(count));
  const int workers = std::max(1, std::min(threads, count));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= count) return;
      try {
        out[static_cast<std::size_t>(k)] = job(k);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

ReplicaTrace compare(const TrajectoryRecord& a, const TrajectoryRecord& b, const std::vector<TestFunctional>& fns) {
  const std::size_t snaps = a.snapshots.size();
  if (b.snapshots.size() != snaps) throw StructuralError("compare: snapshot grids differ");
  ReplicaTrace trace;
  trace.sq.resize(snaps);
  trace.phi.assign(fns.size(), std::vector<double>(snaps));
  for (std::size_t t = 0; t < snaps; ++t) {
    trace.sq[t] = (a.snapshots[t].coefficients() - b.snapshots[t].coefficients()).squaredNorm();
    for (std::size_t f = 0; f < fns.size(); ++f) trace.phi[f][t] = fns[f](a.snapshots[t]) - fns[f](b.snapshots[t]);
  }
  return trace;
}

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

Moments moments(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, values.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0};
}

// Reduce K traces into one summary row and per-snapshot rows. `sup` picks the
// snapshot with the largest statistic; otherwise the terminal one.
void reduce(double parameter, const std::vector<ReplicaTrace>& traces, const std::vector<double>& times, bool sup,
            std::size_t n_fns, ErrorRow& row, std::vector<SeriesRow>& series) {
  const std::size_t K = traces.size();
  const std::size_t S = times.size();
  if (K < 2) throw StatisticsError("at least 2 replicas are required");
  const double k = static_cast<double>(K);

  std::vector<double> column(K);
  std::vector<double> sum_sq(S, 0.0);
  std::vector<double> rms(S), rms_se(S);
  std::vector<std::vector<Moments>> weak(n_fns, std::vector<Moments>(S));
  for (std::size_t t = 0; t < S; ++t) {
    for (std::size_t i = 0; i < K; ++i) column[i] = traces[i].sq[t];
    const Moments m = moments(column);
    sum_sq[t] = m.mean * k;
    rms[t] = std::sqrt(m.mean);
    rms_se[t] = rms[t] > 0.0 ? m.se / (2.0 * rms[t]) : 0.0;
    for (std::size_t f = 0; f < n_fns; ++f) {
      for (std::size_t i = 0; i < K; ++i) column[i] = traces[i].phi[f][t];
      weak[f][t] = moments(column);
    }
    SeriesRow sr;
    sr.parameter = parameter;
    sr.time = times[t];
    sr.strong = rms[t];
    sr.strong_se = rms_se[t];
    for (std::size_t f = 0; f < n_fns; ++f) {
      sr.weak.push_back(std::abs(weak[f][t].mean));
      sr.weak_se.push_back(weak[f][t].se);
    }
    series.push_back(std::move(sr));
  }

  auto reduce_strong = [&](const std::vector<double>& sums, double count) {
    if (!sup) return std::sqrt(std::max(0.0, sums[S - 1] / count));
    double best = 0.0;
    for (std::size_t t = 0; t < S; ++t) best = std::max(best, std::sqrt(std::max(0.0, sums[t] / count)));
    return best;
  };

  row.parameter = parameter;
  row.replicas = static_cast<int>(K);
  row.strong = reduce_strong(sum_sq, k);
  std::size_t t_strong = S - 1;
  if (sup) t_strong = static_cast<std::size_t>(std::max_element(rms.begin(), rms.end()) - rms.begin());
  row.strong_time = times[t_strong];

  // Jackknife over replicas for the (sup of the) RMS distance.
  std::vector<double> loo(K);
  std::vector<double> sums(S);
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t t = 0; t < S; ++t) sums[t] = sum_sq[t] - traces[i].sq[t];
    loo[i] = reduce_strong(sums, k - 1.0);
  }
  double loo_mean = 0.0;
  for (double v : loo) loo_mean += v;
  loo_mean /= k;
  double loo_ss = 0.0;
  for (double v : loo) loo_ss += (v - loo_mean) * (v - loo_mean);
  row.strong_se = std::sqrt((k - 1.0) / k * loo_ss);

  for (std::size_t f = 0; f < n_fns; ++f) {
    std::size_t t_weak = S - 1;
    if (sup) {
      for (std::size_t t = 0; t < S; ++t) {
        if (std::abs(weak[f][t].mean) > std::abs(weak[f][t_weak].mean)) t_weak = t;
      }
    }
    row.weak.push_back(std::abs(weak[f][t_weak].mean));
    row.weak_se.push_back(weak[f][t_weak].se);
    row.weak_time.push_back(times[t_weak]);
  }
}

std::uint32_t replica_id(std::size_t sweep_index, int replicas, int k) {
  const std::uint64_t id = static_cast<std::uint64_t>(sweep_index) * static_cast<std::uint64_t>(replicas) +
                           static_cast<std::uint64_t>(k);
  if (id > std::numeric_limits<std::uint32_t>::max()) throw ConfigError("too many replicas", "experiment.replicas");
  return static_cast<std::uint32_t>(id);
}

std::vector<double> column_of(const std::vector<ErrorRow>& rows, const std::function<double(const ErrorRow&)>& get) {
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(get(r));
  return out;
}

// Fit that records "undefined" instead of throwing when nothing is positive.
RateFit try_fit(const std::vector<double>& x, const std::vector<double>& y, const std::string& metric) {
  try {
    return fit_rate(x, y, metric);
  } catch (const StatisticsError& e) {
    RateFit fit;
    fit.metric = metric;
    fit.slope = std::numeric_limits<double>::quiet_NaN();
    fit.slope_se = std::numeric_limits<double>::quiet_NaN();
    fit.intercept = std::numeric_limits<double>::quiet_NaN();
    fit.warnings.push_back(e.what());
    return fit;
  }
}

void add_fits(ErrorReport& report, bool strong) {
  const auto x = column_of(report.rows, [](const ErrorRow& r) { return r.parameter; });
  if (strong) report.fits.push_back(try_fit(x, column_of(report.rows, [](const ErrorRow& r) { return r.strong; }), "strong"));
  for (std::size_t f = 0; f < report.functionals.size(); ++f) {
    report.fits.push_back(try_fit(x, column_of(report.rows, [f](const ErrorRow& r) { return r.weak[f]; }),
                                  "weak:" + report.functionals[f]));
  }
}

ErrorReport coupled_epsilon_study(const ExperimentSetup& setup, const std::vector<double>& epsilons, int replicas,
                                  const std::string& name) {
  if (replicas < 2) throw StatisticsError("at least 2 replicas are required");
  if (epsilons.empty()) throw ConfigError("needs at least one value", "experiment.epsilons");

  ErrorReport report;
  report.experiment = name;
  report.parameter_name = "epsilon";
  report.time_reduction = "sup";
  report.manifest.seed = setup.seed;
  for (const auto& fn : setup.functionals) report.functionals.push_back(fn.name());

  for (std::size_t e = 0; e < epsilons.size(); ++e) {
    HmmParams p = setup.params;
    p.epsilon = epsilons[e];
    p.M = 0;
    p.Ma = 1;
    p = p.resolved();
    p.validate();
    IntegrationOptions averaged_options;
    averaged_options.step = p.fine_step();

    std::vector<double> times;
    auto job = [&](int k) {
      const std::uint32_t id = replica_id(e, replicas, k);
      const auto fine = integrate(Scheme::direct, setup.system, setup.x0, setup.y0, p, setup.seed, id);
      const auto avg = integrate(Scheme::averaged, setup.system, setup.x0, setup.y0, p, setup.seed, id, averaged_options);
      return compare(fine, avg, setup.functionals);
    };
    const auto traces = run_replicas(replicas, setup.threads, job);
    for (int n = 0; n <= p.macro_steps(); ++n) times.push_back(n * p.dt);

    ErrorRow row;
    reduce(epsilons[e], traces, times, true, setup.functionals.size(), row, report.series);
    report.rows.push_back(std::move(row));
    report.manifest.entries.push_back({epsilons[e], replica_id(e, replicas, 0), static_cast<std::uint32_t>(replicas),
                                       {to_string(StreamRole::slow_noise), to_string(StreamRole::fast_noise)}});
  }
  return report;
}

}  // namespace

ErrorReport strong_error_vs_epsilon(const ExperimentSetup& setup, const std::vector<double>& epsilons, int replicas) {
  ErrorReport report = coupled_epsilon_study(setup, epsilons, replicas, "rate-strong");
  add_fits(report, true);
  return report;
}

ErrorReport weak_error_vs_epsilon(const ExperimentSetup& setup, const std::vector<double>& epsilons, int replicas) {
  if (setup.functionals.empty()) throw ConfigError("weak study needs a test functional", "experiment.phi");
  ErrorReport report = coupled_epsilon_study(setup, epsilons, replicas, "rate-weak");
  add_fits(report, false);
  return report;
}

ErrorReport hmm_gap_vs_Ma(const ExperimentSetup& setup, const std::vector<int>& windows, int replicas,
                          int m_factor) {
  if (replicas < 2) throw StatisticsError("at least 2 replicas are required");
  if (windows.empty()) throw ConfigError("needs at least one value", "experiment.Ma_list");
  if (m_factor < 1) throw ConfigError("must be positive", "experiment.M_factor");

  ErrorReport report;
  report.experiment = "hmm-sweep";
  report.parameter_name = "Ma";
  report.time_reduction = "terminal";
  report.manifest.seed = setup.seed;
  for (const auto& fn : setup.functionals) report.functionals.push_back(fn.name());

  for (std::size_t w = 0; w < windows.size(); ++w) {
    HmmParams p = setup.params;
    p.Ma = windows[w];
    p.M = m_factor * windows[w];
    p.validate();

    auto job = [&](int k) {
      const std::uint32_t id = replica_id(w, replicas, k);
      const auto hmm = integrate(Scheme::hmm, setup.system, setup.x0, setup.y0, p, setup.seed, id);
      const auto ref = integrate(Scheme::tau_averaged, setup.system, setup.x0, setup.y0, p, setup.seed, id);
      return compare(hmm, ref, setup.functionals);
    };
    const auto traces = run_replicas(replicas, setup.threads, job);
    std::vector<double> times;
    for (int n = 0; n <= p.macro_steps(); ++n) times.push_back(n * p.dt);

    ErrorRow row;
    reduce(static_cast<double>(windows[w]), traces, times, false, setup.functionals.size(), row, report.series);
    report.rows.push_back(std::move(row));
    report.manifest.entries.push_back({static_cast<double>(windows[w]), replica_id(w, replicas, 0),
                                       static_cast<std::uint32_t>(replicas),
                                       {to_string(StreamRole::slow_noise), to_string(StreamRole::fast_noise)}});
  }
  add_fits(report, true);
  return report;
}

MixingSums mixing_sums(int M, int Ma, double tau, double c) {
  if (Ma < 1 || Ma > M) throw DomainError("mixing_sums: requires 1 <= Ma <= M");
  if (!(tau > 0.0) || !(c > 0.0)) throw DomainError("mixing_sums: tau and c must be positive");
  const double x = c * tau;
  const double r = std::exp(-x);
  const double n = static_cast<double>(Ma);
  const double one_minus_r = -std::expm1(-x);
  const double one_minus_rn = -std::expm1(-x * n);

  MixingSums out;
  // sum_{m=M-Ma+1}^{M} r^m = r^{M-Ma+1} (1 - r^Ma) / (1 - r)
  out.r1 = std::exp(-x * static_cast<double>(M - Ma + 1)) * one_minus_rn / one_minus_r / n;

  // sum_{d=1}^{n-1} (n - d) r^d
  double pairs = 0.0;
  if (n * x < 1e-3) {
    double rd = 1.0;
    for (int d = 1; d < Ma; ++d) {
      rd *= r;
      pairs += (n - d) * rd;
    }
  } else {
    pairs = r * (n * one_minus_r - one_minus_rn) / (one_minus_r * one_minus_r);
  }
  out.r2 = pairs / (n * n);
  return out;
}

BalancedDelta balance_delta(double epsilon, double alpha, double gamma) {
  if (!(epsilon > 0.0)) throw DomainError("balance_delta: epsilon must be positive");
  if (!(gamma > 0.0 && gamma <= alpha && alpha < 1.0)) {
    throw DomainError("balance_delta: requires 0 < gamma <= alpha < 1");
  }
  const double exponent = 1.0 + alpha - gamma;
  return {std::pow(epsilon, 1.0 / exponent), alpha / exponent};
}

std::string to_string(RateVerdict verdict) {
  switch (verdict) {
    case RateVerdict::pass: return "PASS";
    case RateVerdict::fail: return "FAIL";
    case RateVerdict::inconclusive: return "INCONCLUSIVE";
  }
  return "FAIL";
}

RateAssessment assess_rate(const RateFit& fit, const std::vector<double>& parameters,
                           const std::vector<double>& errors, const std::vector<double>& errors_se, double lo,
                           double hi, double competing) {
  RateAssessment a;
  a.slope = fit.slope;
  a.slope_se = fit.slope_se;
  std::ostringstream os;
  os.precision(4);
  if (!std::isfinite(fit.slope)) {
    a.detail = "slope undefined";
    return a;
  }
  const bool in_window = fit.slope >= lo && fit.slope <= hi;
  a.competing_in_interval = std::abs(fit.slope - competing) <= 2.0 * fit.slope_se;

  // Indices sorted by parameter.
  std::vector<std::size_t> order(parameters.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return parameters[i] < parameters[j]; });
  if (order.size() >= 3) {
    auto scaled = [&](std::size_t i, double value) { return value / std::pow(parameters[i], competing); };
    const std::size_t s0 = order[0], s1 = order[1], big = order.back();
    const double u0 = scaled(s0, errors[s0] + 2.0 * errors_se[s0]);
    const double u1 = scaled(s1, errors[s1] + 2.0 * errors_se[s1]);
    const double ref = scaled(big, errors[big]);
    a.certificate = u0 < ref && u1 < ref && u0 < u1;
    os << "upper(err)/eps^" << competing << " at two smallest eps: " << u0 << ", " << u1 << "; point value at largest: "
       << ref << "; ";
  }

  os << "slope " << fit.slope << " +- " << fit.slope_se << " window [" << lo << ", " << hi << "]";
  if (a.competing_in_interval) {
    a.verdict = a.certificate ? RateVerdict::inconclusive : RateVerdict::fail;
    os << "; interval covers " << competing;
  } else {
    a.verdict = in_window ? RateVerdict::pass : RateVerdict::fail;
  }
  a.detail = os.str();
  return a;
}

}  // namespace spde_hmm
