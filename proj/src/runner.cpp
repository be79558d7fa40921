#include "spde_hmm/runner.hpp"

#include "spde_hmm/config.hpp"
#include "spde_hmm/errors.hpp"
#include "spde_hmm/harness.hpp"
#include "spde_hmm/poisson.hpp"
#include "spde_hmm/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <ostream>

namespace spde_hmm {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

struct Context {
  RunConfig config;
  std::string seed_source;
  fs::path out;
  int threads = 1;
};

ordered_json number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json manifest(const Context& ctx, ordered_json entries) {
  return {{"seed", ctx.config.seed},
          {"seed_source", ctx.seed_source},
          {"generator", "philox4x32-10"},
          {"stream_key", "(seed, replica, role)"},
          {"entries", std::move(entries)}};
}

std::string envelope(const Context& ctx, const std::string& subcommand, ordered_json results, ordered_json entries) {
  ordered_json j;
  j["subcommand"] = subcommand;
  j["results"] = std::move(results);
  j["seed_manifest"] = manifest(ctx, std::move(entries));
  j["config"] = serialize_config(ctx.config);
  return j.dump(2) + "\n";
}

void write_error_report(const Context& ctx, const ErrorReport& report) {
  write_text(ctx.out / "report.json", report_json(report, serialize_config(ctx.config), ctx.seed_source));
  write_text(ctx.out / "errors.csv", errors_table(report).str());
  write_text(ctx.out / "rates.csv", rates_table(report).str());
}

void require_fit(const ErrorReport& report, const std::string& metric) {
  for (const auto& f : report.fits) {
    if (f.metric == metric && f.points >= 2) return;
  }
  throw StatisticsError("rate for '" + metric + "' is undefined (fewer than 2 positive errors)");
}

void cmd_simulate(const Context& ctx, std::ostream& out) {
  const RunConfig& c = ctx.config;
  const SlowFastSystem system = make_system(c);
  const HmmParams params = make_params(c).resolved();
  const auto x0 = c.x0.build(system.basis);
  const auto y0 = c.y0.build(system.basis);
  const auto record = integrate(c.scheme, system, x0, y0, params, c.seed, 0);

  CsvTable table({"time", "l2_norm", "sup_norm", "coefficient_1"});
  for (std::size_t i = 0; i < record.times.size(); ++i) {
    const auto& x = record.snapshots[i];
    table.row({format_number(record.times[i]), format_number(x.l2_norm()),
               format_number(lp_norm(x, std::numeric_limits<double>::infinity())), format_number(x.coefficient(1))});
  }
  write_text(ctx.out / "trajectory.csv", table.str());

  ordered_json roles = ordered_json::array();
  for (const auto& s : record.streams) roles.push_back(to_string(s.role));
  ordered_json results{{"scheme", to_string(c.scheme)},
                       {"snapshots", record.times.size()},
                       {"M", params.M},
                       {"final_l2_norm", record.snapshots.back().l2_norm()}};
  if (c.scheme == Scheme::direct) results["fine_step"] = params.fine_step();
  write_text(ctx.out / "report.json",
             envelope(ctx, "simulate", results,
                      ordered_json::array({{{"replica", 0}, {"roles", roles}}})));
  out << "simulate: " << record.times.size() << " snapshots, |x(T)| = " << record.snapshots.back().l2_norm() << "\n";
}

void cmd_invariant(const Context& ctx, std::ostream& out) {
  const RunConfig& c = ctx.config;
  const int modes = c.invariant_modes;
  const BasisPtr basis = EigenBasis::make(modes);
  CovarianceKind kind = c.fast;
  if (kind.family == CovarianceFamily::single && kind.mode > modes) throw ConfigError("mode beyond invariant.modes", "fast.covariance");
  const FastProcessModel model(CovarianceSpec(basis, kind), c.fast_gamma_max);
  const int K = c.invariant_samples;
  const double tau = c.tau;

  // Micro chain from 0 after invariant.steps steps; exact OU over the same span.
  Eigen::MatrixXd micro(K, modes);
  Eigen::MatrixXd exact(K, modes);
  const OuTransition transition(model, c.invariant_steps * tau);
  for (int i = 0; i < K; ++i) {
    RngStream chain_rng(c.seed, static_cast<std::uint32_t>(i), StreamRole::fast_noise);
    MicroSchemeState state{SpectralField::zero(basis), tau, 0};
    for (int s = 0; s < c.invariant_steps; ++s) state = micro_step(state, model, chain_rng);
    micro.row(i) = state.field.coefficients().transpose();
    RngStream ou_rng(c.seed, static_cast<std::uint32_t>(K + i), StreamRole::fast_noise);
    exact.row(i) = transition.apply(SpectralField::zero(basis), ou_rng).coefficients().transpose();
  }

  const Eigen::VectorXd v_tau = invariant_law_moments(model, tau);
  const Eigen::VectorXd v = invariant_law_moments(model, 0.0);
  CsvTable table({"law", "mode", "tau", "closed_form", "mc_variance", "mc_se", "z_score"});
  double max_z = 0.0;
  auto emit = [&](const std::string& law, const Eigen::MatrixXd& samples, const Eigen::VectorXd& target, double t) {
    for (int n = 0; n < modes; ++n) {
      const Eigen::ArrayXd sq = samples.col(n).array().square();
      const double mean = sq.mean();
      const double sd = std::sqrt((sq - mean).square().sum() / (K - 1.0));
      const double se = sd / std::sqrt(static_cast<double>(K));
      const double z = se > 0.0 ? (mean - target(n)) / se : 0.0;
      max_z = std::max(max_z, std::abs(z));
      table.row({law, std::to_string(n + 1), format_number(t), format_number(target(n)), format_number(mean),
                 format_number(se), format_number(z)});
    }
  };
  emit("micro", micro, v_tau, tau);
  emit("exact", exact, v, 0.0);
  write_text(ctx.out / "invariant.csv", table.str());

  // Closed-form sum_n (v_n - v_n^tau) against tau.
  const BasisPtr wide = EigenBasis::make(c.invariant_sum_modes, c.invariant_sum_modes + 1);
  CovarianceKind wide_kind = c.fast;
  if (wide_kind.family == CovarianceFamily::single && wide_kind.mode > c.invariant_sum_modes) wide_kind.mode = 1;
  const FastProcessModel wide_model(CovarianceSpec(wide, wide_kind), c.fast_gamma_max);
  const double v_sum = invariant_law_moments(wide_model, 0.0).sum();
  CsvTable sums({"tau", "sum_gap"});
  std::vector<double> gaps;
  for (double t : c.invariant_taus) {
    gaps.push_back(v_sum - invariant_law_moments(wide_model, t).sum());
    sums.row({format_number(t), format_number(gaps.back())});
  }
  write_text(ctx.out / "invariant_sums.csv", sums.str());

  ordered_json results{{"samples", K}, {"modes", modes}, {"tau", tau}, {"steps", c.invariant_steps}, {"max_abs_z", max_z}};
  CsvTable rates({"experiment", "metric", "slope", "slope_se", "intercept", "points"});
  if (c.invariant_taus.size() >= 2) {
    const RateFit fit = fit_rate(c.invariant_taus, gaps, "sum_gap");
    rates.row({"invariant-check", fit.metric, format_number(fit.slope), format_number(fit.slope_se),
               format_number(fit.intercept), std::to_string(fit.points)});
    results["sum_gap_slope"] = number(fit.slope);
  }
  write_text(ctx.out / "rates.csv", rates.str());
  write_text(ctx.out / "report.json",
             envelope(ctx, "invariant-check", results,
                      ordered_json::array({{{"first_replica", 0}, {"replica_count", 2 * K}, {"roles", {"fast-noise"}}}})));
  out << "invariant-check: max |z| = " << max_z << "\n";
}

void cmd_rate(const Context& ctx, bool weak, std::ostream& out) {
  const ExperimentSetup setup = make_setup(ctx.config, ctx.threads);
  const ErrorReport report = weak ? weak_error_vs_epsilon(setup, ctx.config.epsilons, ctx.config.replicas)
                                  : strong_error_vs_epsilon(setup, ctx.config.epsilons, ctx.config.replicas);
  write_error_report(ctx, report);
  for (const auto& f : report.fits) out << report.experiment << " " << f.metric << ": slope " << f.slope << " +- " << f.slope_se << "\n";
  require_fit(report, weak ? "weak:" + report.functionals.front() : "strong");
}

void cmd_hmm_sweep(const Context& ctx, std::ostream& out) {
  const ExperimentSetup setup = make_setup(ctx.config, ctx.threads);
  const ErrorReport report = hmm_gap_vs_Ma(setup, ctx.config.Ma_list, ctx.config.replicas, ctx.config.M_factor);
  write_error_report(ctx, report);
  for (const auto& f : report.fits) out << "hmm-sweep " << f.metric << ": slope " << f.slope << " +- " << f.slope_se << "\n";
  require_fit(report, "strong");
}

void cmd_poisson(const Context& ctx, std::ostream& out) {
  const RunConfig& c = ctx.config;
  const SlowFastSystem system = make_system(c);
  BoundSweep sweep{c.poisson_x.build(system.basis), c.poisson_y.build(system.basis),
                   c.poisson_theta.build(system.basis), c.poisson_scales, c.poisson_gamma, 0.0, c.poisson_horizon};
  const BoundTable table = bound_probe(c.poisson_lemma, sweep, system.reaction, system.fast);

  CsvTable csv({"lemma", "scale", "value", "bound", "ratio"});
  for (const auto& r : table.rows) {
    csv.row({to_string(table.lemma), format_number(r.scale), format_number(r.value), format_number(r.bound),
             format_number(r.ratio)});
  }
  write_text(ctx.out / "poisson.csv", csv.str());

  PoissonProbe probe{sweep.x, sweep.y, sweep.theta};
  probe.horizon = c.poisson_horizon;
  const GeneratorCheck check = generator_identity_check(probe, system.reaction, system.fast, c.poisson_fd_step);
  ordered_json results{{"lemma", to_string(table.lemma)},
                       {"max_ratio", number(table.max_ratio)},
                       {"growth_exponent", table.growth_exponent},
                       {"bounded", table.bounded},
                       {"generator", {{"value", check.generator_value}, {"source", check.source}, {"residual", check.residual}}}};
  write_text(ctx.out / "report.json", envelope(ctx, "poisson-check", results, ordered_json::array()));
  out << "poisson-check: max ratio " << table.max_ratio << ", generator residual " << check.residual << "\n";
}

void cmd_mixing(const Context& ctx, std::ostream& out) {
  const RunConfig& c = ctx.config;
  const HmmParams p = make_params(c).resolved();
  const double rate = c.mixing_c > 0.0 ? c.mixing_c : EigenBasis::make(c.n_modes)->eigenvalue(1);
  // First row: the configured (M, Ma); then the window sweep at M = M_factor * Ma.
  std::vector<std::pair<int, int>> pairs{{p.M, p.Ma}};
  for (int Ma : c.Ma_list) pairs.emplace_back(c.M_factor * Ma, Ma);
  CsvTable csv({"M", "Ma", "tau", "c", "R1", "R2"});
  ordered_json rows = ordered_json::array();
  for (const auto& [M, Ma] : pairs) {
    const MixingSums sums = mixing_sums(M, Ma, p.tau, rate);
    csv.row({std::to_string(M), std::to_string(Ma), format_number(p.tau), format_number(rate),
             format_number(sums.r1), format_number(sums.r2)});
    rows.push_back({{"M", M}, {"Ma", Ma}, {"R1", sums.r1}, {"R2", sums.r2}});
  }
  write_text(ctx.out / "mixing.csv", csv.str());
  ordered_json results{{"tau", p.tau}, {"c", rate}, {"rows", rows}};
  write_text(ctx.out / "report.json", envelope(ctx, "mixing-sums", results, ordered_json::array()));
  out << "mixing-sums: R1 = " << rows[0]["R1"].get<double>() << ", R2 = " << rows[0]["R2"].get<double>() << " at M = "
      << p.M << ", Ma = " << p.Ma << "; " << pairs.size() - 1 << " sweep rows\n";
}

std::uint64_t parse_seed(const std::string& text, const std::string& field) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigIssues({{field, "expected a nonnegative integer seed, got '" + text + "'", 0}});
  }
  return v;
}

ordered_json error_record(const std::string& kind, int code, const std::string& message,
                          const std::vector<ConfigIssues::Issue>& issues) {
  ordered_json j{{"status", "error"}, {"kind", kind}, {"exit_code", code}, {"message", message}};
  ordered_json list = ordered_json::array();
  for (const auto& i : issues) list.push_back({{"field", i.field}, {"message", i.message}, {"line", i.line}});
  j["issues"] = list;
  return j;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"simulate", "invariant-check", "rate-strong", "rate-weak",
                                                 "hmm-sweep", "poisson-check", "mixing-sums"};
  return names;
}

int run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  std::optional<fs::path> out_dir;
  if (options.out_dir) out_dir = *options.out_dir;

  auto fail = [&](const std::string& kind, int code, const std::string& message,
                  const std::vector<ConfigIssues::Issue>& issues) {
    const ordered_json record = error_record(kind, code, message, issues);
    err << record.dump() << "\n";
    if (out_dir) {
      try {
        write_text(*out_dir / "error.json", record.dump(2) + "\n");
      } catch (const std::exception&) {
        // Nowhere to persist the record; stderr already has it.
      }
    }
    return code;
  };

  try {
    const auto& names = subcommands();
    if (std::find(names.begin(), names.end(), options.subcommand) == names.end()) {
      throw ConfigIssues({{"subcommand", "unknown subcommand '" + options.subcommand + "'", 0}});
    }
    Context ctx;
    ctx.config = load_config(options.config_path);
    ctx.seed_source = "config";
    if (options.seed_env && !options.seed_env->empty()) {
      ctx.config.seed = parse_seed(*options.seed_env, "SPDE_HMM_SEED");
      ctx.seed_source = "env:SPDE_HMM_SEED";
    }
    if (options.seed) {
      ctx.config.seed = *options.seed;
      ctx.seed_source = "flag:--seed";
    }
    if (options.out_dir) ctx.config.output_dir = *options.out_dir;
    out_dir = ctx.config.output_dir;
    ctx.out = *out_dir;
    if (options.threads < 1) throw ConfigIssues({{"--threads", "must be >= 1", 0}});
    ctx.threads = options.threads;

    fs::create_directories(ctx.out);
    fs::remove(ctx.out / "error.json");

    const std::map<std::string, std::function<void()>> dispatch = {
        {"simulate", [&] { cmd_simulate(ctx, out); }},
        {"invariant-check", [&] { cmd_invariant(ctx, out); }},
        {"rate-strong", [&] { cmd_rate(ctx, false, out); }},
        {"rate-weak", [&] { cmd_rate(ctx, true, out); }},
        {"hmm-sweep", [&] { cmd_hmm_sweep(ctx, out); }},
        {"poisson-check", [&] { cmd_poisson(ctx, out); }},
        {"mixing-sums", [&] { cmd_mixing(ctx, out); }},
    };
    dispatch.at(options.subcommand)();
    return exit_ok;
  } catch (const ConfigIssues& e) {
    return fail("config", exit_config, e.what(), e.issues());
  } catch (const ConfigError& e) {
    return fail("config", exit_config, e.what(), {{e.field().empty() ? "(config)" : e.field(), e.what(), 0}});
  } catch (const StatisticsError& e) {
    return fail("statistics", exit_statistics, e.what(), {});
  } catch (const DomainError& e) {
    return fail("domain", exit_failure, e.what(), {});
  } catch (const StructuralError& e) {
    return fail("structural", exit_failure, e.what(), {});
  } catch (const std::exception& e) {
    return fail("runtime", exit_failure, e.what(), {});
  }
}

}  // namespace spde_hmm
