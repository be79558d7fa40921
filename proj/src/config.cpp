#include "spde_hmm/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <sstream>

namespace spde_hmm {

namespace {

std::string join_issues(const std::vector<ConfigIssues::Issue>& issues) {
  std::ostringstream os;
  for (std::size_t i = 0; i < issues.size(); ++i) {
    if (i) os << "; ";
    if (issues[i].line > 0) os << "line " << issues[i].line << ": ";
    os << issues[i].field << ": " << issues[i].message;
  }
  return os.str();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char ch : s) {
    if (ch == '(') ++depth;
    if (ch == ')') --depth;
    if (ch == sep && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

double to_double(const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) {
    throw ConfigError("expected a number, got '" + t + "'");
  }
  return v;
}

long long to_integer(const std::string& s) {
  const std::string t = trim(s);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError("expected an integer, got '" + t + "'");
  }
  return v;
}

int to_int(const std::string& s) {
  const long long v = to_integer(s);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError("integer out of range: '" + trim(s) + "'");
  }
  return static_cast<int>(v);
}

std::uint64_t to_u64(const std::string& s) {
  const std::string t = trim(s);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw ConfigError("expected a nonnegative integer, got '" + t + "'");
  }
  return v;
}

bool to_bool(const std::string& s) {
  const std::string t = trim(s);
  if (t == "true") return true;
  if (t == "false") return false;
  throw ConfigError("expected true or false, got '" + t + "'");
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <class T, class F>
std::string fmt_list(const std::vector<T>& values, F&& f) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += f(values[i]);
  }
  return out;
}

std::vector<double> to_double_list(const std::string& s) {
  std::vector<double> out;
  if (trim(s).empty()) return out;
  for (const auto& item : split(s, ',')) out.push_back(to_double(item));
  return out;
}

std::vector<int> to_int_list(const std::string& s) {
  std::vector<int> out;
  if (trim(s).empty()) return out;
  for (const auto& item : split(s, ',')) out.push_back(to_int(item));
  return out;
}

std::string covariance_text(const CovarianceKind& k) {
  switch (k.family) {
    case CovarianceFamily::powerlaw: return "powerlaw(" + fmt(k.exponent) + ")";
    default: return k.name();
  }
}

CovarianceKind with_family(const std::string& text, double delta) {
  CovarianceKind k = CovarianceKind::parse(text);
  k.delta = delta;
  return k;
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = to_u64(v); },
       [](const RunConfig& c) { return std::to_string(c.seed); }},
      {"basis.n_modes", [](RunConfig& c, const std::string& v) { c.n_modes = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.n_modes); }},
      {"basis.grid_points", [](RunConfig& c, const std::string& v) { c.grid_points = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.grid_points); }},
      {"slow.covariance", [](RunConfig& c, const std::string& v) { c.slow = with_family(v, c.slow.delta); },
       [](const RunConfig& c) { return covariance_text(c.slow); }},
      {"slow.delta", [](RunConfig& c, const std::string& v) { c.slow.delta = to_double(v); },
       [](const RunConfig& c) { return fmt(c.slow.delta); }},
      {"fast.covariance", [](RunConfig& c, const std::string& v) { c.fast = with_family(v, c.fast.delta); },
       [](const RunConfig& c) { return covariance_text(c.fast); }},
      {"fast.delta", [](RunConfig& c, const std::string& v) { c.fast.delta = to_double(v); },
       [](const RunConfig& c) { return fmt(c.fast.delta); }},
      {"fast.gamma_max",
       [](RunConfig& c, const std::string& v) {
         if (trim(v) == "auto") c.fast_gamma_max.reset();
         else c.fast_gamma_max = to_double(v);
       },
       [](const RunConfig& c) { return c.fast_gamma_max ? fmt(*c.fast_gamma_max) : std::string("auto"); }},
      {"nonlinearity.family", [](RunConfig& c, const std::string& v) { c.family = parse_fast_coupling(trim(v)); },
       [](const RunConfig& c) { return to_string(c.family); }},
      {"nonlinearity.g", [](RunConfig& c, const std::string& v) { c.g = parse_slow_part(trim(v)); },
       [](const RunConfig& c) { return to_string(c.g); }},
      {"nonlinearity.c", [](RunConfig& c, const std::string& v) { c.c = to_double(v); },
       [](const RunConfig& c) { return fmt(c.c); }},
      {"init.x0", [](RunConfig& c, const std::string& v) { c.x0 = StateSpec::parse(v); },
       [](const RunConfig& c) { return c.x0.to_string(); }},
      {"init.y0", [](RunConfig& c, const std::string& v) { c.y0 = StateSpec::parse(v); },
       [](const RunConfig& c) { return c.y0.to_string(); }},
      {"scheme", [](RunConfig& c, const std::string& v) { c.scheme = parse_scheme(trim(v)); },
       [](const RunConfig& c) { return to_string(c.scheme); }},
      {"epsilon", [](RunConfig& c, const std::string& v) { c.epsilon = to_double(v); },
       [](const RunConfig& c) { return fmt(c.epsilon); }},
      {"dt", [](RunConfig& c, const std::string& v) { c.dt = to_double(v); },
       [](const RunConfig& c) { return fmt(c.dt); }},
      {"tau", [](RunConfig& c, const std::string& v) { c.tau = to_double(v); },
       [](const RunConfig& c) { return fmt(c.tau); }},
      {"M", [](RunConfig& c, const std::string& v) { c.M = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.M); }},
      {"Ma", [](RunConfig& c, const std::string& v) { c.Ma = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.Ma); }},
      {"T", [](RunConfig& c, const std::string& v) { c.T = to_double(v); },
       [](const RunConfig& c) { return fmt(c.T); }},
      {"delta", [](RunConfig& c, const std::string& v) { c.delta = to_double(v); },
       [](const RunConfig& c) { return fmt(c.delta); }},
      {"regular_case", [](RunConfig& c, const std::string& v) { c.regular_case = to_bool(v); },
       [](const RunConfig& c) { return std::string(c.regular_case ? "true" : "false"); }},
      {"direct.fine_ratio", [](RunConfig& c, const std::string& v) { c.fine_ratio = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.fine_ratio); }},
      {"experiment.epsilons", [](RunConfig& c, const std::string& v) { c.epsilons = to_double_list(v); },
       [](const RunConfig& c) { return fmt_list(c.epsilons, fmt); }},
      {"experiment.replicas", [](RunConfig& c, const std::string& v) { c.replicas = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.replicas); }},
      {"experiment.Ma_list", [](RunConfig& c, const std::string& v) { c.Ma_list = to_int_list(v); },
       [](const RunConfig& c) { return fmt_list(c.Ma_list, [](int i) { return std::to_string(i); }); }},
      {"experiment.M_factor", [](RunConfig& c, const std::string& v) { c.M_factor = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.M_factor); }},
      {"experiment.phi", [](RunConfig& c, const std::string& v) { c.phi = parse_scalar_map(trim(v)); },
       [](const RunConfig& c) { return to_string(c.phi); }},
      {"experiment.phi_mode", [](RunConfig& c, const std::string& v) { c.phi_mode = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.phi_mode); }},
      {"mixing.c", [](RunConfig& c, const std::string& v) { c.mixing_c = to_double(v); },
       [](const RunConfig& c) { return fmt(c.mixing_c); }},
      {"invariant.samples", [](RunConfig& c, const std::string& v) { c.invariant_samples = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.invariant_samples); }},
      {"invariant.modes", [](RunConfig& c, const std::string& v) { c.invariant_modes = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.invariant_modes); }},
      {"invariant.steps", [](RunConfig& c, const std::string& v) { c.invariant_steps = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.invariant_steps); }},
      {"invariant.taus", [](RunConfig& c, const std::string& v) { c.invariant_taus = to_double_list(v); },
       [](const RunConfig& c) { return fmt_list(c.invariant_taus, fmt); }},
      {"invariant.sum_modes", [](RunConfig& c, const std::string& v) { c.invariant_sum_modes = to_int(v); },
       [](const RunConfig& c) { return std::to_string(c.invariant_sum_modes); }},
      {"poisson.lemma", [](RunConfig& c, const std::string& v) { c.poisson_lemma = parse_poisson_lemma(trim(v)); },
       [](const RunConfig& c) { return to_string(c.poisson_lemma); }},
      {"poisson.scales", [](RunConfig& c, const std::string& v) { c.poisson_scales = to_double_list(v); },
       [](const RunConfig& c) { return fmt_list(c.poisson_scales, fmt); }},
      {"poisson.gamma", [](RunConfig& c, const std::string& v) { c.poisson_gamma = to_double(v); },
       [](const RunConfig& c) { return fmt(c.poisson_gamma); }},
      {"poisson.horizon", [](RunConfig& c, const std::string& v) { c.poisson_horizon = to_double(v); },
       [](const RunConfig& c) { return fmt(c.poisson_horizon); }},
      {"poisson.fd_step", [](RunConfig& c, const std::string& v) { c.poisson_fd_step = to_double(v); },
       [](const RunConfig& c) { return fmt(c.poisson_fd_step); }},
      {"poisson.x", [](RunConfig& c, const std::string& v) { c.poisson_x = StateSpec::parse(v); },
       [](const RunConfig& c) { return c.poisson_x.to_string(); }},
      {"poisson.y", [](RunConfig& c, const std::string& v) { c.poisson_y = StateSpec::parse(v); },
       [](const RunConfig& c) { return c.poisson_y.to_string(); }},
      {"poisson.theta", [](RunConfig& c, const std::string& v) { c.poisson_theta = StateSpec::parse(v); },
       [](const RunConfig& c) { return c.poisson_theta.to_string(); }},
      {"output.dir", [](RunConfig& c, const std::string& v) { c.output_dir = trim(v); },
       [](const RunConfig& c) { return c.output_dir; }},
  };
  return table;
}

const std::map<std::string, std::string>& aliases() {
  static const std::map<std::string, std::string> table = {{"micro.tau", "tau"}};
  return table;
}

void check(std::vector<ConfigIssues::Issue>& issues, bool ok, const std::string& field, const std::string& message) {
  if (!ok) issues.push_back({field, message, 0});
}

void check_state(std::vector<ConfigIssues::Issue>& issues, const StateSpec& s, int n_modes, const std::string& field) {
  for (const auto& [k, a] : s.terms) {
    if (k > n_modes) issues.push_back({field, "mode " + std::to_string(k) + " beyond basis.n_modes", 0});
  }
}

std::vector<ConfigIssues::Issue> collect_issues(const RunConfig& c) {
  std::vector<ConfigIssues::Issue> issues;
  check(issues, c.n_modes >= 1, "basis.n_modes", "must be >= 1");
  check(issues, c.grid_points == 0 || c.grid_points > c.n_modes, "basis.grid_points", "must be 0 (default) or exceed basis.n_modes");
  check(issues, c.slow.delta >= 0.0, "slow.delta", "must be nonnegative");
  check(issues, c.fast.delta >= 0.0, "fast.delta", "must be nonnegative");
  check(issues, c.slow.family != CovarianceFamily::single || c.slow.mode <= c.n_modes, "slow.covariance", "single(n) beyond basis.n_modes");
  check(issues, c.fast.family != CovarianceFamily::single || c.fast.mode <= c.n_modes, "fast.covariance", "single(n) beyond basis.n_modes");
  if (c.fast_gamma_max) {
    check(issues, *c.fast_gamma_max > 0.0 && *c.fast_gamma_max <= 0.5, "fast.gamma_max", "must lie in (0, 1/2]");
  }
  check(issues, c.epsilon > 0.0 && c.epsilon <= 1.0, "epsilon", "must lie in (0, 1]");
  check(issues, c.dt > 0.0, "dt", "must be positive");
  check(issues, c.tau > 0.0, "tau", "must be positive");
  check(issues, c.T >= 0.0, "T", "must be nonnegative");
  check(issues, c.M >= 0, "M", "must be >= 0 (0 derives M from dt / (epsilon tau))");
  check(issues, c.Ma >= 1, "Ma", "must be >= 1");
  check(issues, c.delta >= 0.0, "delta", "must be nonnegative");
  check(issues, c.fine_ratio >= 1, "direct.fine_ratio", "must be >= 1");
  if (c.dt > 0.0 && c.T >= 0.0) {
    const double r = c.T / c.dt;
    check(issues, std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, r), "T", "T / dt must be an integer");
  }
  if (c.dt > 0.0 && c.tau > 0.0 && c.epsilon > 0.0 && c.Ma >= 1 && c.M >= 0) {
    HmmParams p = make_params(c);
    p = p.resolved();
    check(issues, c.Ma <= p.M, "Ma", "must not exceed M (= " + std::to_string(p.M) + ")");
  }
  if (c.regular_case) {
    const double gamma = c.fast_gamma_max.value_or(c.fast.gamma_max());
    check(issues, c.slow.alpha_max() + gamma > 1.0, "regular_case",
          "requires alpha_max(slow) + gamma_max(fast) > 1");
    check(issues, c.slow.trace_class(), "regular_case", "requires a trace-class slow covariance");
  }
  for (double e : c.epsilons) {
    check(issues, e > 0.0 && e <= 1.0, "experiment.epsilons", "values must lie in (0, 1]");
  }
  check(issues, c.replicas >= 1, "experiment.replicas", "must be >= 1");
  for (int m : c.Ma_list) check(issues, m >= 1, "experiment.Ma_list", "values must be >= 1");
  check(issues, c.M_factor >= 1, "experiment.M_factor", "must be >= 1");
  check(issues, c.phi_mode >= 1 && c.phi_mode <= c.n_modes, "experiment.phi_mode", "must lie in 1..basis.n_modes");
  check(issues, c.mixing_c >= 0.0, "mixing.c", "must be nonnegative (0 selects lambda_1)");
  check(issues, c.invariant_samples >= 2, "invariant.samples", "must be >= 2");
  check(issues, c.invariant_modes >= 1 && c.invariant_modes <= c.n_modes, "invariant.modes", "must lie in 1..basis.n_modes");
  check(issues, c.invariant_steps >= 1, "invariant.steps", "must be >= 1");
  for (double t : c.invariant_taus) check(issues, t > 0.0, "invariant.taus", "values must be positive");
  check(issues, c.invariant_sum_modes >= 1, "invariant.sum_modes", "must be >= 1");
  check(issues, c.poisson_gamma > 0.0 && c.poisson_gamma < 0.5, "poisson.gamma", "must lie in (0, 1/2)");
  check(issues, c.poisson_horizon >= 0.0, "poisson.horizon", "must be nonnegative (0 selects the default)");
  check(issues, c.poisson_fd_step > 0.0, "poisson.fd_step", "must be positive");
  check_state(issues, c.x0, c.n_modes, "init.x0");
  check_state(issues, c.y0, c.n_modes, "init.y0");
  check_state(issues, c.poisson_x, c.n_modes, "poisson.x");
  check_state(issues, c.poisson_y, c.n_modes, "poisson.y");
  check_state(issues, c.poisson_theta, c.n_modes, "poisson.theta");
  check(issues, !c.output_dir.empty(), "output.dir", "must not be empty");
  return issues;
}

}  // namespace

ConfigIssues::ConfigIssues(std::vector<Issue> issues)
    : ConfigError(join_issues(issues)),
      issues_(std::move(issues)) {}

StateSpec StateSpec::parse(const std::string& text) {
  StateSpec s;
  const std::string t = trim(text);
  if (t == "zero" || t == "0") return s;
  for (const auto& term : split(t, '+')) {
    const auto open = term.find('(');
    if (open == std::string::npos || term.back() != ')' || trim(term.substr(0, open)) != "mode") {
      throw ConfigError("expected zero or mode(k[, a]) terms, got '" + term + "'");
    }
    const auto args = split(term.substr(open + 1, term.size() - open - 2), ',');
    if (args.empty() || args.size() > 2) throw ConfigError("mode(k[, a]) takes one or two arguments");
    const int k = to_int(args[0]);
    if (k < 1) throw ConfigError("mode index must be >= 1");
    const double a = args.size() == 2 ? to_double(args[1]) : 1.0;
    s.terms.emplace_back(k, a);
  }
  return s;
}

std::string StateSpec::to_string() const {
  if (terms.empty()) return "zero";
  std::string out;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i) out += " + ";
    out += "mode(" + std::to_string(terms[i].first) + ", " + fmt(terms[i].second) + ")";
  }
  return out;
}

SpectralField StateSpec::build(const BasisPtr& basis) const {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(basis->n_modes());
  for (const auto& [k, a] : terms) {
    if (k < 1 || k > basis->n_modes()) throw ConfigError("mode index beyond the basis");
    c(k - 1) += a;
  }
  return SpectralField(basis, std::move(c));
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.push_back(f.key);
  return keys;
}

RunConfig parse_config(const std::string& text) {
  RunConfig config;
  std::vector<ConfigIssues::Issue> issues;
  std::map<std::string, std::pair<std::string, int>> seen;  // canonical key -> (value, line)
  std::map<std::string, const Field*> by_key;
  for (const auto& f : fields()) by_key[f.key] = &f;

  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      issues.push_back({"(syntax)", "expected 'key = value', got '" + line + "'", line_no});
      continue;
    }
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (auto a = aliases().find(key); a != aliases().end()) key = a->second;
    const auto it = by_key.find(key);
    if (it == by_key.end()) {
      issues.push_back({key, "unknown key", line_no});
      continue;
    }
    if (auto prev = seen.find(key); prev != seen.end()) {
      if (prev->second.first != value) {
        issues.push_back({key, "set twice with different values (line " + std::to_string(prev->second.second) + ")",
                          line_no});
      }
      continue;
    }
    seen[key] = {value, line_no};
    try {
      it->second->set(config, value);
    } catch (const ConfigError& e) {
      const std::string msg = e.field().empty() ? e.what() : std::string(e.what()).substr(e.field().size() + 2);
      issues.push_back({key, msg, line_no});
    }
  }
  if (issues.empty()) issues = collect_issues(config);
  if (!issues.empty()) throw ConfigIssues(std::move(issues));
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigIssues({{"--config", "cannot read '" + path + "'", 0}});
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(config) + "\n";
  return out;
}

void validate_config(const RunConfig& config) {
  auto issues = collect_issues(config);
  if (!issues.empty()) throw ConfigIssues(std::move(issues));
}

HmmParams make_params(const RunConfig& config) {
  HmmParams p;
  p.epsilon = config.epsilon;
  p.dt = config.dt;
  p.tau = config.tau;
  p.M = config.M;
  p.Ma = config.Ma;
  p.T = config.T;
  p.n_modes = config.n_modes;
  p.delta = config.delta;
  p.fine_ratio = config.fine_ratio;
  return p;
}

SlowFastSystem make_system(const RunConfig& config) {
  const BasisPtr basis = EigenBasis::make(config.n_modes, config.grid_points);
  return SlowFastSystem{basis, CovarianceSpec(basis, config.slow),
                        FastProcessModel(CovarianceSpec(basis, config.fast), config.fast_gamma_max),
                        NonlinearitySpec(config.family, config.g, config.c)};
}

ExperimentSetup make_setup(const RunConfig& config, int threads) {
  SlowFastSystem system = make_system(config);
  const BasisPtr basis = system.basis;
  ExperimentSetup setup{std::move(system), config.x0.build(basis), config.y0.build(basis), make_params(config),
                        config.seed, threads, {}};
  setup.functionals.emplace_back(SpectralField::mode(basis, config.phi_mode), config.phi);
  return setup;
}

}  // namespace spde_hmm
