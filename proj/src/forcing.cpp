#include "spde_hmm/forcing.hpp"

#include "spde_hmm/detail/philox.hpp"
#include "spde_hmm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>

namespace spde_hmm {

std::string CovarianceKind::name() const {
  std::ostringstream os;
  os.precision(17);
  switch (family) {
    case CovarianceFamily::zero: return "zero";
    case CovarianceFamily::white: return "white";
    case CovarianceFamily::powerlaw: os << "powerlaw(" << exponent << ")"; return os.str();
    case CovarianceFamily::single: os << "single(" << mode << ")"; return os.str();
  }
  return "zero";
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// "head(arg)" -> {head, arg}; "head" -> {head, ""}
std::pair<std::string, std::string> split_call(const std::string& text) {
  const std::string t = trim(text);
  const auto open = t.find('(');
  if (open == std::string::npos) return {t, {}};
  if (t.back() != ')') throw ConfigError("unbalanced parentheses in '" + t + "'");
  return {trim(t.substr(0, open)), trim(t.substr(open + 1, t.size() - open - 2))};
}

}  // namespace

CovarianceKind CovarianceKind::parse(const std::string& text) {
  const auto [head, arg] = split_call(text);
  CovarianceKind kind;
  if (head == "zero" || head == "none") {
    kind.family = CovarianceFamily::zero;
  } else if (head == "white") {
    kind.family = CovarianceFamily::white;
  } else if (head == "powerlaw") {
    kind.family = CovarianceFamily::powerlaw;
    char* end = nullptr;
    kind.exponent = std::strtod(arg.c_str(), &end);
    if (arg.empty() || *end != '\0' || kind.exponent < 0.0) {
      throw ConfigError("powerlaw(b) needs a nonnegative exponent, got '" + arg + "'");
    }
  } else if (head == "single") {
    kind.family = CovarianceFamily::single;
    char* end = nullptr;
    const long n = std::strtol(arg.c_str(), &end, 10);
    if (arg.empty() || *end != '\0' || n < 1) throw ConfigError("single(n) needs a mode index >= 1");
    kind.mode = static_cast<int>(n);
  } else {
    throw ConfigError("unknown covariance family '" + head + "'");
  }
  if (!arg.empty() && (kind.family == CovarianceFamily::zero || kind.family == CovarianceFamily::white)) {
    throw ConfigError("covariance family '" + head + "' takes no argument");
  }
  return kind;
}

double CovarianceKind::alpha_max() const {
  switch (family) {
    case CovarianceFamily::white: return 0.25;
    case CovarianceFamily::powerlaw: return std::min(1.0, 0.5 * exponent + 0.25);
    case CovarianceFamily::single:
    case CovarianceFamily::zero: return 1.0;
  }
  return 1.0;
}

double CovarianceKind::gamma_max() const { return std::min(0.5, alpha_max()); }

bool CovarianceKind::trace_class() const {
  switch (family) {
    case CovarianceFamily::white: return false;
    case CovarianceFamily::powerlaw: return exponent > 0.5;  // sum n^{-2b}
    case CovarianceFamily::single:
    case CovarianceFamily::zero: return true;
  }
  return true;
}

CovarianceSpec::CovarianceSpec(BasisPtr basis, const CovarianceKind& kind)
    : basis_(std::move(basis)), kind_(kind) {
  if (!(kind_.delta >= 0.0)) throw DomainError("covariance: delta must be nonnegative");
  const int n_modes = basis_->n_modes();
  const auto& lambda = basis_->eigenvalues();
  weights_ = Eigen::VectorXd::Zero(n_modes);
  switch (kind_.family) {
    case CovarianceFamily::zero: break;
    case CovarianceFamily::white: weights_.setOnes(); break;
    case CovarianceFamily::powerlaw: weights_ = lambda.array().pow(-kind_.exponent).matrix(); break;
    case CovarianceFamily::single:
      if (kind_.mode > n_modes) throw ConfigError("single(n): mode beyond truncation");
      weights_(kind_.mode - 1) = 1.0;
      break;
  }
  effective_ = (weights_.array() * (-2.0 * kind_.delta * lambda.array()).exp()).matrix();
  effective_sqrt_ = effective_.cwiseSqrt();
}

CovarianceSpec CovarianceSpec::white(BasisPtr basis, double delta) {
  CovarianceKind k;
  k.family = CovarianceFamily::white;
  k.delta = delta;
  return {std::move(basis), k};
}

CovarianceSpec CovarianceSpec::powerlaw(BasisPtr basis, double b, double delta) {
  CovarianceKind k;
  k.family = CovarianceFamily::powerlaw;
  k.exponent = b;
  k.delta = delta;
  return {std::move(basis), k};
}

CovarianceSpec CovarianceSpec::single(BasisPtr basis, int n, double delta) {
  CovarianceKind k;
  k.family = CovarianceFamily::single;
  k.mode = n;
  k.delta = delta;
  return {std::move(basis), k};
}

CovarianceSpec CovarianceSpec::with_delta(double delta) const {
  CovarianceKind k = kind_;
  k.delta = delta;
  return {basis_, k};
}

std::string to_string(StreamRole role) {
  return role == StreamRole::slow_noise ? "slow-noise" : "fast-noise";
}

RngStream::RngStream(std::uint64_t seed, std::uint32_t replica, StreamRole role, std::uint64_t position)
    : id_{seed, replica, role}, position_(position) {}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

detail::PhiloxKey make_key(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

detail::PhiloxCounter make_counter(const StreamId& id, std::uint64_t step, std::uint32_t block) {
  // The role lives in the top byte of the high step word: 2^56 steps per stream.
  const auto step_hi = static_cast<std::uint32_t>((step >> 32) & 0x00FFFFFFu) |
                       (static_cast<std::uint32_t>(id.role) << 24);
  return {block, static_cast<std::uint32_t>(step), step_hi, id.replica};
}

// Open-interval uniform from 53 random bits.
double to_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

// Box-Muller on one Philox block -> two independent standard normals.
std::pair<double, double> normal_pair(const detail::PhiloxCounter& out) {
  const double u1 = to_unit(out[0], out[1]);
  const double u2 = to_unit(out[2], out[3]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = kTwoPi * u2;
  return {r * std::cos(angle), r * std::sin(angle)};
}

}  // namespace

void RngStream::fill_normal(std::span<double> out) {
  const auto key = make_key(id_.seed);
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; i += 2) {
    const auto block = detail::philox4x32_10(make_counter(id_, position_, static_cast<std::uint32_t>(i / 2)), key);
    const auto [z0, z1] = normal_pair(block);
    out[i] = z0;
    if (i + 1 < n) out[i + 1] = z1;
  }
  ++position_;
}

Eigen::VectorXd RngStream::next_normals(int count) {
  Eigen::VectorXd z(count);
  fill_normal(std::span<double>(z.data(), static_cast<std::size_t>(count)));
  return z;
}

double RngStream::normal_at(const StreamId& id, std::uint64_t step, std::uint32_t index) {
  const auto block = detail::philox4x32_10(make_counter(id, step, index / 2), make_key(id.seed));
  const auto [z0, z1] = normal_pair(block);
  return (index % 2 == 0) ? z0 : z1;
}

SpectralField wiener_increment(const CovarianceSpec& cov, double dt, RngStream& rng) {
  if (!(dt > 0.0)) throw DomainError("wiener_increment: dt must be positive");
  Eigen::VectorXd z = rng.next_normals(cov.basis()->n_modes());
  z.array() *= cov.effective_sqrt().array() * std::sqrt(dt);
  return SpectralField(cov.basis(), std::move(z));
}

double regularity_functional(const CovarianceSpec& cov, double alpha, double T) {
  if (!(T > 0.0)) throw DomainError("regularity_functional: T must be positive");
  const auto lambda = cov.basis()->eigenvalues().array();
  const Eigen::ArrayXd terms = cov.effective_weights().array() * lambda.pow(2.0 * alpha) *
                     (1.0 - (-2.0 * lambda * T).exp()) / (2.0 * lambda);
  return std::sqrt(terms.sum());
}

double trace(const CovarianceSpec& cov) { return cov.effective_weights().sum(); }

}  // namespace spde_hmm
