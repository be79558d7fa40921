#pragma once

// Diagonal Q-Wiener forcing in the Laplacian eigenbasis (f_n = e_n) and the
// deterministic Gaussian streams that drive every stochastic update.

#include "spde_hmm/spectral.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>

namespace spde_hmm {

enum class CovarianceFamily { zero, white, powerlaw, single };

/// Declarative covariance: which family, its parameter, optional mollification.
struct CovarianceKind {
  CovarianceFamily family = CovarianceFamily::zero;
  double exponent = 0.0;  // b in q_n = lambda_n^{-b}
  int mode = 1;           // n for single(n)
  double delta = 0.0;     // weights are multiplied by e^{-2 delta lambda_n}

  /// "white", "powerlaw(1)", "single(3)", "zero".
  std::string name() const;
  static CovarianceKind parse(const std::string& text);

  /// Regularity exponent used to predict rates (d = 1):
  /// white -> 1/4, powerlaw(b) -> min(1, b/2 + 1/4), smooth families -> 1.
  double alpha_max() const;
  /// Fast-noise exponent: min(1/2, alpha_max()).
  double gamma_max() const;
  /// Whether sum q_n converges on the untruncated family.
  bool trace_class() const;

  friend bool operator==(const CovarianceKind&, const CovarianceKind&) = default;
};

/// Mode weights q_n on a concrete basis plus the mollification parameter.
class CovarianceSpec {
 public:
  CovarianceSpec(BasisPtr basis, const CovarianceKind& kind);

  static CovarianceSpec zero(BasisPtr basis) { return {std::move(basis), CovarianceKind{}}; }
  static CovarianceSpec white(BasisPtr basis, double delta = 0.0);
  static CovarianceSpec powerlaw(BasisPtr basis, double b, double delta = 0.0);
  static CovarianceSpec single(BasisPtr basis, int n, double delta = 0.0);

  const BasisPtr& basis() const noexcept { return basis_; }
  const CovarianceKind& kind() const noexcept { return kind_; }
  double delta() const noexcept { return kind_.delta; }
  double alpha_max() const { return kind_.alpha_max(); }
  bool trace_class() const { return kind_.trace_class(); }

  /// Raw q_n (index 0 holds q_1).
  const Eigen::VectorXd& weights() const noexcept { return weights_; }
  /// q_n e^{-2 delta lambda_n}.
  const Eigen::VectorXd& effective_weights() const noexcept { return effective_; }
  /// sqrt(q_n e^{-2 delta lambda_n}).
  const Eigen::VectorXd& effective_sqrt() const noexcept { return effective_sqrt_; }

  /// Same family with a different mollification parameter.
  CovarianceSpec with_delta(double delta) const;

 private:
  BasisPtr basis_;
  CovarianceKind kind_;
  Eigen::VectorXd weights_;
  Eigen::VectorXd effective_;
  Eigen::VectorXd effective_sqrt_;
};

enum class StreamRole : std::uint32_t { slow_noise = 0, fast_noise = 1 };

std::string to_string(StreamRole role);

struct StreamId {
  std::uint64_t seed = 0;
  std::uint32_t replica = 0;
  StreamRole role = StreamRole::slow_noise;

  friend bool operator==(const StreamId&, const StreamId&) = default;
};

/// Gaussian stream keyed by (seed, replica, role). Each draw consumes one
/// "step" position; value i of step s is a pure function of
/// (seed, replica, role, s, i), so replicas are reproducible in any order.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint32_t replica, StreamRole role, std::uint64_t position = 0);
  explicit RngStream(const StreamId& id, std::uint64_t position = 0)
      : RngStream(id.seed, id.replica, id.role, position) {}

  const StreamId& id() const noexcept { return id_; }
  std::uint64_t position() const noexcept { return position_; }

  /// Fill `out` with standard normals for the current step, then advance.
  void fill_normal(std::span<double> out);
  Eigen::VectorXd next_normals(int count);

  /// Value `index` of step `step`; does not touch the stream position.
  static double normal_at(const StreamId& id, std::uint64_t step, std::uint32_t index);

 private:
  StreamId id_;
  std::uint64_t position_;
};

/// Increment of the (mollified) Q-Wiener process over dt: sqrt(q_n e^{-2 delta lambda_n} dt) Z_n.
SpectralField wiener_increment(const CovarianceSpec& cov, double dt, RngStream& rng);

/// M_{alpha,2}(e^{delta A} Q^{1/2}, T) on the truncation:
/// sqrt(sum q_n e^{-2 delta lambda_n} lambda_n^{2 alpha} (1 - e^{-2 lambda_n T}) / (2 lambda_n)).
double regularity_functional(const CovarianceSpec& cov, double alpha, double T);

/// Tr(e^{2 delta A} Q) on the truncation.
double trace(const CovarianceSpec& cov);

}  // namespace spde_hmm
