#pragma once

// Numerical Poisson corrector for the linear fast process:
//
//   Phi(x, y, theta) = int_0^inf E[<F(x, Y_y(t)) - F-bar(x), theta>] dt
//
// Y_y(t) is Gaussian with mean e^{tA} y and per-mode variance
// v_n (1 - e^{-2 lambda_n t}), so the inner expectation is a pointwise 1-D
// Gaussian integral (Gauss-Hermite) and the time integral runs over
// geometrically graded Gauss-Legendre panels on [0, T_q].

#include "spde_hmm/fast_dynamics.hpp"
#include "spde_hmm/reaction.hpp"
#include "spde_hmm/spectral.hpp"

#include <string>
#include <vector>

namespace spde_hmm {

struct PoissonProbe {
  SpectralField x;
  SpectralField y;
  SpectralField theta;
  double horizon = 0.0;     // T_q; 0 selects 25 / lambda_1
  int panel_refinement = 1; // each graded panel is split into this many equal pieces
  int panel_order = 20;     // Gauss-Legendre nodes per panel
  int hermite_order = 40;

  /// Horizon after resolving the default.
  double resolved_horizon() const;
};

/// Throws ConfigError unless e^{-lambda_1 T_q} < 1e-10.
void validate_probe(const PoissonProbe& probe);

double evaluate_corrector(const PoissonProbe& probe, const NonlinearitySpec& spec, const FastProcessModel& model);

/// Closed form for affine_y: c <(-A)^{-1} y, theta>.
double affine_corrector(const NonlinearitySpec& spec, const SpectralField& y, const SpectralField& theta);

struct GeneratorCheck {
  double generator_value = 0.0;  // L Phi(y) by central differences
  double source = 0.0;           // <F(x,y) - F-bar(x), theta>
  double residual = 0.0;         // |L Phi + source|
};

/// Central finite differences of Phi in the mode coordinates:
/// L Phi = sum_n (-lambda_n y_n d_n Phi + q_n / 2 d_n^2 Phi).
GeneratorCheck generator_identity_check(const PoissonProbe& probe, const NonlinearitySpec& spec,
                                        const FastProcessModel& model, double fd_step = 1e-4);

enum class PoissonLemma { phi_0, phi_0ter };
std::string to_string(PoissonLemma lemma);
PoissonLemma parse_poisson_lemma(const std::string& name);

struct BoundSweep {
  SpectralField x;
  SpectralField y;      // base fast state; phi_0 scales it, phi_0ter keeps it
  SpectralField theta;  // base direction for phi_0
  std::vector<double> scales;  // phi_0: y multipliers; phi_0ter: mode indices k (theta = e_k)
  double gamma = 0.2;
  double kappa = 0.0;  // 0 selects (gamma_max - gamma) / 2
  double horizon = 0.0;
};

struct BoundRow {
  double scale = 0.0;
  double value = 0.0;  // |Phi|
  double bound = 0.0;
  double ratio = 0.0;
};

struct BoundTable {
  PoissonLemma lemma = PoissonLemma::phi_0;
  std::vector<BoundRow> rows;
  double max_ratio = 0.0;
  /// phi_0: fitted exponent of |Phi| against the scale over the upper half
  /// of the sweep; phi_0ter: 0.
  double growth_exponent = 0.0;
  bool bounded = false;
};

/// phi_0: |Phi| against (1 + |y|_{L^2}) |theta|_{L^2}; bounded when |Phi| grows at most linearly.
/// phi_0ter: |Phi| against (1 + |(-A)^{g+k} x|_{L^4}^2 + |(-A)^{g+k} y|_{L^4}^2) |(-A)^{-g} theta|_{L^2};
/// bounded when the ratio is nonincreasing past its maximum.
BoundTable bound_probe(PoissonLemma lemma, const BoundSweep& sweep, const NonlinearitySpec& spec,
                       const FastProcessModel& model);

}  // namespace spde_hmm
