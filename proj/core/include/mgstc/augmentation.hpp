#pragma once

#include <cstddef>
#include <cstdint>

#include "mgstc/rng.hpp"

namespace mgstc {

/// Parameters of the two-population auto-correlation model:
///   R_A = alpha I + U diag(nu) U^T   (historical data, K correlated groups)
///   R_B = beta I                     (new data)
///   R   = (1 - gamma) R_A + gamma R_B
/// xi is the variance of the Gaussian input perturbation, nu_inf = max(nu).
struct GapParameters {
  double alpha = 1.0;
  double beta = 2.0;
  double gamma = 0.5;
  double xi = 0.2;
  double nu_inf = 1.5;
};

struct GapValues {
  double plain = 0.0;      // |G(R_A)|_2
  double augmented = 0.0;  // |G(R_A')|_2 closed form
};

/// lambda = (1 - gamma) alpha + gamma beta.
double gap_lambda(const GapParameters& p);

/// Closed forms
///   plain     = gamma (beta - alpha) / lambda
///   augmented = 1 - (gamma (beta - alpha - xi) + lambda) / (lambda + gamma nu_inf)
/// Throws DomainError unless 0 < alpha < beta, gamma in (0, 1), xi > 0 and
/// nu_inf in [beta - alpha, 2 (beta - alpha)].
GapValues augmentation_gap(const GapParameters& p);

/// Largest xi for which augmented < plain is guaranteed at these
/// (alpha, beta, gamma, nu_inf):  2(beta-alpha) - nu_inf + gamma(beta-alpha) nu_inf / lambda.
double max_admissible_xi(const GapParameters& p);

/// Draws a tuple from the valid region with xi in (0, gamma (beta-alpha)^2 / lambda],
/// half of the worst-case admissible bound.
GapParameters sample_gap_parameters(Rng& rng);

/// Spectral norm of gamma R^{-1/2} (R_B - R_A) R^{-1/2}, built explicitly on a
/// random orthonormal U (T x K, K < T). nu[0] = nu_inf, the remaining entries
/// are uniform in (0, nu_inf].
double explicit_gap_plain(const GapParameters& p, std::size_t dim, std::size_t groups, Rng& rng);

struct AppendixReport {
  std::size_t trials = 0;
  std::size_t violations = 0;         // draws with augmented >= plain
  std::size_t spectral_checks = 0;
  double max_spectral_error = 0.0;    // |closed form - explicit| over the checks
  std::size_t wide_xi_trials = 0;     // diagnostic: xi drawn up to 2(beta-alpha)
  std::size_t wide_xi_violations = 0;
  GapParameters example;
  GapValues example_values;
};

/// Monte Carlo check of augmented < plain plus the explicit spectral-norm
/// cross-check on min(n_trials, 200) random instances with T <= 32, K <= 8.
AppendixReport verify_appendix(std::size_t n_trials, std::uint64_t seed);

}  // namespace mgstc
