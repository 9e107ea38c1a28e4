#pragma once

#include <cstddef>
#include <cstdint>

namespace mmlda::theory {

/// Standard normal CDF via erfc; keeps relative accuracy in the far left tail.
double normal_cdf(double x);
/// Standard normal density.
double normal_pdf(double x);

/// Mahalanobis distance between two classes and the log prior ratio
/// zeta = log(pi_i / pi_j).
struct BoundaryDistanceQuery {
  double delta = 0.0;
  double zeta = 0.0;
};

/// E|H| for H ~ N(mean, sd^2).
double folded_normal_mean(double mean, double sd);

/// Expected distance from a class-i sample to the Fisher boundary between
/// classes i and j. Rejects delta < 0 and (delta == 0, zeta != 0).
double expected_boundary_distance(const BoundaryDistanceQuery& q);

/// d E[d] / d delta. Requires delta > 0.
double boundary_distance_derivative(const BoundaryDistanceQuery& q);

struct MonteCarloEstimate {
  double estimate = 0.0;
  double standard_error = 0.0;
};

/// Samples x ~ N(mu_i, I) in 2-D with mu_i = (delta/2) e1, mu_j = -(delta/2) e1
/// and averages |beta + alpha^T x| / ||alpha||.
MonteCarloEstimate monte_carlo_boundary_distance(double delta, double zeta, std::size_t n,
                                                 std::uint64_t seed);

enum class QuadratureRule { adaptive_gauss_kronrod, trapezoid };

/// A_i(pi0, delta) = int exp(-delta^2/8) x^i phi(x) / (pi0 e^{-delta x/2} + pi1 e^{delta x/2}) dx,
/// integrated over [-12, 12].
double efron_A(int i, double pi0, double delta,
               QuadratureRule rule = QuadratureRule::adaptive_gauss_kronrod);

struct EfficiencyQuery {
  std::size_t p = 1;
  double zeta = 0.0;
  double delta = 1.0;
  double pi0 = 0.5;

  /// pi0 derived from zeta = log(pi0 / (1 - pi0)).
  static EfficiencyQuery from_zeta(std::size_t p, double zeta, double delta);
  /// zeta derived from pi0.
  static EfficiencyQuery from_prior(std::size_t p, double pi0, double delta);
  void validate() const;
};

/// Asymptotic relative efficiency of logistic regression to LDA.
double efron_efficiency(const EfficiencyQuery& q,
                        QuadratureRule rule = QuadratureRule::adaptive_gauss_kronrod);

/// Upper bound on ||1_y - F_MM(mu_y)||_inf; evaluated in log space.
double mmlda_label_gap(double C, std::size_t L);

}  // namespace mmlda::theory
