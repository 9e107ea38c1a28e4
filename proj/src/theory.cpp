#include "mmlda/theory.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mmlda/quadrature.hpp"
#include "mmlda/rng.hpp"

namespace mmlda::theory {

namespace {

constexpr double kSqrt2OverPi = 0.79788456080286535587989211986876;
constexpr double kQuadLo = -12.0;
constexpr double kQuadHi = 12.0;
constexpr double kQuadTol = 1e-10;
constexpr long kTrapezoidPoints = 2'000'001;

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double folded_normal_mean(double mean, double sd) {
  if (!(sd > 0.0)) throw std::invalid_argument("folded normal needs sd > 0");
  const double a = mean / sd;
  return kSqrt2OverPi * sd * std::exp(-0.5 * a * a) + mean * (1.0 - 2.0 * normal_cdf(-a));
}

double expected_boundary_distance(const BoundaryDistanceQuery& q) {
  if (!(q.delta >= 0.0)) throw std::invalid_argument("delta must be nonnegative");
  if (q.delta == 0.0) {
    if (q.zeta != 0.0)
      throw std::invalid_argument("boundary distance undefined for delta = 0 with zeta != 0");
    return kSqrt2OverPi;
  }
  // H = beta + alpha^T x ~ N(zeta + delta^2/2, delta^2) and d = |H| / delta.
  return folded_normal_mean(q.zeta + 0.5 * q.delta * q.delta, q.delta) / q.delta;
}

double boundary_distance_derivative(const BoundaryDistanceQuery& q) {
  if (!(q.delta > 0.0)) throw std::invalid_argument("derivative requires delta > 0");
  const double slope = 0.5 - q.zeta / (q.delta * q.delta);
  const double alpha = 0.5 * q.delta + q.zeta / q.delta;
  return (1.0 - 2.0 * normal_cdf(-alpha)) * slope;
}

MonteCarloEstimate monte_carlo_boundary_distance(double delta, double zeta, std::size_t n,
                                                 std::uint64_t seed) {
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  if (n < 1) throw std::invalid_argument("need at least one sample");
  const double mu_i[2] = {0.5 * delta, 0.0};
  const double mu_j[2] = {-0.5 * delta, 0.0};
  const double alpha[2] = {mu_i[0] - mu_j[0], mu_i[1] - mu_j[1]};
  const double beta = zeta + 0.5 * ((mu_j[0] * mu_j[0] + mu_j[1] * mu_j[1]) -
                                    (mu_i[0] * mu_i[0] + mu_i[1] * mu_i[1]));
  const double alpha_norm = std::hypot(alpha[0], alpha[1]);

  Rng rng(seed);
  // Welford accumulation.
  double mean = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x0 = mu_i[0] + rng.normal();
    const double x1 = mu_i[1] + rng.normal();
    const double d = std::abs(beta + alpha[0] * x0 + alpha[1] * x1) / alpha_norm;
    const double delta_mean = d - mean;
    mean += delta_mean / static_cast<double>(k + 1);
    m2 += delta_mean * (d - mean);
  }
  MonteCarloEstimate est;
  est.estimate = mean;
  const double var = n > 1 ? m2 / static_cast<double>(n - 1) : 0.0;
  // A single draw carries no spread information.
  est.standard_error = n > 1 ? std::sqrt(var / static_cast<double>(n))
                             : std::numeric_limits<double>::infinity();
  return est;
}

double efron_A(int i, double pi0, double delta, QuadratureRule rule) {
  if (i < 0 || i > 2) throw std::invalid_argument("efron_A index must be 0, 1 or 2");
  if (!(pi0 > 0.0 && pi0 < 1.0)) throw std::invalid_argument("pi0 must lie in (0, 1)");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  const double pi1 = 1.0 - pi0;
  const double damp = std::exp(-delta * delta / 8.0);
  auto integrand = [=](double x) {
    const double denom = pi0 * std::exp(-0.5 * delta * x) + pi1 * std::exp(0.5 * delta * x);
    return damp * std::pow(x, i) * normal_pdf(x) / denom;
  };
  switch (rule) {
    case QuadratureRule::adaptive_gauss_kronrod:
      return integrate_gauss_kronrod(integrand, kQuadLo, kQuadHi, kQuadTol, 4000, 96).value;
    case QuadratureRule::trapezoid:
      return integrate_trapezoid(integrand, kQuadLo, kQuadHi, kTrapezoidPoints);
  }
  throw std::logic_error("unknown quadrature rule");
}

EfficiencyQuery EfficiencyQuery::from_zeta(std::size_t p, double zeta, double delta) {
  EfficiencyQuery q;
  q.p = p;
  q.zeta = zeta;
  q.delta = delta;
  q.pi0 = 1.0 / (1.0 + std::exp(-zeta));
  q.validate();
  return q;
}

EfficiencyQuery EfficiencyQuery::from_prior(std::size_t p, double pi0, double delta) {
  if (!(pi0 > 0.0 && pi0 < 1.0)) throw std::invalid_argument("pi0 must lie in (0, 1)");
  EfficiencyQuery q;
  q.p = p;
  q.pi0 = pi0;
  q.zeta = std::log(pi0 / (1.0 - pi0));
  q.delta = delta;
  q.validate();
  return q;
}

void EfficiencyQuery::validate() const {
  if (p < 1) throw std::invalid_argument("p must be >= 1");
  if (!(pi0 > 0.0 && pi0 < 1.0)) throw std::invalid_argument("pi0 must lie in (0, 1)");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
  if (std::abs(std::log(pi0 / (1.0 - pi0)) - zeta) > 1e-9 * std::max(1.0, std::abs(zeta)))
    throw std::invalid_argument("zeta is inconsistent with pi0");
}

double efron_efficiency(const EfficiencyQuery& q, QuadratureRule rule) {
  q.validate();
  const double d = q.delta;
  const double pi0 = q.pi0;
  const double pi1 = 1.0 - pi0;
  const double r = q.zeta / d;
  const double pm1 = static_cast<double>(q.p) - 1.0;

  // Q1 = (1, r) M (1, r)^T
  const double m00 = 1.0 + d * d / 4.0;
  const double m01 = (pi0 - pi1) * d / 2.0;
  const double m11 = 1.0 + 2.0 * pi0 * pi1 * d * d;
  const double q1 = m00 + 2.0 * m01 * r + m11 * r * r;
  const double q2 = 1.0 + pi0 * pi1 * d * d;

  const double a0 = efron_A(0, pi0, d, rule);
  const double a1 = efron_A(1, pi0, d, rule);
  const double a2 = efron_A(2, pi0, d, rule);
  const double det = a0 * a2 - a1 * a1;
  if (!(det > 0.0))
    throw QuadratureError("A0*A2 - A1^2 = " + std::to_string(det) +
                          " is not positive; quadrature is unreliable");
  const double q3 = (a2 + 2.0 * a1 * r + a0 * r * r) / det;
  const double q4 = 1.0 / a0;
  return (q1 + pm1 * q2) / (q3 + pm1 * q4);
}

double mmlda_label_gap(double C, std::size_t L) {
  if (!(C > 0.0)) throw std::invalid_argument("C must be positive");
  if (L < 2) throw std::invalid_argument("L must be >= 2");
  const double lm1 = static_cast<double>(L) - 1.0;
  // 1 / (1 + exp(t)) with t = 2LC/(L-1) - log(L-1).
  const double t = 2.0 * static_cast<double>(L) * C / lm1 - std::log(lm1);
  if (t > 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

}  // namespace mmlda::theory
