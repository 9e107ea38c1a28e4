#include <cmath>
#include <limits>

#include "doctest.h"
#include "mmlda/heads.hpp"
#include "mmlda/mmd_core.hpp"
#include "mmlda/quadrature.hpp"
#include "mmlda/theory.hpp"
#include "oracles.hpp"

using namespace mmlda;
using namespace mmlda::theory;
using doctest::Approx;

namespace {

double ed(double delta, double zeta = 0.0) { return expected_boundary_distance({delta, zeta}); }

// Half-normal mean plus the zeta = 0 specialization, written out directly.
double ed_zeta0(double delta) {
  return std::sqrt(2.0 / M_PI) * std::exp(-delta * delta / 8.0) +
         0.5 * delta * (1.0 - 2.0 * oracle::normal_cdf_series(-0.5 * delta));
}

}  // namespace

TEST_CASE("normal cdf against an independent series") {
  for (double x = -8.0; x <= 8.0; x += 0.25)
    CHECK(std::abs(normal_cdf(x) - oracle::normal_cdf_series(x)) <= 1e-12);
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_pdf(0.0) == Approx(1.0 / std::sqrt(2.0 * M_PI)));
}

TEST_CASE("expected boundary distance examples") {
  CHECK(ed(0.0) == Approx(std::sqrt(2.0 / M_PI)).epsilon(1e-14));
  CHECK(ed(2.0) == Approx(1.16663).epsilon(1e-5));
  CHECK(std::abs(ed(10.0) / 10.0 - 0.5) < 1e-7);
  for (double d = 0.0; d <= 12.0; d += 0.37) CHECK(ed(d) == Approx(ed_zeta0(d)).epsilon(1e-12));
  CHECK_THROWS_AS(ed(0.0, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(ed(-1.0, 0.0), std::invalid_argument);
}

TEST_CASE("general form agrees with the alpha expression") {
  for (double delta : {0.3, 1.0, 2.5, 6.0})
    for (double zeta : {-2.0, -0.5, 0.0, 0.7, 3.0}) {
      const double alpha = 0.5 * delta + zeta / delta;
      const double expect = std::sqrt(2.0 / M_PI) * std::exp(-0.5 * alpha * alpha) +
                            alpha * (1.0 - 2.0 * oracle::normal_cdf_series(-alpha));
      CHECK(ed(delta, zeta) == Approx(expect).epsilon(1e-11));
    }
}

TEST_CASE("derivative examples and finite differences") {
  CHECK(boundary_distance_derivative({1e-12, 0.0}) == Approx(0.0).epsilon(1e-9));
  CHECK(std::abs(boundary_distance_derivative({10.0, 0.0}) - 0.5) < 1e-6);
  CHECK(boundary_distance_derivative({2.0, 0.0}) == Approx(0.341345).epsilon(1e-6));
  CHECK_THROWS(boundary_distance_derivative({0.0, 0.0}));
  for (double d = 0.5; d <= 8.0; d += 0.125) {
    const double h = 1e-5;
    const double fd = (ed(d + h) - ed(d - h)) / (2 * h);
    const double an = boundary_distance_derivative({d, 0.0});
    CHECK(std::abs(an - fd) <= 1e-6 * std::abs(fd));
    CHECK(an >= 0.0);
  }
  for (double zeta : {-1.0, 0.5, 2.0})
    for (double d = 0.5; d <= 6.0; d += 0.5) {
      const double h = 1e-5;
      const double fd = (ed(d + h, zeta) - ed(d - h, zeta)) / (2 * h);
      CHECK(boundary_distance_derivative({d, zeta}) == Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("monotonicity properties") {
  double prev = -1.0;
  for (double d = 0.0; d <= 20.0; d += 0.01) {
    const double v = ed(d);
    CHECK(v >= prev);
    prev = v;
  }
  double gap_prev = std::numeric_limits<double>::infinity();
  for (double d = 1.0; d <= 12.0; d += 0.25) {
    const double gap = std::abs(ed(d) / d - 0.5);
    CHECK(gap <= gap_prev);
    gap_prev = gap;
  }
}

TEST_CASE("Monte Carlo oracle") {
  auto a = monte_carlo_boundary_distance(2.0, 0.0, 1'000'000, 7);
  CHECK(std::abs(a.estimate - ed(2.0)) < 4.0 * a.standard_error);
  CHECK(a.estimate == Approx(1.1666).epsilon(1e-2));
  auto b = monte_carlo_boundary_distance(2.0, 0.0, 1'000'000, 7);
  CHECK(a.estimate == b.estimate);
  CHECK(a.standard_error == b.standard_error);

  auto small = monte_carlo_boundary_distance(1.0, 0.0, 10, 3);
  CHECK(std::isfinite(small.estimate));
  CHECK(small.standard_error > 0.0);
  CHECK(std::isinf(monte_carlo_boundary_distance(1.0, 0.0, 1, 3).standard_error));
  CHECK_THROWS(monte_carlo_boundary_distance(0.0, 0.0, 10, 3));
  CHECK_THROWS(monte_carlo_boundary_distance(1.0, 0.0, 0, 3));
}

TEST_CASE("quadrature rules") {
  auto gauss = [](double x) { return std::exp(-0.5 * x * x) / std::sqrt(2 * M_PI); };
  auto r = integrate_gauss_kronrod(gauss, -12, 12, 1e-12);
  CHECK(r.value == Approx(1.0).epsilon(1e-12));
  CHECK(integrate_trapezoid(gauss, -12, 12, 200001) == Approx(1.0).epsilon(1e-10));
  CHECK(integrate_gauss_kronrod([](double x) { return x * x; }, 0, 3, 1e-12).value == Approx(9.0));
  // A discontinuous integrand cannot meet an absurd tolerance in 3 intervals.
  CHECK_THROWS_AS(integrate_gauss_kronrod([](double x) { return x < 0.1234 ? 0.0 : 1.0; }, 0, 1,
                                          1e-15, 3),
                  QuadratureError);
}

TEST_CASE("efron A integrals") {
  for (double pi0 : {0.1, 0.5, 0.8}) {
    CHECK(efron_A(0, pi0, 1e-6) == Approx(1.0).epsilon(1e-8));
    CHECK(efron_A(2, pi0, 1e-6) == Approx(1.0).epsilon(1e-8));
    CHECK(std::abs(efron_A(1, pi0, 1e-6)) < 1e-6);
  }
  for (double delta : {0.5, 2.0, 5.0, 10.0})
    for (int i = 0; i < 3; ++i) {
      const double a = efron_A(i, 0.5, delta, QuadratureRule::adaptive_gauss_kronrod);
      const double b = efron_A(i, 0.5, delta, QuadratureRule::trapezoid);
      CHECK(std::isfinite(a));
      CHECK(std::abs(a - b) <= 1e-8);
    }
  CHECK_THROWS(efron_A(3, 0.5, 1.0));
  CHECK_THROWS(efron_A(0, 0.0, 1.0));
  CHECK_THROWS(efron_A(0, 0.5, 0.0));
}

TEST_CASE("efron efficiency") {
  const double e = efron_efficiency(EfficiencyQuery::from_zeta(5, 0.0, 0.01));
  CHECK(e >= 0.99);
  CHECK(e <= 1.0);
  for (double zeta : {0.0, 1.0}) {
    double prev = 2.0;
    for (double d = 0.5; d <= 4.0; d += 0.5) {
      const double v = efron_efficiency(EfficiencyQuery::from_zeta(5, zeta, d));
      CHECK(v <= prev);
      CHECK(v > 0.0);
      prev = v;
    }
  }
  for (std::size_t p : {1, 5, 20})
    for (double zeta : {-1.0, 0.0, 1.5})
      for (double d : {0.5, 2.0, 4.0}) {
        auto q = EfficiencyQuery::from_zeta(p, zeta, d);
        CHECK(std::abs(efron_efficiency(q, QuadratureRule::adaptive_gauss_kronrod) -
                       efron_efficiency(q, QuadratureRule::trapezoid)) <= 1e-6);
      }
  auto q = EfficiencyQuery::from_prior(3, 0.25, 1.0);
  CHECK(q.zeta == Approx(std::log(0.25 / 0.75)));
  CHECK(efron_efficiency(q) == Approx(efron_efficiency(EfficiencyQuery::from_zeta(3, q.zeta, 1.0))));
  CHECK_THROWS(EfficiencyQuery::from_prior(3, 1.0, 1.0).validate());
  CHECK_THROWS(efron_efficiency(EfficiencyQuery{3, 0.0, -1.0, 0.5}));
  CHECK_THROWS(efron_efficiency(EfficiencyQuery{3, 0.7, 1.0, 0.5}));  // zeta inconsistent with pi0
}

TEST_CASE("label gap bound") {
  CHECK(mmlda_label_gap(10.0, 10) <= 1e-8);
  CHECK(mmlda_label_gap(1e-12, 10) == Approx(0.9).epsilon(1e-9));
  CHECK(mmlda_label_gap(100.0, 10) < mmlda_label_gap(10.0, 10));
  CHECK(mmlda_label_gap(100.0, 10) > 0.0);
  CHECK(std::isfinite(mmlda_label_gap(1e6, 2)));
  CHECK_THROWS(mmlda_label_gap(0.0, 10));
  CHECK_THROWS(mmlda_label_gap(1.0, 1));
}

TEST_CASE("label gap at the means, C=100, L=10") {
  auto head = MMLDAHead::make_uniform(generate_opt_means(100.0, 10, 10));
  for (std::size_t y = 0; y < 10; ++y) {
    Tensor z(1, 10, head.means.means[y]);
    Tensor prob = softmax_rows(head_scores(head, z));
    for (std::size_t k = 0; k < 10; ++k) CHECK(std::abs((k == y ? 1.0 : 0.0) - prob(0, k)) <= 1e-8);
  }
}
