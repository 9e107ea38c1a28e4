#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mmlda/mmd_core.hpp"
#include "mmlda/rng.hpp"
#include "oracles.hpp"

using namespace mmlda;
using doctest::Approx;

TEST_CASE("two antipodal means on the line") {
  auto ms = generate_opt_means(1.0, 1, 2);
  REQUIRE(ms.classes() == 2);
  CHECK(ms.means[0][0] == Approx(1.0));
  CHECK(ms.means[1][0] == Approx(-1.0));
}

TEST_CASE("three means form an equilateral triangle") {
  auto ms = generate_opt_means(1.0, 2, 3);
  const double h = std::sqrt(3.0) / 2.0;
  CHECK(ms.means[0][0] == Approx(1.0));
  CHECK(ms.means[0][1] == Approx(0.0));
  CHECK(ms.means[1][0] == Approx(-0.5));
  CHECK(ms.means[1][1] == Approx(h));
  CHECK(ms.means[2][0] == Approx(-0.5));
  CHECK(ms.means[2][1] == Approx(-h));
}

TEST_CASE("C=100, p=10, L=10 gram matrix by exhaustive check") {
  auto ms = generate_opt_means(100.0, 10, 10);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j) {
      const double g = oracle::inner(ms.means[i], ms.means[j]);
      if (i == j)
        CHECK(std::abs(g - 100.0) <= 1e-9 * 100.0);
      else
        CHECK(std::abs(g + 100.0 / 9.0) <= 1e-9 * 100.0);
    }
}

TEST_CASE("generation preconditions") {
  CHECK_THROWS_AS(generate_opt_means(1.0, 2, 4), std::invalid_argument);
  CHECK_THROWS_AS(generate_opt_means(0.0, 2, 3), std::invalid_argument);
  CHECK_THROWS_AS(generate_opt_means(-1.0, 2, 3), std::invalid_argument);
  CHECK_THROWS_AS(generate_opt_means(1.0, 2, 1), std::invalid_argument);
  CHECK_NOTHROW(generate_opt_means(1.0, 2, 3));
}

TEST_CASE("construction is deterministic") {
  CHECK(generate_opt_means(7.0, 12, 9) == generate_opt_means(7.0, 12, 9));
}

TEST_CASE("optimality condition holds over a grid of shapes") {
  for (std::size_t p = 1; p <= 20; ++p)
    for (std::size_t L = 2; L <= p + 1; ++L)
      for (double C : {0.01, 1.0, 100.0, 1e4}) {
        auto ms = generate_opt_means(C, p, L);
        auto rep = verify_opt_condition(ms, 1e-9);
        CAPTURE(p);
        CAPTURE(L);
        CAPTURE(C);
        CHECK(rep.pass);
        std::vector<double> sum(p, 0.0);
        for (const auto& m : ms.means)
          for (std::size_t k = 0; k < p; ++k) sum[k] += m[k];
        for (double s : sum) CHECK(std::abs(s) <= 1e-9 * std::sqrt(C) * L);
      }
}

TEST_CASE("verify_opt_condition rejects violations") {
  MeanSet bad{{{1, 0}, {0, 1}, {-1, -1}}, 1.0};
  CHECK_FALSE(verify_opt_condition(bad, 1e-9).pass);

  auto ms = generate_opt_means(100.0, 10, 10);
  for (double& v : ms.means[3]) v *= 1.01;
  auto rep = verify_opt_condition(ms, 1e-9);
  CHECK_FALSE(rep.pass);
  CHECK(rep.max_diag_err == Approx(100.0 * (1.01 * 1.01 - 1.0)));
}

TEST_CASE("pairwise distances of small sets") {
  auto tri = generate_opt_means(1.0, 2, 3);
  auto d = pairwise_mahalanobis(tri);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(d(i, j) == Approx(i == j ? 0.0 : std::sqrt(3.0)));
  CHECK(approx_robustness(tri) == Approx(std::sqrt(3.0) / 2.0));

  auto pair = generate_opt_means(1.0, 1, 2);
  CHECK(pairwise_mahalanobis(pair)(0, 1) == Approx(2.0));
  CHECK(approx_robustness(pair) == Approx(1.0));
}

TEST_CASE("pairwise matrix is a metric") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    MeanSet ms;
    ms.C = 1.0;
    const std::size_t L = 2 + rng.below(6), p = 1 + rng.below(5);
    ms.means.assign(L, std::vector<double>(p));
    for (auto& m : ms.means)
      for (double& v : m) v = rng.normal();
    auto d = pairwise_mahalanobis(ms);
    for (std::size_t i = 0; i < L; ++i) {
      CHECK(d(i, i) == 0.0);
      for (std::size_t j = 0; j < L; ++j) {
        CHECK(d(i, j) == d(j, i));
        CHECK(d(i, j) >= 0.0);
        for (std::size_t k = 0; k < L; ++k) CHECK(d(i, k) <= d(i, j) + d(j, k) + 1e-12);
      }
    }
  }
}

TEST_CASE("robustness bound values") {
  CHECK(robustness_upper_bound(100.0, 10) == Approx(7.453559924999299).epsilon(1e-12));
  CHECK(robustness_upper_bound(1.0, 2) == Approx(1.0));
  CHECK(robustness_upper_bound(1.0, 1000000) == Approx(std::sqrt(0.5)).epsilon(1e-6));
  CHECK(approx_robustness(generate_opt_means(100.0, 10, 10)) == Approx(7.453559924999299).epsilon(1e-12));
  CHECK_THROWS(robustness_upper_bound(0.0, 3));
  CHECK_THROWS(robustness_upper_bound(1.0, 1));
}

TEST_CASE("bound attained by the construction and never exceeded by random zero-sum sets") {
  for (std::size_t p : {1, 2, 5, 10, 63})
    for (std::size_t L = 2; L <= std::min<std::size_t>(p + 1, 64); L += (L < 12 ? 1 : 13))
      for (double C : {1.0, 100.0}) {
        const double rb = approx_robustness(generate_opt_means(C, p, L));
        CHECK(std::abs(rb - robustness_upper_bound(C, L)) <= 1e-9 * robustness_upper_bound(C, L));
      }

  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t p = 1 + rng.below(8);
    const std::size_t L = 2 + rng.below(8);
    const double C = 0.5 + 10.0 * rng.uniform();
    std::vector<std::vector<double>> m(L, std::vector<double>(p));
    for (auto& v : m)
      for (double& x : v) x = rng.normal();
    // Project to zero sum, then scale so the largest squared norm is C.
    for (std::size_t k = 0; k < p; ++k) {
      double s = 0;
      for (auto& v : m) s += v[k];
      for (auto& v : m) v[k] -= s / static_cast<double>(L);
    }
    double mx = 0;
    for (auto& v : m) mx = std::max(mx, oracle::inner(v, v));
    for (auto& v : m)
      for (double& x : v) x *= std::sqrt(C / mx);
    MeanSet ms{m, C};
    CHECK(approx_robustness(ms) <= robustness_upper_bound(C, L) + 1e-9);
  }
}

TEST_CASE("rotation preserves the optimality condition") {
  auto ms = generate_opt_means(100.0, 10, 7);
  auto r = rotate_means(ms, 42);
  CHECK(verify_opt_condition(r, 1e-9).pass);
  CHECK_FALSE(r == ms);
  CHECK(rotate_means(ms, 42) == r);
}

TEST_CASE("cholesky factor reproduces the matrix and rejects non-SPD input") {
  Rng rng(5);
  auto S = oracle::random_spd(6, rng);
  Tensor Lw = cholesky_lower(oracle::to_tensor(S));
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(Lw(i, i) > 0.0);
    for (std::size_t j = i + 1; j < 6; ++j) CHECK(Lw(i, j) == 0.0);
  }
  Tensor back = matmul_transposed(Lw, Lw);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) CHECK(back(i, j) == Approx(S[i][j]).epsilon(1e-12));

  CHECK_THROWS_AS(cholesky_lower(Tensor::from_rows({{1, 2}, {2, 1}})), CholeskyError);
  CHECK_THROWS_AS(cholesky_lower(Tensor::from_rows({{1, 0.5}, {0.4, 1}})), CholeskyError);
  CHECK_THROWS_AS(whiten({{0, 0}, {1, 1}}, CovarianceModel::general(Tensor::from_rows({{0, 0}, {0, 0}}))),
                  CholeskyError);
}

TEST_CASE("whitening examples") {
  SUBCASE("identity covariance leaves centered means unchanged") {
    std::vector<std::vector<double>> m{{1, 2}, {-1, -2}};
    auto w = whiten(m, CovarianceModel::make_identity(2));
    CHECK(w.standardized == m);
  }
  SUBCASE("scaled identity") {
    auto cov = CovarianceModel::general(Tensor::from_rows({{4, 0}, {0, 4}}));
    auto w = whiten({{2, 0}, {-2, 0}}, cov);
    CHECK(w.standardized[0][0] == Approx(1.0));
    CHECK(w.standardized[0][1] == Approx(0.0));
    CHECK(w.standardized[1][0] == Approx(-1.0));
    std::vector<double> a{2, 0}, b{-2, 0};
    CHECK(mahalanobis_distance(a, b, cov) == Approx(2.0));
  }
}

TEST_CASE("whitening preserves Mahalanobis distances against an explicit-inverse oracle") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t p = trial == 0 ? 5 : 1 + rng.below(8);
    const std::size_t L = trial == 0 ? 4 : 2 + rng.below(5);
    auto S = oracle::random_spd(p, rng);
    std::vector<std::vector<double>> m(L, std::vector<double>(p));
    for (auto& v : m)
      for (double& x : v) x = 2.0 * rng.normal();
    auto w = whiten(m, CovarianceModel::general(oracle::to_tensor(S)));
    std::vector<double> sum(p, 0.0);
    for (const auto& v : w.standardized)
      for (std::size_t k = 0; k < p; ++k) sum[k] += v[k];
    for (double s : sum) CHECK(std::abs(s) < 1e-9);
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = i + 1; j < L; ++j) {
        const double general = oracle::mahalanobis(m[i], m[j], S);
        const double euclid = std::sqrt(squared_distance(w.standardized[i], w.standardized[j]));
        CHECK(std::abs(general - euclid) <= 1e-8);
      }
  }
}

TEST_CASE("mean set text round trip") {
  auto ms = rotate_means(generate_opt_means(100.0, 6, 5), 9);
  const std::string text = emit_mean_set(ms);
  CHECK(text.rfind("5 6 100", 0) == 0);
  auto back = parse_mean_set(text);
  CHECK(back.C == ms.C);
  CHECK(emit_mean_set(back) == text);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t k = 0; k < 6; ++k) CHECK(back.means[i][k] == ms.means[i][k]);

  CHECK_THROWS(parse_mean_set("3 2 1\n1 0\n0 1\n-1 -1\n"));
  CHECK_THROWS(parse_mean_set("3 2 1\n1 0\n"));
  CHECK_THROWS(parse_mean_set("garbage"));
}
