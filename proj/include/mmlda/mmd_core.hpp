#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmlda/tensor.hpp"

namespace mmlda {

/// L Gaussian means of dimension p with common squared norm C.
///
/// The struct does not enforce the max-Mahalanobis condition so that
/// arbitrary candidate sets can be checked; generate_opt_means() and
/// parse_mean_set() produce sets that satisfy it.
struct MeanSet {
  std::vector<std::vector<double>> means;
  double C = 0.0;

  std::size_t classes() const { return means.size(); }
  std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }

  friend bool operator==(const MeanSet&, const MeanSet&) = default;
};

/// Shared covariance; `identity` short-circuits the general path.
struct CovarianceModel {
  Tensor sigma;
  bool identity = false;

  static CovarianceModel make_identity(std::size_t p);
  static CovarianceModel general(Tensor sigma);
  std::size_t dim() const { return sigma.rows(); }
};

class CholeskyError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Deterministic construction of L means on the scaled regular simplex:
/// <mu_i, mu_j> = C if i == j, C / (1 - L) otherwise. Requires L <= p + 1.
MeanSet generate_opt_means(double C, std::size_t p, std::size_t L);

/// Applies a seeded random orthogonal transform. Inner products, and hence
/// the optimality condition, are preserved.
MeanSet rotate_means(const MeanSet& ms, std::uint64_t seed);

struct OptConditionReport {
  double max_diag_err = 0.0;
  double max_offdiag_err = 0.0;
  bool pass = false;
};

/// Pass iff every Gram entry is within tol * C of its optimal value.
OptConditionReport verify_opt_condition(const MeanSet& ms, double tol);

/// Euclidean distances between means (identity covariance). L x L.
Tensor pairwise_mahalanobis(const MeanSet& ms);

/// Half the minimum pairwise distance.
double approx_robustness(const MeanSet& ms);

/// sqrt(L C / (2 (L - 1))), attained iff the optimality condition holds.
double robustness_upper_bound(double C, std::size_t L);

/// Lower-triangular Q with positive diagonal and sigma = Q Q^T.
Tensor cholesky_lower(const Tensor& sigma);

/// [(a - b)^T sigma^{-1} (a - b)]^{1/2}
double mahalanobis_distance(std::span<const double> a, std::span<const double> b,
                            const CovarianceModel& cov);

struct WhiteningTransform {
  Tensor lower;                // Q
  std::vector<double> center;  // mean of the input means
  bool identity = false;

  /// Q^{-1} (x - center)
  std::vector<double> apply(std::span<const double> x) const;
};

struct WhiteningResult {
  std::vector<std::vector<double>> standardized;
  WhiteningTransform transform;
};

WhiteningResult whiten(const std::vector<std::vector<double>>& means, const CovarianceModel& cov);

/// Text form: "L p C" header, then L rows of p values, 17 significant digits.
std::string emit_mean_set(const MeanSet& ms);
MeanSet parse_mean_set(const std::string& text);
void save_mean_set(const MeanSet& ms, const std::filesystem::path& path);
MeanSet load_mean_set(const std::filesystem::path& path);

}  // namespace mmlda
