#include "mmlda/mmd_core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mmlda/rng.hpp"

namespace mmlda {

namespace {

constexpr double kConstructionTol = 1e-9;

void check_structure(const MeanSet& ms) {
  if (ms.classes() < 2) throw std::invalid_argument("mean set needs at least 2 classes");
  if (ms.dim() < 1) throw std::invalid_argument("mean set dimension must be >= 1");
  for (const auto& m : ms.means)
    if (m.size() != ms.dim()) throw std::invalid_argument("mean vectors have mixed dimensions");
}

}  // namespace

CovarianceModel CovarianceModel::make_identity(std::size_t p) {
  CovarianceModel cov;
  cov.sigma = Tensor(p, p);
  for (std::size_t i = 0; i < p; ++i) cov.sigma(i, i) = 1.0;
  cov.identity = true;
  return cov;
}

CovarianceModel CovarianceModel::general(Tensor sigma) {
  if (sigma.rows() != sigma.cols()) throw std::invalid_argument("covariance must be square");
  CovarianceModel cov;
  cov.sigma = std::move(sigma);
  return cov;
}

MeanSet generate_opt_means(double C, std::size_t p, std::size_t L) {
  if (!(C > 0.0) || !std::isfinite(C)) throw std::invalid_argument("C must be positive");
  if (p < 1) throw std::invalid_argument("p must be >= 1");
  if (L < 2) throw std::invalid_argument("L must be >= 2");
  if (L > p + 1) {
    throw std::invalid_argument("no max-Mahalanobis mean set exists for L > p + 1 (L=" +
                                std::to_string(L) + ", p=" + std::to_string(p) + ")");
  }

  const double lm1 = static_cast<double>(L - 1);
  std::vector<std::vector<double>> mu(L, std::vector<double>(p, 0.0));
  mu[0][0] = 1.0;
  // 0-based: mean i gets coordinates 0..i-1 from the orthogonality system,
  // then coordinate i closes the unit norm.
  for (std::size_t i = 1; i < L; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double ip = dot(mu[i], mu[j]);
      mu[i][j] = -(1.0 + ip * lm1) / (mu[j][j] * lm1);
    }
    double residual = 1.0 - dot(mu[i], mu[i]);
    if (i + 1 == L) {
      // The last mean is fully determined by the others: the simplex spans L - 1 axes.
      if (std::abs(residual) > kConstructionTol)
        throw std::logic_error("mean construction residual too large for the last mean");
    } else {
      if (residual <= 0.0) throw std::logic_error("mean construction lost positivity");
      mu[i][i] = std::sqrt(residual);
    }
  }

  const double scale = std::sqrt(C);
  for (auto& m : mu)
    for (double& v : m) v *= scale;

  MeanSet ms{std::move(mu), C};
  for (std::size_t k = 0; k < p; ++k) {
    double s = 0.0;
    for (const auto& m : ms.means) s += m[k];
    if (std::abs(s) > kConstructionTol * scale * static_cast<double>(L))
      throw std::logic_error("constructed means do not sum to zero");
  }
  return ms;
}

MeanSet rotate_means(const MeanSet& ms, std::uint64_t seed) {
  check_structure(ms);
  const std::size_t p = ms.dim();
  Rng rng(seed);
  // Gram-Schmidt on a Gaussian matrix gives a Haar-ish orthogonal basis.
  std::vector<std::vector<double>> q(p, std::vector<double>(p));
  for (auto& row : q)
    for (double& v : row) v = rng.normal();
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double proj = dot(q[i], q[j]);
      for (std::size_t k = 0; k < p; ++k) q[i][k] -= proj * q[j][k];
    }
    double n = std::sqrt(dot(q[i], q[i]));
    for (double& v : q[i]) v /= n;
  }
  MeanSet out{std::vector<std::vector<double>>(ms.classes(), std::vector<double>(p, 0.0)), ms.C};
  for (std::size_t c = 0; c < ms.classes(); ++c)
    for (std::size_t i = 0; i < p; ++i) out.means[c][i] = dot(q[i], ms.means[c]);
  return out;
}

OptConditionReport verify_opt_condition(const MeanSet& ms, double tol) {
  check_structure(ms);
  const std::size_t L = ms.classes();
  const double off_target = ms.C / (1.0 - static_cast<double>(L));
  OptConditionReport r;
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = i; j < L; ++j) {
      double ip = dot(ms.means[i], ms.means[j]);
      if (i == j)
        r.max_diag_err = std::max(r.max_diag_err, std::abs(ip - ms.C));
      else
        r.max_offdiag_err = std::max(r.max_offdiag_err, std::abs(ip - off_target));
    }
  }
  const double bound = tol * ms.C;
  r.pass = r.max_diag_err <= bound && r.max_offdiag_err <= bound;
  return r;
}

Tensor pairwise_mahalanobis(const MeanSet& ms) {
  check_structure(ms);
  const std::size_t L = ms.classes();
  Tensor d(L, L);
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = i + 1; j < L; ++j) {
      double v = std::sqrt(squared_distance(ms.means[i], ms.means[j]));
      d(i, j) = v;
      d(j, i) = v;
    }
  return d;
}

double approx_robustness(const MeanSet& ms) {
  Tensor d = pairwise_mahalanobis(ms);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < d.rows(); ++i)
    for (std::size_t j = i + 1; j < d.cols(); ++j) m = std::min(m, d(i, j));
  return 0.5 * m;
}

double robustness_upper_bound(double C, std::size_t L) {
  if (!(C > 0.0)) throw std::invalid_argument("C must be positive");
  if (L < 2) throw std::invalid_argument("L must be >= 2");
  const double l = static_cast<double>(L);
  return std::sqrt(l * C / (2.0 * (l - 1.0)));
}

Tensor cholesky_lower(const Tensor& sigma) {
  const std::size_t n = sigma.rows();
  if (sigma.cols() != n) throw CholeskyError("covariance must be square");
  double scale = 0.0;
  for (double v : sigma.values()) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (std::abs(sigma(i, j) - sigma(j, i)) > 1e-12 * std::max(scale, 1.0))
        throw CholeskyError("covariance is not symmetric");

  Tensor q(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = sigma(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= q(j, k) * q(j, k);
    if (!(d > 0.0)) throw CholeskyError("covariance is not positive definite");
    q(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = sigma(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= q(i, k) * q(j, k);
      q(i, j) = s / q(j, j);
    }
  }
  return q;
}

namespace {

// Solves Q y = b for lower-triangular Q.
std::vector<double> forward_substitute(const Tensor& q, std::span<const double> b) {
  const std::size_t n = q.rows();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= q(i, k) * y[k];
    y[i] = s / q(i, i);
  }
  return y;
}

}  // namespace

double mahalanobis_distance(std::span<const double> a, std::span<const double> b,
                            const CovarianceModel& cov) {
  if (a.size() != b.size()) throw std::invalid_argument("dimension mismatch");
  if (cov.identity) return std::sqrt(squared_distance(a, b));
  if (cov.dim() != a.size()) throw std::invalid_argument("covariance dimension mismatch");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  auto y = forward_substitute(cholesky_lower(cov.sigma), diff);
  return std::sqrt(dot(y, y));
}

std::vector<double> WhiteningTransform::apply(std::span<const double> x) const {
  if (x.size() != center.size()) throw std::invalid_argument("dimension mismatch");
  std::vector<double> shifted(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) shifted[i] = x[i] - center[i];
  if (identity) return shifted;
  return forward_substitute(lower, shifted);
}

WhiteningResult whiten(const std::vector<std::vector<double>>& means, const CovarianceModel& cov) {
  if (means.empty()) throw std::invalid_argument("no means to whiten");
  const std::size_t p = means.front().size();
  if (cov.dim() != p) throw std::invalid_argument("covariance dimension mismatch");

  WhiteningResult out;
  out.transform.identity = cov.identity;
  out.transform.lower = cov.identity ? cov.sigma : cholesky_lower(cov.sigma);
  out.transform.center.assign(p, 0.0);
  for (const auto& m : means) {
    if (m.size() != p) throw std::invalid_argument("mean vectors have mixed dimensions");
    for (std::size_t k = 0; k < p; ++k) out.transform.center[k] += m[k];
  }
  for (double& c : out.transform.center) c /= static_cast<double>(means.size());
  for (const auto& m : means) out.standardized.push_back(out.transform.apply(m));
  return out;
}

std::string emit_mean_set(const MeanSet& ms) {
  check_structure(ms);
  std::ostringstream os;
  os.precision(17);
  os << ms.classes() << ' ' << ms.dim() << ' ' << ms.C << '\n';
  for (const auto& m : ms.means) {
    for (std::size_t k = 0; k < m.size(); ++k) os << (k ? " " : "") << m[k];
    os << '\n';
  }
  return os.str();
}

MeanSet parse_mean_set(const std::string& text) {
  std::istringstream is(text);
  std::size_t L = 0, p = 0;
  std::string c_token;
  if (!(is >> L >> p >> c_token)) throw std::invalid_argument("mean set header must be 'L p C'");
  MeanSet ms;
  ms.C = std::stod(c_token);
  if (!(ms.C > 0.0)) throw std::invalid_argument("mean set C must be positive");
  if (L < 2 || p < 1 || L > p + 1) throw std::invalid_argument("mean set header has invalid L/p");
  ms.means.assign(L, std::vector<double>(p));
  std::string tok;
  for (auto& m : ms.means)
    for (double& v : m) {
      if (!(is >> tok)) throw std::invalid_argument("mean set truncated");
      v = std::stod(tok);
      if (!std::isfinite(v)) throw std::invalid_argument("mean set has non-finite value");
    }
  if (is >> tok) throw std::invalid_argument("trailing data after mean set");

  for (const auto& m : ms.means)
    if (std::abs(dot(m, m) - ms.C) > kConstructionTol * ms.C)
      throw std::invalid_argument("mean norm differs from C");
  for (std::size_t k = 0; k < p; ++k) {
    double s = 0.0;
    for (const auto& m : ms.means) s += m[k];
    if (std::abs(s) > kConstructionTol * std::sqrt(ms.C) * static_cast<double>(L))
      throw std::invalid_argument("means do not sum to zero");
  }
  return ms;
}

void save_mean_set(const MeanSet& ms, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << emit_mean_set(ms);
}

MeanSet load_mean_set(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_mean_set(ss.str());
}

}  // namespace mmlda
