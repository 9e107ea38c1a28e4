#include "mmlda/heads.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mmlda/rng.hpp"

namespace mmlda {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void check_latent(const Tensor& z, std::size_t p) {
  if (z.cols() != p)
    throw ShapeError("latent width " + std::to_string(z.cols()) + " != head dimension " +
                     std::to_string(p));
}

}  // namespace

SRHead SRHead::make(std::size_t classes, std::size_t latent_dim, std::uint64_t seed) {
  SRHead h;
  h.weight = Tensor(classes, latent_dim);
  Rng rng(seed);
  const double limit = std::sqrt(6.0 / static_cast<double>(classes + latent_dim));
  for (double& w : h.weight.values()) w = rng.uniform(-limit, limit);
  h.bias.assign(classes, 0.0);
  return h;
}

MMLDAHead MMLDAHead::make(MeanSet means, std::vector<double> priors) {
  if (priors.size() != means.classes())
    throw std::invalid_argument("prior count does not match class count");
  double total = 0.0;
  for (double p : priors) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw std::invalid_argument("priors must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("priors must sum to 1");
  if (!verify_opt_condition(means, 1e-9).pass)
    throw std::invalid_argument("mean set does not satisfy the max-Mahalanobis condition");
  return MMLDAHead{std::move(means), std::move(priors)};
}

MMLDAHead MMLDAHead::make_uniform(MeanSet means) {
  const std::size_t L = means.classes();
  return make(std::move(means), std::vector<double>(L, 1.0 / static_cast<double>(L)));
}

std::string to_string(HeadKind k) { return k == HeadKind::sr ? "sr" : "mmlda"; }

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "sr") return HeadKind::sr;
  if (s == "mmlda" || s == "mm-lda") return HeadKind::mmlda;
  throw std::invalid_argument("unknown head kind '" + s + "'");
}

HeadKind head_kind(const Head& h) {
  return std::holds_alternative<SRHead>(h) ? HeadKind::sr : HeadKind::mmlda;
}

std::size_t head_classes(const Head& h) {
  return std::visit([](const auto& x) { return x.classes(); }, h);
}

std::size_t head_latent_dim(const Head& h) {
  return std::visit([](const auto& x) { return x.latent_dim(); }, h);
}

Tensor head_scores(const Head& head, const Tensor& z) {
  return std::visit(
      overloaded{
          [&](const SRHead& h) {
            check_latent(z, h.latent_dim());
            Tensor s = matmul_transposed(z, h.weight);
            for (std::size_t r = 0; r < s.rows(); ++r)
              for (std::size_t k = 0; k < s.cols(); ++k) s(r, k) += h.bias[k];
            return s;
          },
          [&](const MMLDAHead& h) {
            check_latent(z, h.latent_dim());
            const std::size_t L = h.classes();
            std::vector<double> log_prior(L);
            for (std::size_t k = 0; k < L; ++k)
              log_prior[k] = h.priors[k] > 0.0 ? std::log(h.priors[k]) : kZeroPriorScore;
            Tensor s(z.rows(), L);
            for (std::size_t r = 0; r < z.rows(); ++r)
              for (std::size_t k = 0; k < L; ++k)
                s(r, k) = h.priors[k] > 0.0
                              ? log_prior[k] - 0.5 * squared_distance(z.row(r), h.means.means[k])
                              : kZeroPriorScore;
            return s;
          },
      },
      head);
}

Tensor softmax_rows(const Tensor& scores) {
  Tensor p(scores.rows(), scores.cols());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    auto s = scores.row(r);
    const double m = *std::max_element(s.begin(), s.end());
    double total = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      p(r, k) = std::exp(s[k] - m);
      total += p(r, k);
    }
    for (std::size_t k = 0; k < s.size(); ++k) p(r, k) /= total;
  }
  return p;
}

std::vector<int> argmax_rows(const Tensor& scores) {
  std::vector<int> out(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    auto s = scores.row(r);
    // max_element returns the first maximum.
    out[r] = static_cast<int>(std::max_element(s.begin(), s.end()) - s.begin());
  }
  return out;
}

std::vector<int> predict(const Head& head, const Tensor& z) {
  return argmax_rows(head_scores(head, z));
}

HeadBackward head_backward(const Head& head, const Tensor& z, const Tensor& dscores) {
  return std::visit(
      overloaded{
          [&](const SRHead& h) {
            check_latent(z, h.latent_dim());
            const std::size_t n = z.rows(), L = h.classes(), p = h.latent_dim();
            HeadBackward out;
            out.latent = Tensor(n, p);
            std::vector<double> dw(L * p, 0.0), db(L, 0.0);
            for (std::size_t r = 0; r < n; ++r)
              for (std::size_t k = 0; k < L; ++k) {
                const double g = dscores(r, k);
                if (g == 0.0) continue;
                db[k] += g;
                for (std::size_t j = 0; j < p; ++j) {
                  dw[k * p + j] += g * z(r, j);
                  out.latent(r, j) += g * h.weight(k, j);
                }
              }
            out.params = {std::move(dw), std::move(db)};
            return out;
          },
          [&](const MMLDAHead& h) {
            check_latent(z, h.latent_dim());
            const std::size_t n = z.rows(), L = h.classes(), p = h.latent_dim();
            HeadBackward out;
            out.latent = Tensor(n, p);
            for (std::size_t r = 0; r < n; ++r)
              for (std::size_t k = 0; k < L; ++k) {
                const double g = dscores(r, k);
                if (g == 0.0 || !(h.priors[k] > 0.0)) continue;
                const auto& mu = h.means.means[k];
                for (std::size_t j = 0; j < p; ++j) out.latent(r, j) += g * (mu[j] - z(r, j));
              }
            return out;
          },
      },
      head);
}

CrossEntropy cross_entropy(const Tensor& scores, std::span<const int> labels) {
  const std::size_t n = scores.rows(), L = scores.cols();
  if (labels.size() != n) throw ShapeError("label count does not match batch");
  CrossEntropy ce;
  ce.probabilities = softmax_rows(scores);
  ce.dscores = Tensor(n, L);
  const double inv_n = n ? 1.0 / static_cast<double>(n) : 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= L)
      throw std::out_of_range("label " + std::to_string(y) + " outside [0, L)");
    auto s = scores.row(r);
    const std::size_t top = static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
    // log-sum-exp via log1p so that confident rows keep tiny losses.
    double rest = 0.0;
    for (std::size_t k = 0; k < L; ++k)
      if (k != top) rest += std::exp(s[k] - s[top]);
    total += s[top] + std::log1p(rest) - s[static_cast<std::size_t>(y)];

    // p - onehot; the label entry is -sum of the others to avoid 1 - p cancellation.
    double others = 0.0;
    for (std::size_t k = 0; k < L; ++k) {
      if (static_cast<int>(k) == y) continue;
      ce.dscores(r, k) = ce.probabilities(r, k) * inv_n;
      others += ce.probabilities(r, k);
    }
    ce.dscores(r, static_cast<std::size_t>(y)) = -others * inv_n;
  }
  ce.loss = total * inv_n;
  return ce;
}

HeadLoss head_loss(const Head& head, const Tensor& z, std::span<const int> labels) {
  CrossEntropy ce = cross_entropy(head_scores(head, z), labels);
  HeadBackward back = head_backward(head, z, ce.dscores);
  return HeadLoss{ce.loss, std::move(back.latent), std::move(back.params)};
}

std::vector<std::span<double>> head_parameter_blocks(Head& head) {
  if (auto* sr = std::get_if<SRHead>(&head))
    return {std::span<double>(sr->weight.values()), std::span<double>(sr->bias)};
  return {};
}

}  // namespace mmlda
