#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mmlda/mmd_core.hpp"
#include "mmlda/tensor.hpp"

namespace mmlda {

/// Softmax regression: scores = W z + b.
struct SRHead {
  Tensor weight;  // L x p
  std::vector<double> bias;

  static SRHead make(std::size_t classes, std::size_t latent_dim, std::uint64_t seed);
  std::size_t classes() const { return weight.rows(); }
  std::size_t latent_dim() const { return weight.cols(); }

  friend bool operator==(const SRHead&, const SRHead&) = default;
};

/// LDA over fixed max-Mahalanobis means with identity covariance:
/// score_k = log pi_k - ||z - mu_k||^2 / 2. Means and priors are not trained.
struct MMLDAHead {
  MeanSet means;
  std::vector<double> priors;

  /// Validates priors (nonnegative, sum to 1 within 1e-12) and the mean set.
  static MMLDAHead make(MeanSet means, std::vector<double> priors);
  static MMLDAHead make_uniform(MeanSet means);
  std::size_t classes() const { return means.classes(); }
  std::size_t latent_dim() const { return means.dim(); }

  friend bool operator==(const MMLDAHead&, const MMLDAHead&) = default;
};

using Head = std::variant<SRHead, MMLDAHead>;

enum class HeadKind { sr, mmlda };
std::string to_string(HeadKind k);
HeadKind head_kind_from_string(const std::string& s);
HeadKind head_kind(const Head& h);
std::size_t head_classes(const Head& h);
std::size_t head_latent_dim(const Head& h);

/// Score assigned to a class whose prior is exactly zero. Finite so that
/// score differences stay finite; exp(kZeroPriorScore - anything) is 0.
inline constexpr double kZeroPriorScore = -1e30;

/// Pre-softmax scores, n x L.
Tensor head_scores(const Head& head, const Tensor& z);

/// Row-wise softmax with max subtraction.
Tensor softmax_rows(const Tensor& scores);

/// Argmax per row; ties go to the lowest class index.
std::vector<int> argmax_rows(const Tensor& scores);
std::vector<int> predict(const Head& head, const Tensor& z);

struct HeadBackward {
  Tensor latent;                             // d/dz
  std::vector<std::vector<double>> params;   // SR: {dW, db}; MM-LDA: empty
};

/// Vector-Jacobian product of head_scores at z with cotangent dscores.
HeadBackward head_backward(const Head& head, const Tensor& z, const Tensor& dscores);

struct CrossEntropy {
  double loss = 0.0;     // mean over rows
  Tensor dscores;        // gradient of the mean loss w.r.t. scores
  Tensor probabilities;
};

/// Mean cross-entropy of softmax(scores) against integer labels.
CrossEntropy cross_entropy(const Tensor& scores, std::span<const int> labels);

struct HeadLoss {
  double loss = 0.0;
  Tensor latent_grad;
  std::vector<std::vector<double>> param_grads;
};

HeadLoss head_loss(const Head& head, const Tensor& z, std::span<const int> labels);

std::vector<std::span<double>> head_parameter_blocks(Head& head);

}  // namespace mmlda
