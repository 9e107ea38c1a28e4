#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mmlda/heads.hpp"
#include "mmlda/network.hpp"
#include "mmlda/tensor.hpp"

namespace mmlda {

/// Gradients of a scalar batch loss: every trainable parameter block
/// (network blocks first, then head blocks) and the input batch.
struct ModelGradients {
  double loss = 0.0;
  std::vector<std::vector<double>> params;
  Tensor input;
};

/// Transformation network x -> z followed by a classifier head.
class Model {
 public:
  Model() = default;
  Model(Network network, Head head);

  const Network& network() const { return network_; }
  Network& network() { return network_; }
  const Head& head() const { return head_; }
  Head& head() { return head_; }
  HeadKind kind() const { return head_kind(head_); }
  std::size_t classes() const { return head_classes(head_); }
  std::size_t input_dim() const { return network_.input_dim(); }

  Tensor latent(const Tensor& x) const { return network_.forward(x); }
  /// Pre-softmax scores ("softmax_pre").
  Tensor scores(const Tensor& x) const;
  Tensor probabilities(const Tensor& x) const;
  std::vector<int> predict(const Tensor& x) const;

  /// Mean cross-entropy and its gradients.
  ModelGradients loss_and_gradients(const Tensor& x, std::span<const int> labels) const;

  /// Per-example cross-entropy gradient w.r.t. each input row (rows are
  /// independent, so this is the gradient of the summed loss).
  Tensor loss_input_gradient(const Tensor& x, std::span<const int> labels) const;

  /// Input gradient of sum(dscores .* scores(x)).
  Tensor scores_input_vjp(const Tensor& x, const Tensor& dscores) const;

  std::vector<std::span<double>> parameter_blocks();
  std::vector<std::span<const double>> parameter_blocks() const;

  friend bool operator==(const Model&, const Model&) = default;

 private:
  Network network_;
  Head head_;
};

struct GradientCheckReport {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  bool pass = false;
};

/// Compares analytic gradients of the mean cross-entropy against central
/// differences for every parameter and every input entry. The relative error
/// is |a - n| / max(|a|, |n|, 1e-7, 1e6 r), where r = eps max(|L+|, |L-|) / h
/// is the rounding noise of the difference quotient.
GradientCheckReport gradient_check(const Model& model, const Tensor& batch,
                                   std::span<const int> labels, double h, double tol);

/// Same comparison against caller-supplied analytic gradients.
GradientCheckReport compare_gradients(const Model& model, const Tensor& batch,
                                      std::span<const int> labels, const ModelGradients& analytic,
                                      double h, double tol);

}  // namespace mmlda
