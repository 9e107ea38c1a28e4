#include "mmlda/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mmlda {

Model::Model(Network network, Head head) : network_(std::move(network)), head_(std::move(head)) {
  if (network_.latent_dim() != head_latent_dim(head_))
    throw ShapeError("network latent dim " + std::to_string(network_.latent_dim()) +
                     " != head dim " + std::to_string(head_latent_dim(head_)));
}

Tensor Model::scores(const Tensor& x) const { return head_scores(head_, network_.forward(x)); }

Tensor Model::probabilities(const Tensor& x) const { return softmax_rows(scores(x)); }

std::vector<int> Model::predict(const Tensor& x) const { return argmax_rows(scores(x)); }

ModelGradients Model::loss_and_gradients(const Tensor& x, std::span<const int> labels) const {
  ForwardCache cache;
  Tensor z = network_.forward(x, cache);
  HeadLoss hl = head_loss(head_, z, labels);
  NetworkGradients ng = network_.backward(hl.latent_grad, cache);
  ModelGradients out;
  out.loss = hl.loss;
  out.params = std::move(ng.params);
  for (auto& g : hl.param_grads) out.params.push_back(std::move(g));
  out.input = std::move(ng.input);
  return out;
}

Tensor Model::loss_input_gradient(const Tensor& x, std::span<const int> labels) const {
  ForwardCache cache;
  Tensor z = network_.forward(x, cache);
  CrossEntropy ce = cross_entropy(head_scores(head_, z), labels);
  // Undo the 1/n of the mean so each row carries its own loss gradient.
  const double n = static_cast<double>(x.rows());
  for (double& v : ce.dscores.values()) v *= n;
  HeadBackward hb = head_backward(head_, z, ce.dscores);
  return network_.backward(hb.latent, cache).input;
}

Tensor Model::scores_input_vjp(const Tensor& x, const Tensor& dscores) const {
  ForwardCache cache;
  Tensor z = network_.forward(x, cache);
  HeadBackward hb = head_backward(head_, z, dscores);
  return network_.backward(hb.latent, cache).input;
}

std::vector<std::span<double>> Model::parameter_blocks() {
  auto blocks = network_.parameter_blocks();
  for (auto b : head_parameter_blocks(head_)) blocks.push_back(b);
  return blocks;
}

std::vector<std::span<const double>> Model::parameter_blocks() const {
  auto blocks = network_.parameter_blocks();
  if (const auto* sr = std::get_if<SRHead>(&head_)) {
    blocks.emplace_back(sr->weight.values());
    blocks.emplace_back(sr->bias);
  }
  return blocks;
}

namespace {

double mean_loss(const Model& m, const Tensor& x, std::span<const int> labels) {
  return cross_entropy(m.scores(x), labels).loss;
}

// Relative error with a denominator floor. The difference quotient carries
// rounding noise of about eps |loss| / h whatever the gradient's size, so
// gradients below 1e6 times that level are effectively compared in absolute
// terms (at tol 1e-4, 100x the noise).
double rel_err(double a, double up, double down, double h) {
  const double n = (up - down) / (2 * h);
  const double noise = std::numeric_limits<double>::epsilon() * std::max(std::abs(up), std::abs(down)) / h;
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-7, 1e6 * noise});
}

}  // namespace

GradientCheckReport compare_gradients(const Model& model, const Tensor& batch,
                                      std::span<const int> labels, const ModelGradients& analytic,
                                      double h, double tol) {
  GradientCheckReport rep;
  Model probe = model;
  auto blocks = probe.parameter_blocks();
  if (blocks.size() != analytic.params.size())
    throw ShapeError("analytic gradient block count does not match model");
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (blocks[b].size() != analytic.params[b].size())
      throw ShapeError("analytic gradient block size does not match model");
    for (std::size_t i = 0; i < blocks[b].size(); ++i) {
      const double saved = blocks[b][i];
      blocks[b][i] = saved + h;
      const double up = mean_loss(probe, batch, labels);
      blocks[b][i] = saved - h;
      const double down = mean_loss(probe, batch, labels);
      blocks[b][i] = saved;
      rep.max_rel_err = std::max(rep.max_rel_err, rel_err(analytic.params[b][i], up, down, h));
      ++rep.checked;
    }
  }
  Tensor x = batch;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x.values()[i];
    x.values()[i] = saved + h;
    const double up = mean_loss(model, x, labels);
    x.values()[i] = saved - h;
    const double down = mean_loss(model, x, labels);
    x.values()[i] = saved;
    rep.max_rel_err = std::max(rep.max_rel_err, rel_err(analytic.input.values()[i], up, down, h));
    ++rep.checked;
  }
  rep.pass = rep.max_rel_err <= tol;
  return rep;
}

GradientCheckReport gradient_check(const Model& model, const Tensor& batch,
                                   std::span<const int> labels, double h, double tol) {
  return compare_gradients(model, batch, labels, model.loss_and_gradients(batch, labels), h, tol);
}

}  // namespace mmlda
