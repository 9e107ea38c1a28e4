#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmlda/tensor.hpp"

namespace mmlda {

enum class Activation { relu, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct DenseLayer {
  Tensor weight;  // out x in
  std::vector<double> bias;
  Activation activation = Activation::identity;

  std::size_t in_dim() const { return weight.cols(); }
  std::size_t out_dim() const { return weight.rows(); }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Activations recorded by a forward pass and consumed by backward().
struct ForwardCache {
  std::vector<Tensor> inputs;  // input to each layer
  std::vector<Tensor> pre;     // pre-activation output of each layer
};

/// Parameter gradients in parameter_blocks() order (W0, b0, W1, b1, ...)
/// plus the gradient with respect to the network input.
struct NetworkGradients {
  std::vector<std::vector<double>> params;
  Tensor input;
};

class CacheMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense feed-forward map x -> z.
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<DenseLayer> layers);

  /// input -> hidden[0] relu -> ... -> latent (identity). Weights are drawn
  /// uniformly from +-sqrt(6 / (fan_in + fan_out)); biases start at zero.
  static Network make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                          std::size_t latent_dim, std::uint64_t seed);
  /// Single identity-activation layer with W = I, b = 0.
  static Network identity(std::size_t dim);

  Tensor forward(const Tensor& batch) const;
  Tensor forward(const Tensor& batch, ForwardCache& cache) const;

  /// Reverse-mode pass for the loss whose gradient w.r.t. the output is head_grad.
  NetworkGradients backward(const Tensor& head_grad, const ForwardCache& cache) const;

  std::size_t input_dim() const;
  std::size_t latent_dim() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  std::vector<std::span<double>> parameter_blocks();
  std::vector<std::span<const double>> parameter_blocks() const;

  friend bool operator==(const Network&, const Network&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment accumulators mirroring a list of parameter blocks.
struct AdamState {
  AdamConfig config;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  long step = 0;

  AdamState() = default;
  AdamState(AdamConfig cfg, const std::vector<std::span<double>>& params);
};

/// One bias-corrected Adam update in place.
void adam_step(AdamState& state, const std::vector<std::span<double>>& params,
               const std::vector<std::vector<double>>& grads);

}  // namespace mmlda
