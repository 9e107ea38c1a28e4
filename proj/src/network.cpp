#include "mmlda/network.hpp"

#include <cmath>

#include "mmlda/rng.hpp"

namespace mmlda {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

Network::Network(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw std::invalid_argument("network needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.out_dim())
      throw ShapeError("layer " + std::to_string(l) + " bias does not match weight rows");
    if (l > 0 && layer.in_dim() != layers_[l - 1].out_dim())
      throw ShapeError("layer " + std::to_string(l) + " input does not chain");
  }
}

Network Network::make_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                          std::size_t latent_dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  std::size_t fan_in = input_dim;
  auto add = [&](std::size_t fan_out, Activation act) {
    DenseLayer layer;
    layer.weight = Tensor(fan_out, fan_in);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& w : layer.weight.values()) w = rng.uniform(-limit, limit);
    layer.bias.assign(fan_out, 0.0);
    layer.activation = act;
    layers.push_back(std::move(layer));
    fan_in = fan_out;
  };
  for (std::size_t h : hidden) add(h, Activation::relu);
  add(latent_dim, Activation::identity);
  return Network(std::move(layers));
}

Network Network::identity(std::size_t dim) {
  DenseLayer layer;
  layer.weight = Tensor(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) layer.weight(i, i) = 1.0;
  layer.bias.assign(dim, 0.0);
  return Network({std::move(layer)});
}

std::size_t Network::input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
std::size_t Network::latent_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

namespace {

Tensor affine(const DenseLayer& layer, const Tensor& x) {
  const std::size_t n = x.rows(), in = layer.in_dim(), out = layer.out_dim();
  Tensor y(n, out);
  for (std::size_t r = 0; r < n; ++r) {
    const double* xr = x.values().data() + r * in;
    double* yr = y.values().data() + r * out;
    for (std::size_t j = 0; j < out; ++j) {
      const double* wj = layer.weight.values().data() + j * in;
      double s = layer.bias[j];
      for (std::size_t k = 0; k < in; ++k) s += wj[k] * xr[k];
      yr[j] = s;
    }
  }
  return y;
}

void activate(Activation act, Tensor& t) {
  if (act == Activation::relu)
    for (double& v : t.values()) v = v > 0.0 ? v : 0.0;
}

}  // namespace

Tensor Network::forward(const Tensor& batch) const {
  if (batch.cols() != input_dim())
    throw ShapeError("batch width " + std::to_string(batch.cols()) + " != input_dim " +
                     std::to_string(input_dim()));
  Tensor h = batch;
  for (const auto& layer : layers_) {
    h = affine(layer, h);
    activate(layer.activation, h);
  }
  return h;
}

Tensor Network::forward(const Tensor& batch, ForwardCache& cache) const {
  if (batch.cols() != input_dim())
    throw ShapeError("batch width " + std::to_string(batch.cols()) + " != input_dim " +
                     std::to_string(input_dim()));
  cache.inputs.clear();
  cache.pre.clear();
  Tensor h = batch;
  for (const auto& layer : layers_) {
    cache.inputs.push_back(h);
    Tensor pre = affine(layer, h);
    h = pre;
    activate(layer.activation, h);
    cache.pre.push_back(std::move(pre));
  }
  return h;
}

NetworkGradients Network::backward(const Tensor& head_grad, const ForwardCache& cache) const {
  if (cache.inputs.size() != layers_.size() || cache.pre.size() != layers_.size())
    throw CacheMismatch("cache layer count does not match network");
  const std::size_t n = head_grad.rows();
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (cache.inputs[l].rows() != n || cache.inputs[l].cols() != layers_[l].in_dim() ||
        cache.pre[l].cols() != layers_[l].out_dim())
      throw CacheMismatch("cache shapes do not match network layer " + std::to_string(l));
  }
  if (head_grad.cols() != latent_dim()) throw CacheMismatch("head gradient width != latent_dim");

  NetworkGradients grads;
  grads.params.resize(2 * layers_.size());
  Tensor g = head_grad;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const auto& layer = layers_[li];
    const Tensor& x = cache.inputs[li];
    const Tensor& pre = cache.pre[li];
    const std::size_t in = layer.in_dim(), out = layer.out_dim();
    if (layer.activation == Activation::relu)
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!(pre.values()[i] > 0.0)) g.values()[i] = 0.0;

    auto& dw = grads.params[2 * li];
    auto& db = grads.params[2 * li + 1];
    dw.assign(out * in, 0.0);
    db.assign(out, 0.0);
    Tensor gx(n, in);
    for (std::size_t r = 0; r < n; ++r) {
      const double* xr = x.values().data() + r * in;
      const double* gr = g.values().data() + r * out;
      double* gxr = gx.values().data() + r * in;
      for (std::size_t j = 0; j < out; ++j) {
        const double gj = gr[j];
        if (gj == 0.0) continue;
        db[j] += gj;
        double* dwj = dw.data() + j * in;
        const double* wj = layer.weight.values().data() + j * in;
        for (std::size_t k = 0; k < in; ++k) {
          dwj[k] += gj * xr[k];
          gxr[k] += gj * wj[k];
        }
      }
    }
    g = std::move(gx);
  }
  grads.input = std::move(g);
  return grads;
}

std::vector<std::span<double>> Network::parameter_blocks() {
  std::vector<std::span<double>> blocks;
  for (auto& layer : layers_) {
    blocks.emplace_back(layer.weight.values());
    blocks.emplace_back(layer.bias);
  }
  return blocks;
}

std::vector<std::span<const double>> Network::parameter_blocks() const {
  std::vector<std::span<const double>> blocks;
  for (const auto& layer : layers_) {
    blocks.emplace_back(layer.weight.values());
    blocks.emplace_back(layer.bias);
  }
  return blocks;
}

AdamState::AdamState(AdamConfig cfg, const std::vector<std::span<double>>& params)
    : config(cfg) {
  for (const auto& p : params) {
    first_moment.emplace_back(p.size(), 0.0);
    second_moment.emplace_back(p.size(), 0.0);
  }
}

void adam_step(AdamState& state, const std::vector<std::span<double>>& params,
               const std::vector<std::vector<double>>& grads) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw ShapeError("adam: parameter/gradient/state block counts differ");
  for (std::size_t b = 0; b < params.size(); ++b)
    if (params[b].size() != grads[b].size() || params[b].size() != state.first_moment[b].size())
      throw ShapeError("adam: block " + std::to_string(b) + " sizes differ");

  ++state.step;
  const auto& c = state.config;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.first_moment[b];
    auto& v = state.second_moment[b];
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double g = grads[b][i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      params[b][i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

}  // namespace mmlda
