#include "mmlda/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace mmlda {

std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::fgsm: return "fgsm";
    case AttackKind::bim: return "bim";
    case AttackKind::ilcm: return "ilcm";
    case AttackKind::jsma: return "jsma";
    case AttackKind::cw: return "cw";
  }
  return "?";
}

AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "fgsm") return AttackKind::fgsm;
  if (s == "bim") return AttackKind::bim;
  if (s == "ilcm") return AttackKind::ilcm;
  if (s == "jsma") return AttackKind::jsma;
  if (s == "cw") return AttackKind::cw;
  throw std::invalid_argument("unknown attack '" + s + "'");
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (search_steps < 1) throw std::invalid_argument("search_steps must be >= 1");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (!(kappa >= 0.0)) throw std::invalid_argument("kappa must be >= 0");
}

double AttackResult::success_rate() const {
  if (success.empty()) return 0.0;
  std::size_t n = 0;
  for (auto s : success) n += s ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(success.size());
}

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double clip_to_ball(double v, double x, double eps) {
  return std::min({std::max({v, x - eps, kPixelMin}), x + eps, kPixelMax});
}

double distortion(std::span<const double> x, std::span<const double> x_star) {
  if (x.size() != x_star.size()) throw ShapeError("distortion: shape mismatch");
  if (x.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = 255.0 * (x_star[i] - x[i]);
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(x.size()));
}

Tensor adversarial_noise(const Tensor& x, const Tensor& x_star) {
  if (x.shape() != x_star.shape()) throw ShapeError("noise: shape mismatch");
  Tensor n(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) n.values()[i] = 0.5 * (x_star.values()[i] - x.values()[i]);
  return n;
}

namespace {

void check_batch(const Model& model, const Tensor& x, std::size_t labels) {
  if (x.cols() != model.input_dim()) throw ShapeError("attack input width != model input_dim");
  if (labels != x.rows()) throw ShapeError("label count does not match batch");
}

// Fills predictions, distortion and L-inf; success is set by the caller.
AttackResult finish(const Model& model, const Tensor& x, Tensor adv, std::vector<int> clean,
                    std::vector<int> target) {
  AttackResult r;
  r.adversarial_prediction = model.predict(adv);
  r.clean_prediction = std::move(clean);
  r.target = std::move(target);
  r.success.assign(x.rows(), 0);
  r.distortion.resize(x.rows());
  r.linf.resize(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    r.distortion[i] = distortion(x.row(i), adv.row(i));
    double m = 0.0;
    for (std::size_t k = 0; k < x.cols(); ++k) m = std::max(m, std::abs(adv(i, k) - x(i, k)));
    r.linf[i] = m;
  }
  r.adversarial = std::move(adv);
  return r;
}

void mark_untargeted(AttackResult& r) {
  for (std::size_t i = 0; i < r.success.size(); ++i)
    r.success[i] = r.adversarial_prediction[i] != r.clean_prediction[i];
}

void mark_targeted(AttackResult& r) {
  for (std::size_t i = 0; i < r.success.size(); ++i)
    r.success[i] = r.adversarial_prediction[i] == r.target[i] &&
                   r.clean_prediction[i] != r.target[i];
}

std::vector<double> broadcast(double eps, std::size_t n) { return std::vector<double>(n, eps); }

void check_eps(std::span<const double> eps, std::size_t n) {
  if (eps.size() != n) throw ShapeError("epsilon count does not match batch");
  for (double e : eps)
    if (!(e >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
}

// direction +1 ascends the loss of `labels`, -1 descends it.
Tensor sign_iterate(const Model& model, const Tensor& x, std::span<const int> labels,
                    std::span<const double> eps, int steps, double direction) {
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  Tensor adv = x;
  for (int s = 0; s < steps; ++s) {
    Tensor g = model.loss_input_gradient(adv, labels);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const double step = eps[i] / static_cast<double>(steps);
      for (std::size_t k = 0; k < x.cols(); ++k) {
        const double v = adv(i, k) + direction * step * sgn(g(i, k));
        adv(i, k) = clip_to_ball(v, x(i, k), eps[i]);
      }
    }
  }
  return adv;
}

}  // namespace

AttackResult fgsm(const Model& model, const Tensor& x, std::span<const int> y, double epsilon) {
  return fgsm(model, x, y, broadcast(epsilon, x.rows()));
}

AttackResult fgsm(const Model& model, const Tensor& x, std::span<const int> y,
                  std::span<const double> epsilon) {
  check_batch(model, x, y.size());
  check_eps(epsilon, x.rows());
  Tensor g = model.loss_input_gradient(x, y);
  Tensor adv = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t k = 0; k < x.cols(); ++k)
      adv(i, k) = std::clamp(x(i, k) + epsilon[i] * sgn(g(i, k)), kPixelMin, kPixelMax);
  auto r = finish(model, x, std::move(adv), model.predict(x), std::vector<int>(x.rows(), -1));
  mark_untargeted(r);
  return r;
}

AttackResult bim(const Model& model, const Tensor& x, std::span<const int> y, double epsilon,
                 int steps) {
  return bim(model, x, y, broadcast(epsilon, x.rows()), steps);
}

AttackResult bim(const Model& model, const Tensor& x, std::span<const int> y,
                 std::span<const double> epsilon, int steps) {
  check_batch(model, x, y.size());
  check_eps(epsilon, x.rows());
  Tensor adv = sign_iterate(model, x, y, epsilon, steps, +1.0);
  auto r = finish(model, x, std::move(adv), model.predict(x), std::vector<int>(x.rows(), -1));
  mark_untargeted(r);
  return r;
}

std::vector<int> least_likely_class(const Model& model, const Tensor& x) {
  Tensor s = model.scores(x);
  std::vector<int> out(s.rows());
  for (std::size_t i = 0; i < s.rows(); ++i) {
    auto row = s.row(i);
    out[i] = static_cast<int>(std::min_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

AttackResult ilcm(const Model& model, const Tensor& x, double epsilon, int steps) {
  return ilcm(model, x, broadcast(epsilon, x.rows()), steps);
}

AttackResult ilcm(const Model& model, const Tensor& x, std::span<const double> epsilon,
                  int steps) {
  check_batch(model, x, x.rows());
  check_eps(epsilon, x.rows());
  std::vector<int> target = least_likely_class(model, x);
  Tensor adv = sign_iterate(model, x, target, epsilon, steps, -1.0);
  auto r = finish(model, x, std::move(adv), model.predict(x), std::move(target));
  mark_targeted(r);
  return r;
}

namespace {

// Rows of d F_k / d x for every class k at a single input.
Tensor probability_jacobian(const Model& model, std::span<const double> x) {
  Tensor xi(1, x.size(), std::vector<double>(x.begin(), x.end()));
  ForwardCache cache;
  Tensor z = model.network().forward(xi, cache);
  Tensor probs = softmax_rows(head_scores(model.head(), z));
  const std::size_t L = probs.cols();
  Tensor jac(L, x.size());
  for (std::size_t k = 0; k < L; ++k) {
    // d F_k / d s_j = F_k (delta_kj - F_j)
    Tensor ds(1, L);
    for (std::size_t j = 0; j < L; ++j)
      ds(0, j) = probs(0, k) * ((j == k ? 1.0 : 0.0) - probs(0, j));
    HeadBackward hb = head_backward(model.head(), z, ds);
    Tensor gx = model.network().backward(hb.latent, cache).input;
    std::copy(gx.values().begin(), gx.values().end(), jac.row(k).begin());
  }
  return jac;
}

std::vector<double> saliency_from_jacobian(const Tensor& jac, int target) {
  std::vector<double> s(jac.cols(), 0.0);
  for (std::size_t i = 0; i < jac.cols(); ++i) {
    const double toward = jac(static_cast<std::size_t>(target), i);
    double others = 0.0;
    for (std::size_t j = 0; j < jac.rows(); ++j)
      if (static_cast<int>(j) != target) others += jac(j, i);
    s[i] = (toward < 0.0 || others > 0.0) ? 0.0 : toward * std::abs(others);
  }
  return s;
}

}  // namespace

std::vector<double> jsma_saliency(const Model& model, std::span<const double> x, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= model.classes())
    throw std::out_of_range("jsma target outside [0, L)");
  return saliency_from_jacobian(probability_jacobian(model, x), target);
}

AttackResult jsma(const Model& model, const Tensor& x, std::span<const int> target,
                  double epsilon, std::size_t pixel_budget) {
  check_batch(model, x, target.size());
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
  for (int t : target)
    if (t < 0 || static_cast<std::size_t>(t) >= model.classes())
      throw std::out_of_range("jsma target outside [0, L)");
  const std::size_t d = x.cols();
  const std::size_t budget = std::min(pixel_budget, d);
  const bool frozen = epsilon == 0.0;

  Tensor adv = x;
  for (std::size_t row = 0; row < x.rows(); ++row) {
    if (frozen) break;
    std::vector<bool> used(d, false);
    std::size_t changed = 0;
    Tensor xi(1, d);
    while (changed < budget) {
      std::copy(adv.row(row).begin(), adv.row(row).end(), xi.row(0).begin());
      if (model.predict(xi)[0] == target[row]) break;
      auto sal = jsma_saliency(model, xi.row(0), target[row]);
      std::size_t best = d;
      double best_val = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        if (used[i] || adv(row, i) >= kPixelMax) continue;
        if (sal[i] > best_val) {
          best_val = sal[i];
          best = i;
        }
      }
      if (best == d) break;  // saliency map is zero everywhere
      adv(row, best) = clip_to_ball(adv(row, best) + epsilon, x(row, best), epsilon);
      used[best] = true;
      ++changed;
    }
  }
  auto r = finish(model, x, std::move(adv), model.predict(x),
                  std::vector<int>(target.begin(), target.end()));
  mark_targeted(r);
  return r;
}

namespace {

struct CwRowResult {
  bool success = false;
  std::vector<double> best;
  double best_l2 = std::numeric_limits<double>::infinity();
};

CwRowResult cw_row(const Model& model, std::span<const double> x, int y, const AttackConfig& cfg) {
  const std::size_t d = x.size();
  const std::size_t L = model.classes();
  const auto label = static_cast<std::size_t>(y);
  CwRowResult out;

  double lo = 0.0, hi = 1e10, c = cfg.cw_initial_c;
  const int abort_every = std::max(1, cfg.max_iters / 10);
  for (int round = 0; round < cfg.search_steps; ++round) {
    std::vector<double> omega(d);
    for (std::size_t k = 0; k < d; ++k) omega[k] = std::atanh(2.0 * x[k] * 0.999999);
    std::vector<std::span<double>> blocks{std::span<double>(omega)};
    AdamState adam(AdamConfig{cfg.cw_learning_rate, 0.9, 0.999, 1e-8}, blocks);
    bool found = false;
    double prev = std::numeric_limits<double>::infinity();

    Tensor xs(1, d);
    for (int it = 0; it < cfg.max_iters; ++it) {
      for (std::size_t k = 0; k < d; ++k) xs(0, k) = 0.5 * std::tanh(omega[k]);
      ForwardCache cache;
      Tensor z = model.network().forward(xs, cache);
      Tensor s = head_scores(model.head(), z);

      std::size_t other = label == 0 ? 1 : 0;
      for (std::size_t k = 0; k < L; ++k)
        if (k != label && s(0, k) > s(0, other)) other = k;
      const double gap = s(0, label) - s(0, other);
      const double f = std::max(gap, -cfg.kappa);
      double l2 = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = xs(0, k) - x[k];
        l2 += diff * diff;
      }
      const double loss = l2 + c * f;

      const auto predicted = static_cast<std::size_t>(argmax_rows(s)[0]);
      if (predicted != label && -gap >= cfg.kappa) {
        found = true;
        if (l2 < out.best_l2) {
          out.best_l2 = l2;
          out.best.assign(xs.values().begin(), xs.values().end());
          out.success = true;
        }
      }

      if (it % abort_every == 0) {
        if (loss > prev * 0.9999) break;
        prev = loss;
      }

      Tensor ds(1, L);
      if (gap > -cfg.kappa) {
        ds(0, label) = c;
        ds(0, other) = -c;
      }
      HeadBackward hb = head_backward(model.head(), z, ds);
      Tensor gx = model.network().backward(hb.latent, cache).input;
      std::vector<std::vector<double>> grad(1, std::vector<double>(d));
      for (std::size_t k = 0; k < d; ++k) {
        const double t = std::tanh(omega[k]);
        const double dx_domega = 0.5 * (1.0 - t * t);
        grad[0][k] = (2.0 * (xs(0, k) - x[k]) + gx(0, k)) * dx_domega;
      }
      adam_step(adam, blocks, grad);
    }

    if (found) {
      hi = std::min(hi, c);
      c = 0.5 * (lo + hi);
    } else {
      lo = std::max(lo, c);
      c = hi < 1e9 ? 0.5 * (lo + hi) : c * 10.0;
    }
  }
  return out;
}

}  // namespace

AttackResult cw_l2(const Model& model, const Tensor& x, std::span<const int> y,
                   const AttackConfig& config) {
  config.validate();
  check_batch(model, x, y.size());
  Tensor adv = x;
  std::vector<std::uint8_t> ok(x.rows(), 0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (y[i] < 0 || static_cast<std::size_t>(y[i]) >= model.classes())
      throw std::out_of_range("label outside [0, L)");
    CwRowResult row = cw_row(model, x.row(i), y[i], config);
    if (row.success) {
      std::copy(row.best.begin(), row.best.end(), adv.row(i).begin());
      ok[i] = 1;
    }
  }
  auto r = finish(model, x, std::move(adv), model.predict(x), std::vector<int>(x.rows(), -1));
  for (std::size_t i = 0; i < x.rows(); ++i) {
    r.success[i] = ok[i];
    if (!ok[i]) r.distortion[i] = std::numeric_limits<double>::infinity();
  }
  return r;
}

AttackResult run_attack(const Model& model, const Tensor& x, std::span<const int> y,
                        const AttackConfig& config) {
  config.validate();
  switch (config.kind) {
    case AttackKind::fgsm: return fgsm(model, x, y, config.epsilon);
    case AttackKind::bim: return bim(model, x, y, config.epsilon, config.steps);
    case AttackKind::ilcm: return ilcm(model, x, config.epsilon, config.steps);
    case AttackKind::jsma: {
      std::vector<int> target(y.size());
      const int L = static_cast<int>(model.classes());
      for (std::size_t i = 0; i < y.size(); ++i) target[i] = (y[i] + 1) % L;
      return jsma(model, x, target, config.epsilon, config.pixel_budget);
    }
    case AttackKind::cw: return cw_l2(model, x, y, config);
  }
  throw std::logic_error("unknown attack kind");
}

void write_attack_csv(std::ostream& out, const AttackResult& result, std::span<const int> labels) {
  out << "id,clean_label,clean_prediction,adversarial_prediction,success,linf,distortion\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < result.success.size(); ++i) {
    out << i << ',' << labels[i] << ',' << result.clean_prediction[i] << ','
        << result.adversarial_prediction[i] << ',' << int(result.success[i]) << ','
        << result.linf[i] << ',' << result.distortion[i] << '\n';
  }
  out.precision(old);
}

}  // namespace mmlda
