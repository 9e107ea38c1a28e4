#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mmlda/model.hpp"
#include "mmlda/tensor.hpp"

namespace mmlda {

inline constexpr double kPixelMin = -0.5;
inline constexpr double kPixelMax = 0.5;

inline constexpr std::size_t kAllFeatures = static_cast<std::size_t>(-1);

enum class AttackKind { fgsm, bim, ilcm, jsma, cw };
std::string to_string(AttackKind k);
AttackKind attack_kind_from_string(const std::string& s);

struct AttackConfig {
  AttackKind kind = AttackKind::fgsm;
  double epsilon = 0.1;     // L-inf budget on the [-0.5, 0.5] pixel scale
  int steps = 10;           // BIM / ILCM iterations
  double kappa = 0.0;       // C&W confidence
  int search_steps = 9;     // C&W binary search rounds over c
  int max_iters = 1000;     // C&W optimizer iterations per c
  double cw_learning_rate = 1e-2;
  double cw_initial_c = 1e-2;
  std::size_t pixel_budget = kAllFeatures;  // JSMA
  std::uint64_t seed = 0;

  void validate() const;
};

struct AttackResult {
  Tensor adversarial;
  std::vector<int> clean_prediction;
  std::vector<int> adversarial_prediction;
  std::vector<int> target;  // -1 for untargeted attacks
  std::vector<std::uint8_t> success;
  std::vector<double> distortion;
  std::vector<double> linf;

  double success_rate() const;
};

/// Sign of v with sgn(0) = 0.
double sgn(double v);

/// Elementwise min(max(v, x - eps, -0.5), x + eps, 0.5).
double clip_to_ball(double v, double x, double eps);

/// x + eps * sgn(grad_x L(x, y)), clipped to the pixel range.
AttackResult fgsm(const Model& model, const Tensor& x, std::span<const int> y, double epsilon);
/// Per-row budgets; used for hybrid adversarial training.
AttackResult fgsm(const Model& model, const Tensor& x, std::span<const int> y,
                  std::span<const double> epsilon);

/// r steps of size eps / r, each projected with clip_to_ball.
AttackResult bim(const Model& model, const Tensor& x, std::span<const int> y, double epsilon,
                 int steps);
AttackResult bim(const Model& model, const Tensor& x, std::span<const int> y,
                 std::span<const double> epsilon, int steps);

/// Descends the loss of the least-likely clean class (fixed from the clean input).
AttackResult ilcm(const Model& model, const Tensor& x, double epsilon, int steps);
AttackResult ilcm(const Model& model, const Tensor& x, std::span<const double> epsilon, int steps);

/// Least-likely class per row; ties go to the lowest index.
std::vector<int> least_likely_class(const Model& model, const Tensor& x);

/// Single-feature saliency map attack towards `target`, each feature raised by
/// eps at most once, until the target is predicted or pixel_budget features
/// have been changed.
AttackResult jsma(const Model& model, const Tensor& x, std::span<const int> target,
                  double epsilon, std::size_t pixel_budget);

/// Saliency map over features for one example (exposed for inspection).
std::vector<double> jsma_saliency(const Model& model, std::span<const double> x, int target);

/// Untargeted C&W L2 with tanh box constraint and binary search over c.
/// Failed rows keep x and report +inf distortion.
AttackResult cw_l2(const Model& model, const Tensor& x, std::span<const int> y,
                   const AttackConfig& config);

/// Root-mean-square pixel difference on the [0, 255] scale.
double distortion(std::span<const double> x, std::span<const double> x_star);

/// Dispatches on config.kind. JSMA targets (y + 1) mod L.
AttackResult run_attack(const Model& model, const Tensor& x, std::span<const int> y,
                        const AttackConfig& config);

/// CSV rows: id,clean_label,clean_prediction,adversarial_prediction,success,linf,distortion
void write_attack_csv(std::ostream& out, const AttackResult& result, std::span<const int> labels);

/// (x* - x) / 2, the exported adversarial noise.
Tensor adversarial_noise(const Tensor& x, const Tensor& x_star);

}  // namespace mmlda
