#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmlda/attacks.hpp"
#include "mmlda/heads.hpp"

namespace mmlda {

struct DatasetSpec {
  std::string kind = "arcs";  // arcs | gmm_input | mmd | idx
  std::size_t classes = 3;
  std::size_t n_train = 2000;
  std::size_t n_test = 1000;
  double noise = kDefaultNoise;
  double mmd_C = 100.0;  // mean norm for kind = mmd
  std::uint64_t seed = 1;
  std::string train_images, train_labels, test_images, test_labels;  // kind = idx

  static constexpr double kDefaultNoise = 0.02;
  friend bool operator==(const DatasetSpec&, const DatasetSpec&) = default;
};

struct NetworkSpec {
  std::vector<std::size_t> hidden{64, 64};
  std::size_t latent_dim = 0;  // 0 selects max(10, L - 1)
  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct TrainingSpec {
  long steps = 2000;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  friend bool operator==(const TrainingSpec&, const TrainingSpec&) = default;
};

struct AttackGrid {
  std::vector<AttackKind> kinds{AttackKind::fgsm, AttackKind::bim, AttackKind::ilcm};
  std::vector<double> epsilons{0.04, 0.12, 0.20};
  int steps = 10;
  double kappa = 0.0;
  int search_steps = 9;
  int max_iters = 1000;
  std::size_t pixel_budget = kAllFeatures;
  std::size_t max_examples = 0;  // 0 evaluates the whole test split
  friend bool operator==(const AttackGrid&, const AttackGrid&) = default;
};

enum class FinetuneMode { none, sat, hat };
std::string to_string(FinetuneMode m);
FinetuneMode finetune_mode_from_string(const std::string& s);

struct FinetuneSpec {
  FinetuneMode mode = FinetuneMode::none;
  AttackKind attack = AttackKind::fgsm;
  double epsilon = 0.1;  // SAT budget
  double hat_min = 0.02;
  double hat_max = 0.20;
  long steps = 500;
  double learning_rate = 1e-3;
  friend bool operator==(const FinetuneSpec&, const FinetuneSpec&) = default;
};

enum class PriorsMode { uniform, empirical };
std::string to_string(PriorsMode m);
PriorsMode priors_mode_from_string(const std::string& s);

struct ExperimentConfig {
  DatasetSpec dataset;
  NetworkSpec network;
  HeadKind head = HeadKind::mmlda;
  double C = 100.0;
  PriorsMode priors = PriorsMode::uniform;
  TrainingSpec training;
  AttackGrid attacks;
  FinetuneSpec finetune;
  std::string output_dir = "out";

  /// Throws std::invalid_argument describing the first violation.
  void validate() const;
  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// JSON text; every field is emitted, missing fields keep their defaults on parse.
std::string config_to_text(const ExperimentConfig& cfg);
ExperimentConfig config_from_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

/// SHA-256 (hex) of the canonical config text, ignoring output_dir.
std::string config_digest(const ExperimentConfig& cfg);

std::string sha256_hex(const std::string& bytes);

}  // namespace mmlda
