#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmlda/mmd_core.hpp"
#include "mmlda/tensor.hpp"

namespace mmlda {

/// Labelled feature matrix. Pixel-space datasets are confined to [-0.5, 0.5];
/// latent-space samples (sample_mmd) are unbounded.
struct Dataset {
  Tensor features;
  std::vector<int> labels;
  std::size_t classes = 0;
  std::string name;
  std::vector<double> empirical_priors;  // N_k / N
  bool pixel_range = true;

  static Dataset make(Tensor features, std::vector<int> labels, std::size_t classes,
                      std::string name, bool pixel_range = true);

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }
  std::vector<std::size_t> class_counts() const;
  Dataset subset(const std::vector<std::size_t>& idx) const;
};

std::vector<double> empirical_priors(const std::vector<int>& labels, std::size_t classes);

// IDX container errors.
class IdxError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class IdxBadMagic : public IdxError {
 public:
  using IdxError::IdxError;
};
class IdxTruncated : public IdxError {
 public:
  using IdxError::IdxError;
};
class IdxCountMismatch : public IdxError {
 public:
  using IdxError::IdxError;
};

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct IdxImages {
  std::size_t rows = 0, cols = 0;
  Tensor pixels;  // count x (rows * cols), mapped to [-0.5, 0.5]
};

IdxImages parse_idx_images(const std::string& bytes);
std::vector<int> parse_idx_labels(const std::string& bytes);
/// Pixel bytes map affinely: v / 255 - 0.5.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);
Dataset load_idx_bytes(const std::string& images, const std::string& labels, std::string name = "idx");

/// Inverse of the pixel map, rounding to the nearest byte.
std::string encode_idx_images(const Tensor& features, std::size_t rows, std::size_t cols);
std::string encode_idx_labels(const std::vector<int>& labels);

/// Latent-space generative model: P(y = k) = priors[k], P(z | y = k) = N(mu_k, I).
struct MMDSpec {
  MeanSet means;
  std::vector<double> priors;
};

Dataset sample_mmd(const MMDSpec& spec, std::size_t n, std::uint64_t seed);

enum class SyntheticKind { arcs, gmm_input };
SyntheticKind synthetic_kind_from_string(const std::string& s);
std::string to_string(SyntheticKind k);

inline constexpr double kDefaultArcNoise = 0.02;

/// Arc k: radius radii[k], angles [start[k], start[k] + span].
struct ArcGeometry {
  std::vector<double> radii;
  std::vector<double> start;
  double span = 0.0;
};
ArcGeometry arc_geometry(std::size_t classes);
/// Label of the arc closest to a 2-D point.
int nearest_arc(const ArcGeometry& g, double x, double y);

/// 2-D inputs in [-0.5, 0.5] with uniform labels. "arcs": concentric arc
/// segments plus isotropic noise; "gmm_input": anisotropic Gaussians on a ring.
Dataset sample_synthetic_nonlinear(SyntheticKind kind, std::size_t classes, std::size_t n,
                                   double noise, std::uint64_t seed);

struct BiasProbability {
  std::vector<double> alpha;
  void validate() const;
};

/// Keeps each example independently with probability alpha[label].
Dataset class_biased_subsample(const Dataset& d, const BiasProbability& bp, std::uint64_t seed);

enum class BiasKind { bp1, bp2 };
BiasKind bias_kind_from_string(const std::string& s);
std::string to_string(BiasKind k);

/// bp1: 10 seeded permutations of (0.1, ..., 1.0).
/// bp2: (0.2, ..., 0.2) with 1.0 at position k, k = 0..9.
std::vector<BiasProbability> bias_counterparts(BiasKind kind, std::uint64_t seed);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Stratified k-fold partition: folds are disjoint and cover every index.
std::vector<Fold> kfold_split(const Dataset& d, std::size_t k, std::uint64_t seed);

/// CSV: label,x_1,...,x_d
void write_dataset_csv(std::ostream& out, const Dataset& d);

}  // namespace mmlda
