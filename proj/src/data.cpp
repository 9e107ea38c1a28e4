#include "mmlda/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "mmlda/rng.hpp"

namespace mmlda {

std::vector<double> empirical_priors(const std::vector<int>& labels, std::size_t classes) {
  std::vector<double> p(classes, 0.0);
  if (labels.empty()) return p;
  for (int y : labels) p[static_cast<std::size_t>(y)] += 1.0;
  for (double& v : p) v /= static_cast<double>(labels.size());
  return p;
}

Dataset Dataset::make(Tensor features, std::vector<int> labels, std::size_t classes,
                      std::string name, bool pixel_range) {
  if (features.rows() != labels.size())
    throw ShapeError("feature rows do not match label count");
  if (classes < 2) throw std::invalid_argument("dataset needs at least 2 classes");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw std::out_of_range("label " + std::to_string(y) + " outside [0, L)");
  if (pixel_range)
    for (double v : features.values())
      if (!(v >= -0.5 && v <= 0.5)) throw std::out_of_range("feature outside [-0.5, 0.5]");
  Dataset d;
  d.empirical_priors = mmlda::empirical_priors(labels, classes);
  d.features = std::move(features);
  d.labels = std::move(labels);
  d.classes = classes;
  d.name = std::move(name);
  d.pixel_range = pixel_range;
  return d;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> c(classes, 0);
  for (int y : labels) ++c[static_cast<std::size_t>(y)];
  return c;
}

Dataset Dataset::subset(const std::vector<std::size_t>& idx) const {
  std::vector<int> ys;
  ys.reserve(idx.size());
  for (auto i : idx) ys.push_back(labels.at(i));
  return make(features.select_rows(idx), std::move(ys), classes, name, pixel_range);
}

namespace {

std::uint32_t read_be32(const std::string& b, std::size_t off) {
  if (b.size() < off + 4) throw IdxTruncated("IDX header truncated");
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(b[off + i]);
  return v;
}

void write_be32(std::string& out, std::uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IdxError("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

IdxImages parse_idx_images(const std::string& bytes) {
  const auto magic = read_be32(bytes, 0);
  if (magic != kIdxImageMagic) throw IdxBadMagic("IDX image file has bad magic");
  const std::size_t count = read_be32(bytes, 4);
  IdxImages img;
  img.rows = read_be32(bytes, 8);
  img.cols = read_be32(bytes, 12);
  const std::size_t pixels = img.rows * img.cols;
  if (bytes.size() - 16 < count * pixels) throw IdxTruncated("IDX image data truncated");
  img.pixels = Tensor(count, pixels);
  for (std::size_t i = 0; i < count * pixels; ++i)
    img.pixels.values()[i] = static_cast<unsigned char>(bytes[16 + i]) / 255.0 - 0.5;
  return img;
}

std::vector<int> parse_idx_labels(const std::string& bytes) {
  const auto magic = read_be32(bytes, 0);
  if (magic != kIdxLabelMagic) throw IdxBadMagic("IDX label file has bad magic");
  const std::size_t count = read_be32(bytes, 4);
  if (bytes.size() - 8 < count) throw IdxTruncated("IDX label data truncated");
  std::vector<int> labels(count);
  for (std::size_t i = 0; i < count; ++i) labels[i] = static_cast<unsigned char>(bytes[8 + i]);
  return labels;
}

Dataset load_idx_bytes(const std::string& images, const std::string& labels, std::string name) {
  IdxImages img = parse_idx_images(images);
  std::vector<int> ys = parse_idx_labels(labels);
  if (ys.size() != img.pixels.rows())
    throw IdxCountMismatch("IDX image count " + std::to_string(img.pixels.rows()) +
                           " != label count " + std::to_string(ys.size()));
  int top = 1;
  for (int y : ys) top = std::max(top, y);
  return Dataset::make(std::move(img.pixels), std::move(ys), static_cast<std::size_t>(top) + 1,
                       std::move(name));
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  return load_idx_bytes(slurp(images_path), slurp(labels_path), images_path.filename().string());
}

std::string encode_idx_images(const Tensor& features, std::size_t rows, std::size_t cols) {
  if (features.cols() != rows * cols) throw ShapeError("feature width != rows * cols");
  std::string out;
  write_be32(out, kIdxImageMagic);
  write_be32(out, static_cast<std::uint32_t>(features.rows()));
  write_be32(out, static_cast<std::uint32_t>(rows));
  write_be32(out, static_cast<std::uint32_t>(cols));
  for (double v : features.values()) {
    const long b = std::lround((v + 0.5) * 255.0);
    out.push_back(static_cast<char>(std::clamp(b, 0L, 255L)));
  }
  return out;
}

std::string encode_idx_labels(const std::vector<int>& labels) {
  std::string out;
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  for (int y : labels) out.push_back(static_cast<char>(y));
  return out;
}

namespace {

int draw_label(Rng& rng, const std::vector<double>& priors) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k < priors.size(); ++k) {
    acc += priors[k];
    if (u < acc) return static_cast<int>(k);
  }
  // Rounding can leave u above the final partial sum.
  for (std::size_t k = priors.size(); k-- > 0;)
    if (priors[k] > 0.0) return static_cast<int>(k);
  return 0;
}

}  // namespace

Dataset sample_mmd(const MMDSpec& spec, std::size_t n, std::uint64_t seed) {
  const std::size_t L = spec.means.classes(), p = spec.means.dim();
  if (spec.priors.size() != L) throw std::invalid_argument("prior count does not match means");
  Rng rng(seed);
  Tensor x(n, p);
  std::vector<int> ys(n);
  for (std::size_t i = 0; i < n; ++i) {
    ys[i] = draw_label(rng, spec.priors);
    const auto& mu = spec.means.means[static_cast<std::size_t>(ys[i])];
    for (std::size_t k = 0; k < p; ++k) x(i, k) = mu[k] + rng.normal();
  }
  return Dataset::make(std::move(x), std::move(ys), L, "mmd", false);
}

SyntheticKind synthetic_kind_from_string(const std::string& s) {
  if (s == "arcs") return SyntheticKind::arcs;
  if (s == "gmm_input") return SyntheticKind::gmm_input;
  throw std::invalid_argument("unknown synthetic dataset '" + s + "'");
}

std::string to_string(SyntheticKind k) { return k == SyntheticKind::arcs ? "arcs" : "gmm_input"; }

ArcGeometry arc_geometry(std::size_t classes) {
  ArcGeometry g;
  g.span = 1.5 * std::numbers::pi;
  const double inner = 0.05, outer = 0.45;
  for (std::size_t k = 0; k < classes; ++k) {
    const double t = classes > 1 ? static_cast<double>(k) / static_cast<double>(classes - 1) : 0.0;
    g.radii.push_back(inner + (outer - inner) * t);
    g.start.push_back(2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(classes));
  }
  return g;
}

int nearest_arc(const ArcGeometry& g, double x, double y) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < g.radii.size(); ++k) {
    // Clamp the point's angle into the arc's range, then measure to that arc point.
    double theta = std::atan2(y, x) - g.start[k];
    theta = std::fmod(theta, 2.0 * std::numbers::pi);
    if (theta < 0) theta += 2.0 * std::numbers::pi;
    if (theta > g.span) {
      // Outside the segment: the nearer endpoint.
      theta = (theta - g.span < 2.0 * std::numbers::pi - theta) ? g.span : 0.0;
    }
    const double a = g.start[k] + theta;
    const double d = std::hypot(x - g.radii[k] * std::cos(a), y - g.radii[k] * std::sin(a));
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(k);
    }
  }
  return best;
}

Dataset sample_synthetic_nonlinear(SyntheticKind kind, std::size_t classes, std::size_t n,
                                   double noise, std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("need at least 2 classes");
  if (!(noise >= 0.0)) throw std::invalid_argument("noise must be >= 0");
  Rng rng(seed);
  Tensor x(n, 2);
  std::vector<int> ys(n);
  const ArcGeometry arcs = arc_geometry(classes);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = rng.below(classes);
    ys[i] = static_cast<int>(k);
    double px = 0.0, py = 0.0;
    if (kind == SyntheticKind::arcs) {
      const double a = arcs.start[k] + arcs.span * rng.uniform();
      px = arcs.radii[k] * std::cos(a) + noise * rng.normal();
      py = arcs.radii[k] * std::sin(a) + noise * rng.normal();
    } else {
      // Ring of anisotropic components; the major axis is tilted off the tangent.
      const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(classes);
      const double tilt = a + 0.25 * std::numbers::pi;
      const double major = 1.8 * noise * rng.normal();
      const double minor = 0.6 * noise * rng.normal();
      px = 0.3 * std::cos(a) + major * std::cos(tilt) - minor * std::sin(tilt);
      py = 0.3 * std::sin(a) + major * std::sin(tilt) + minor * std::cos(tilt);
    }
    x(i, 0) = std::clamp(px, -0.5, 0.5);
    x(i, 1) = std::clamp(py, -0.5, 0.5);
  }
  return Dataset::make(std::move(x), std::move(ys), classes, to_string(kind));
}

void BiasProbability::validate() const {
  if (alpha.empty()) throw std::invalid_argument("bias probability is empty");
  for (double a : alpha)
    if (!(a > 0.0 && a <= 1.0)) throw std::invalid_argument("bias probabilities must lie in (0, 1]");
}

Dataset class_biased_subsample(const Dataset& d, const BiasProbability& bp, std::uint64_t seed) {
  bp.validate();
  if (bp.alpha.size() != d.classes)
    throw std::invalid_argument("bias probability length != class count");
  Rng rng(seed);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (rng.uniform() < bp.alpha[static_cast<std::size_t>(d.labels[i])]) keep.push_back(i);
  Dataset out = d.subset(keep);
  return out;
}

BiasKind bias_kind_from_string(const std::string& s) {
  if (s == "bp1") return BiasKind::bp1;
  if (s == "bp2") return BiasKind::bp2;
  throw std::invalid_argument("unknown bias kind '" + s + "'");
}

std::string to_string(BiasKind k) { return k == BiasKind::bp1 ? "bp1" : "bp2"; }

std::vector<BiasProbability> bias_counterparts(BiasKind kind, std::uint64_t seed) {
  std::vector<BiasProbability> out;
  if (kind == BiasKind::bp1) {
    Rng rng(seed);
    for (int c = 0; c < 10; ++c) {
      BiasProbability bp;
      for (int k = 1; k <= 10; ++k) bp.alpha.push_back(0.1 * k);
      rng.shuffle(bp.alpha);
      out.push_back(std::move(bp));
    }
  } else {
    for (std::size_t c = 0; c < 10; ++c) {
      BiasProbability bp{std::vector<double>(10, 0.2)};
      bp.alpha[c] = 1.0;
      out.push_back(std::move(bp));
    }
  }
  return out;
}

std::vector<Fold> kfold_split(const Dataset& d, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("k must be >= 2");
  if (d.size() < k) throw std::invalid_argument("fewer examples than folds");
  Rng rng(seed);
  std::vector<std::vector<std::size_t>> by_class(d.classes);
  for (std::size_t i = 0; i < d.size(); ++i) by_class[static_cast<std::size_t>(d.labels[i])].push_back(i);
  std::vector<std::vector<std::size_t>> folds(k);
  // Deal each shuffled class round-robin, continuing the rotation across
  // classes so fold sizes differ by at most one.
  std::size_t next = 0;
  for (auto& members : by_class) {
    rng.shuffle(members);
    for (auto i : members) {
      folds[next].push_back(i);
      next = (next + 1) % k;
    }
  }
  std::vector<Fold> out(k);
  for (std::size_t f = 0; f < k; ++f) {
    out[f].validation = folds[f];
    std::sort(out[f].validation.begin(), out[f].validation.end());
    for (std::size_t g = 0; g < k; ++g)
      if (g != f) out[f].train.insert(out[f].train.end(), folds[g].begin(), folds[g].end());
    std::sort(out[f].train.begin(), out[f].train.end());
  }
  return out;
}

void write_dataset_csv(std::ostream& out, const Dataset& d) {
  out << "label";
  for (std::size_t k = 0; k < d.dim(); ++k) out << ",x_" << (k + 1);
  out << '\n';
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << d.labels[i];
    for (double v : d.features.row(i)) out << ',' << v;
    out << '\n';
  }
  out.precision(old);
}

}  // namespace mmlda
