#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace mmlda {

/// Counter-based generator: the n-th draw is splitmix64(seed, n), so streams
/// are reproducible on every platform and can be forked by key.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);

  /// Independent child stream keyed by `key`.
  Rng fork(std::uint64_t key) const;

  std::vector<std::size_t> permutation(std::size_t n);
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace mmlda
