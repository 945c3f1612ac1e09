#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sef {

/// SplitMix64 finalizer. Used both as the counter hash of Rng and to derive
/// independent child seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Deterministically derives a child seed for (master, index).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept;

/// Counter-based generator: the i-th draw is mix64(key + i * golden_gamma),
/// where key is a hash of (seed, stream). Output is identical on every
/// platform and standard library, unlike std::normal_distribution.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  std::uint64_t next_u64() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() noexcept;
  double normal(double mean, double sd) noexcept;

  /// Unbiased integer on [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;

  template <typename T>
  void shuffle(std::span<T> values) noexcept {
    for (std::size_t i = values.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  std::uint64_t draws() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

/// 0..n-1 shuffled by Rng(seed, stream).
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed,
                                          std::uint64_t stream = 0);

}  // namespace sef
