#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

#include "fgwin/tensor.hpp"

namespace fgwin {

/// xoshiro256** seeded by expanding the 64-bit seed through SplitMix64.
///
/// Every draw is computed with integer arithmetic plus one exact
/// power-of-two scaling, so a seed reproduces the same doubles on every
/// platform. Do not route draws through <random> distributions: their
/// algorithms are implementation-defined.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed = 0);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n) by rejection (unbiased). n must be > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  /// Fisher-Yates.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
};

/// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

/// I.i.d. uniform draws in [lo, hi). Throws ParameterError unless lo < hi.
Tensor rng_uniform(SeededRng& rng, Shape shape, double lo, double hi);

}  // namespace fgwin
