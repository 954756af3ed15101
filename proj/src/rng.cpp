#include "fgwin/rng.hpp"

#include "fgwin/error.hpp"

namespace fgwin {

namespace {

constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

std::uint64_t splitmix_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  return mix_seed(state);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = mix_seed(seed + 0x9e3779b97f4a7c15ULL);
  h = mix_seed(h ^ (a + 0x632be59bd9b4e019ULL));
  h = mix_seed(h ^ (b + 0x85157af5ULL));
  h = mix_seed(h ^ (c + 0xd6e8feb86659fd93ULL));
  return h;
}

SeededRng::SeededRng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& word : state_) word = splitmix_next(sm);
}

std::uint64_t SeededRng::next_u64() {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double SeededRng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double SeededRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t SeededRng::below(std::uint64_t n) {
  if (n == 0) throw ParameterError("SeededRng::below requires n > 0");
  const std::uint64_t limit = -n % n;  // 2^64 mod n
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x >= limit) return x % n;
  }
}

Tensor rng_uniform(SeededRng& rng, Shape shape, double lo, double hi) {
  if (!(lo < hi)) {
    throw ParameterError("rng_uniform requires lo < hi, got lo=" + std::to_string(lo) +
                         " hi=" + std::to_string(hi));
  }
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace fgwin
