#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace focus {

// Mixes a base seed with a stream id (splitmix64 finalizer). Used to derive
// independent per-stage, per-fold and per-trace seeds from one master seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Seeded generator whose distributions are computed here rather than by the
// standard library, so sequences are identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // standard normal, Box-Muller
  std::size_t below(std::size_t n);       // [0, n)

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace focus
