#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace cqr {

// splitmix64 finalizer; used to derive independent seeds from a master seed.
std::uint64_t mix64(std::uint64_t z);

// Counter-based derivation: the result depends only on the master seed and the
// key sequence, never on call order.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys);

// mt19937_64 with portable variate generation (the std:: distributions are
// implementation-defined, these are not).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform on {0, ..., bound - 1}; bound > 0.
  std::uint64_t below(std::uint64_t bound);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cqr
