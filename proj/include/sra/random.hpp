#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace sra {

// SplitMix64 finalizer, used to derive independent seeds from a root seed.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Seed for a named stream ("init", "shuffle", "dropout", ...) under a root seed.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) noexcept;

/// Portable deterministic generator (xoshiro256**). Unlike the std
/// distributions, every draw here is bit-identical across standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next_u64() noexcept;
  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  // Uniform integer in [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound) noexcept;
  std::int64_t between(std::int64_t lo, std::int64_t hi_inclusive) noexcept;
  bool bernoulli(double p) noexcept { return uniform() < p; }

  template <class T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }
  template <class T>
  void shuffle(std::vector<T>& items) noexcept {
    shuffle(std::span<T>(items));
  }

private:
  std::uint64_t s_[4];
};

}  // namespace sra
