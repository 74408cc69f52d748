#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>

namespace kbo {

// SplitMix64 (Steele, Lea & Flood 2014). The state is a Weyl counter, so the
// k-th output is a pure function of (seed, k).
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

 private:
  std::uint64_t state_;
};

// SplitMix64 finalizer; a bijective 64-bit mixer.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Key derivation: folds a list of integers into a child seed. Distinct key
// lists give statistically independent streams.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept;

// Draw helpers with a fixed consumption order so every sequence is
// reproducible bit-for-bit on any IEEE-754 platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : engine_(seed) {}
  Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept
      : engine_(derive_seed(seed, keys)) {}

  // 53-bit uniform on [0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Box-Muller, cosine branch only: exactly two uniforms per draw.
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  double chi_squared(double dof);
  // Z / sqrt(V / dof) with Z drawn before V.
  double student_t(double dof);

  SplitMix64& engine() noexcept { return engine_; }

 private:
  SplitMix64 engine_;
};

}  // namespace kbo
