#include "kbo/rng.hpp"

#include <cmath>
#include <numbers>

#include <boost/random/gamma_distribution.hpp>

#include "kbo/errors.hpp"

namespace kbo {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

SplitMix64::result_type SplitMix64::operator()() noexcept {
  state_ += kGolden;
  return mix64(state_);
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = mix64(seed + kGolden);
  for (std::uint64_t k : keys) {
    h = mix64(h ^ (mix64(k + kGolden) + 0x632be59bd9b4e019ULL + (h << 6) + (h >> 2)));
  }
  return h;
}

double Rng::uniform() noexcept {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() noexcept {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double Rng::chi_squared(double dof) {
  if (!(dof > 0.0)) throw InputError("chi_squared: degrees of freedom must be positive");
  boost::random::gamma_distribution<double> gamma(dof / 2.0, 2.0);
  return gamma(engine_);
}

double Rng::student_t(double dof) {
  const double z = normal();
  const double v = chi_squared(dof);
  return z / std::sqrt(v / dof);
}

}  // namespace kbo
