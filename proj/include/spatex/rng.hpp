#pragma once

#include <cstdint>
#include <random>

namespace spatex {

// Seeded, splittable random generator.  Every stochastic operation in the
// library takes an Rng by reference; independent streams for parallel work
// are obtained with split(), which derives a child seed by hashing
// (seed, stream index) so results do not depend on thread scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

  std::mt19937_64& engine() { return engine_; }

  Rng split(std::uint64_t stream) const {
    return Rng(mix(seed_ ^ mix(stream + 0x9e3779b97f4a7c15ULL)));
  }

  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() {
    return std::normal_distribution<double>(0.0, 1.0)(engine_);
  }
  double exponential() {
    return std::exponential_distribution<double>(1.0)(engine_);
  }
  double gamma(double shape, double scale) {
    return std::gamma_distribution<double>(shape, scale)(engine_);
  }
  double chi_squared(double dof) {
    return std::chi_squared_distribution<double>(dof)(engine_);
  }
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }

 private:
  // SplitMix64 finalizer.
  static std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace spatex
