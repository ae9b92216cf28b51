#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <utility>

namespace clare {

/// Seeded pseudo-random source used everywhere a draw is needed.
///
/// Algorithm (version 1), fixed so that results are reproducible across
/// standard libraries:
///   - engine: std::mt19937_64 seeded with the 64-bit seed
///   - uniform(): (x >> 11) * 2^-53, in [0, 1)
///   - below(n): rejection sampling on the top bits, unbiased
///   - normal(): Box-Muller on (1 - uniform(), uniform()); the cosine
///     branch is returned first and the sine branch is cached
///   - gamma(a): Marsaglia-Tsang; a < 1 handled by the a+1 boost
///   - beta(a, b): X / (X + Y) with X ~ gamma(a), Y ~ gamma(b)
///   - shuffle: Fisher-Yates from the back using below()
/// std:: distributions are not used because their output is
/// implementation-defined.
class Rng {
 public:
  static constexpr int kVersion = 1;

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();
  std::uint64_t below(std::uint64_t n);
  double normal();
  double gamma(double shape);
  double beta(double a, double b);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

/// splitmix64 finalizer; derives independent child seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace clare
