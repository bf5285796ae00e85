#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace pacte {

// Seeded generator whose derived draws do not depend on the standard
// library's distribution implementations, so a seed reproduces the same
// stream with any toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  double normal();
  double gamma(double shape);
  std::vector<double> dirichlet(std::span<const double> alpha);
  std::vector<double> dirichlet(std::size_t n, double alpha);

  // Index drawn proportionally to non-negative weights.
  std::size_t categorical(std::span<const double> weights);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pacte
