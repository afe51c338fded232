#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace cogsig {

// splitmix64 finalizer; used to derive independent stream seeds from a master
// seed and a counter so results never depend on scheduling.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter);
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

// Portable draws on top of mt19937_64. The standard distributions are
// implementation-defined, so the transforms are spelled out here to keep
// generated data bit-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }
  // [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Unbiased integer in [0, n).
  std::size_t index(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cogsig
