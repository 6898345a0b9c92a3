#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace millreduce {

// Deterministic random source. Variates are derived from raw mt19937_64
// output instead of the std <random> distributions, whose sequences are
// implementation-defined; we need bit-identical runs for a given seed on
// any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  // [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // (0, 1), symmetric open interval; safe as a log() argument.
  double uniform01_open() {
    return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Inversion sampling; strictly positive.
  double exponential(double mean) { return -mean * std::log(uniform01_open()); }

  // Fisher-Yates on [0, n); used for dataset splits.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(engine_() % i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace millreduce
