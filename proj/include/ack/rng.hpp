#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace ack {

// All randomness in the library comes from std::mt19937_64, whose output
// sequence is fixed by the C++ standard. Distributions are implemented here
// rather than with <random> distributions, whose algorithms are
// implementation-defined, so seeds reproduce across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, bound); bound >= 1. Modulo reduction.
  std::uint64_t below(std::uint64_t bound) { return engine_() % bound; }

  // Fisher-Yates, walking from the back.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ack
