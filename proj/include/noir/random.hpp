#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace noir {

/// Mersenne Twister seeded from a key tuple, e.g. (seed, step, road).
///
/// Streams for different keys are independent, so draws do not depend on the
/// order in which roads or steps are visited. Only the engine and seed_seq
/// are used from <random>; their output is fixed by the standard, unlike the
/// distribution classes.
class KeyedRng {
 public:
  KeyedRng(std::initializer_list<std::uint64_t> key) {
    std::vector<std::uint32_t> words;
    words.reserve(2 * key.size());
    for (std::uint64_t k : key) {
      words.push_back(static_cast<std::uint32_t>(k & 0xffffffffu));
      words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    engine_.seed(seq);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [lo, hi].
  int uniform_int(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }

  /// Standard exponential; Gamma(1) draws give a flat Dirichlet after normalisation.
  double exponential() { return -std::log1p(-uniform()); }

 private:
  std::mt19937_64 engine_;
};

// Stream tags so that different consumers of one seed never collide.
enum class Stream : std::uint64_t {
  grid_geometry = 1,
  flow_probability = 2,
  routing = 3,
  initial_density = 4,
};

}  // namespace noir
