#ifndef EXO_RANDOM_HPP_
#define EXO_RANDOM_HPP_

#include <cmath>
#include <cstdint>
#include <random>

#include "exo/common.hpp"

namespace exo {

/// Seeded RNG with explicit Gaussian/uniform draws. std::mt19937_64 has a
/// standardized sequence; the transforms below avoid the
/// implementation-defined std::*_distribution algorithms so that identical
/// seeds give identical streams wherever the artifact is built.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() {
    return (engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (pair cached).
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    has_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

  double gaussian(double mean, double sd) { return mean + sd * gaussian(); }

  std::uint64_t integer() { return engine_(); }

  /// Derive an independent child stream (e.g., one per channel).
  Rng fork(std::uint64_t salt) {
    return Rng(engine_() ^ (salt * 0x9e3779b97f4a7c15ULL));
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace exo

#endif  // EXO_RANDOM_HPP_
