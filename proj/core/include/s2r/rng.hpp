#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace s2r {

// Deterministic PRNG with hand-rolled distributions. std::mt19937 engines are
// portable but the standard distributions are not; everything here produces
// the same stream on every platform and compiler.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // splitmix burn-in so nearby seeds diverge immediately
    next_u64();
    next_u64();
  }

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

  // standard normal via Box-Muller (one value per call, cached pair)
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// FNV-1a over a string; used for stable stage-name seed splitting.
inline uint64_t hash_str(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Derived seed = hash(master_seed || stage || index). Documented splitting
// rule: every pipeline stage and item draws from its own stream so parallel
// execution order cannot change results.
inline uint64_t derive_seed(uint64_t master, std::string_view stage,
                            uint64_t index = 0) {
  uint64_t h = hash_str(stage);
  h ^= master + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h ^= (index + 1) * 0xd1342543de82ef95ULL;
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  return h;
}

}  // namespace s2r
