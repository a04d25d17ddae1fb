#pragma once

#include <cmath>
#include <cstdint>

namespace fairpse {

// Counter-based generator: draw k of stream (seed, stream) is the splitmix64
// finalizer applied to key + k*gamma. Identical sequences on every platform,
// and distinct (seed, stream) pairs give effectively independent streams, so
// replications can run concurrently without sharing state.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(mix(seed + kGamma) ^ mix(stream * 0xBF58476D1CE4E5B9ULL + kGamma))) {}

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * kGamma); }

  // uniform on (0,1]
  double uniform() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // P(true) = p exactly for p in [0,1] since uniform() never returns 0
  double bernoulli(double p) { return uniform() <= p ? 1.0 : 0.0; }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  // Fisher-Yates shuffle of [0, n)
  template <typename IndexVec>
  void shuffle(IndexVec& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(next_u64() % i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

inline double expit(double t) { return 1.0 / (1.0 + std::exp(-t)); }

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace fairpse
