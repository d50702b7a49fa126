#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace ctomics {

// splitmix64 stream. std:: engines/distributions are implementation-defined,
// so every random draw in the library goes through this to keep outputs
// reproducible bit-for-bit for a given seed.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // uniform in [0,1)
  double next_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [0,n); n > 0
  uint64_t next_below(uint64_t n) {
    // multiply-shift; bias below 2^-64 per draw is irrelevant here but kept
    // away from the modulo hotspots anyway
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<uint64_t>(m >> 64);
  }

  // standard normal, Box-Muller
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - next_real();  // (0,1]
    double u2 = next_real();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Independent child stream seeds derived from a master seed by counter, so
// parallel work items get stable streams regardless of schedule order.
inline uint64_t derive_seed(uint64_t master, uint64_t counter) {
  Rng r(master ^ (0xA0761D6478BD642Full * (counter + 1)));
  return r.next_u64();
}

}  // namespace ctomics
