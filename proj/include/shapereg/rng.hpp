#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace shapereg {

// SplitMix64 step, used to derive engine seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic random stream: a 64-bit Mersenne Twister seeded through
// SplitMix64, with hand-rolled variate transforms so that every draw is a
// pure function of (master seed, stream index, draw index). Substreams are
// independent, which keeps parallel replications reproducible regardless of
// scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    eng_.seed(splitmix64(s));
  }

  // Stream `index` derived from `master`; distinct indices give
  // independent, order-free streams.
  static Rng substream(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    return Rng(splitmix64(s));
  }

  std::uint64_t bits() { return eng_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Inclusive integer range.
  int uniform_int(int lo, int hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(eng_() % span);
  }

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Knuth's product method, chunked so large means cannot underflow.
  int poisson(double lambda) {
    int k = 0;
    while (lambda > 500.0) {
      k += poisson_small(500.0);
      lambda -= 500.0;
    }
    return k + poisson_small(lambda);
  }

  int binomial(int n, double p) {
    int k = 0;
    for (int i = 0; i < n; ++i)
      if (uniform() < p) ++k;
    return k;
  }

 private:
  int poisson_small(double lambda) {
    const double limit = std::exp(-lambda);
    double prod = 1.0;
    int k = -1;
    do {
      prod *= uniform();
      ++k;
    } while (prod > limit);
    return k;
  }

  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace shapereg
