#pragma once

// Seed-stable random streams.
//
// Every stochastic routine in the library derives an independent substream
// from (master seed, stream labels) with SplitMix64 and draws from a
// std::mt19937_64 seeded with the result. mt19937_64 output is fixed by the
// C++ standard; the uniform and normal transforms below are ours, so draws
// are identical across standard libraries. Changing any of this changes
// frozen fixture values.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace erm_lab {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Folds stream labels into a master seed. Order of labels matters.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> labels) {
  std::uint64_t h = splitmix64(master);
  for (auto label : labels) h = splitmix64(h ^ splitmix64(label + 0x632be59bd9b4e019ULL));
  return h;
}

// Labels that keep the substreams of different estimators apart.
enum class StreamTag : std::uint64_t {
  kGaussianProcess = 1,
  kSample = 2,
  kOscillation = 3,
  kSymmetrization = 4,
  kCalibration = 5,
  kGenerator = 6,
};

inline std::uint64_t derive_seed(std::uint64_t master, StreamTag tag,
                                 std::initializer_list<std::uint64_t> labels = {}) {
  std::uint64_t h = derive_seed(master, {static_cast<std::uint64_t>(tag)});
  for (auto label : labels) h = splitmix64(h ^ splitmix64(label + 0x632be59bd9b4e019ULL));
  return h;
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via the Marsaglia polar method; the second variate of
  /// each accepted pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * factor;
    has_spare_ = true;
    return u * factor;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace erm_lab
