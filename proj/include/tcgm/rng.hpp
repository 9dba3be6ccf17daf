// Deterministic random sampling.
//
// The <random> engines are fully specified by the standard but the
// distributions are not, so every draw here is built directly on raw
// mt19937_64 output. Datasets, sampling plans and training trajectories
// are reproducible bit-for-bit from a 64-bit seed on any platform.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace tcgm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable sub-seed derivation: FNV-1a over the component name mixed into the
// base seed. std::hash would not be portable.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view component) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : component) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(base ^ h);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view component,
                                 std::uint64_t counter) {
  return splitmix64(derive_seed(base, component) ^ splitmix64(counter));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); exact via rejection.
  std::uint64_t uniform_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
    const std::uint64_t threshold = (-n) % n;  // 2^64 mod n
    std::uint64_t r;
    do {
      r = engine_();
    } while (r < threshold);
    return r % n;
  }

  int index(std::size_t n) { return static_cast<int>(uniform_below(n)); }

  // Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = uniform_below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Inverse-CDF sampler over a fixed weight vector.
class DiscreteSampler {
 public:
  explicit DiscreteSampler(const std::vector<double>& weights) {
    if (weights.empty()) throw std::invalid_argument("DiscreteSampler: empty weights");
    cumulative_.reserve(weights.size());
    double total = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw std::invalid_argument("DiscreteSampler: negative weight");
      total += w;
      cumulative_.push_back(total);
    }
    if (!(total > 0.0)) throw std::invalid_argument("DiscreteSampler: zero total weight");
    for (double& c : cumulative_) c /= total;
    cumulative_.back() = 1.0;
  }

  int sample(Rng& rng) const {
    const double u = rng.uniform();
    std::size_t lo = 0, hi = cumulative_.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (cumulative_[mid] > u) {
        hi = mid;
      } else {
        lo = mid + 1;
      }
    }
    return static_cast<int>(lo);
  }

 private:
  std::vector<double> cumulative_;
};

}  // namespace tcgm
