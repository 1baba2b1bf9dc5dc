#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "mpnet/common.hpp"

namespace mp {

// splitmix64 finalizer. Used to derive independent sub-streams: the stream for
// (seed, tag) is the same whether users are generated serially or in parallel.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
  return mix64(seed ^ mix64(tag));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag_a,
                                    std::uint64_t tag_b) noexcept {
  return derive_seed(derive_seed(seed, tag_a), tag_b);
}

// Deterministic RNG with hand-rolled samplers so drawn values depend only on
// the 64-bit stream, not on standard-library distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(mix64(seed)) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    if (n <= 0) fail(Errc::invalid_argument, "uniform_int: n must be positive, got ", n);
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    constexpr double two_pi = 6.283185307179586476925286766559;
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = two_pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double lognormal(double log_mean, double log_sd) { return std::exp(normal(log_mean, log_sd)); }

  double exponential() { return -std::log(1.0 - uniform01()); }

  // Arrival counting in log space; no underflow for large means.
  int poisson(double mean) {
    if (mean < 0) fail(Errc::invalid_argument, "poisson: mean must be >= 0, got ", mean);
    if (mean == 0) return 0;
    int count = 0;
    double t = exponential();
    while (t < mean) {
      ++count;
      t += exponential();
    }
    return count;
  }

  // Index draw from a probability vector (need not be normalized).
  int categorical(std::span<const double> weights) {
    double total = 0;
    for (double w : weights) total += w;
    if (!(total > 0)) fail(Errc::invalid_argument, "categorical: weights sum to zero");
    double r = uniform01() * total;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      r -= weights[i];
      if (r < 0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct draws from [0, n), in draw order.
  std::vector<int> sample_without_replacement(int n, int k) {
    if (k > n) fail(Errc::invalid_argument, "sample_without_replacement: k=", k, " > n=", n);
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    std::vector<int> out;
    out.reserve(k);
    for (int i = 0; i < k; ++i) {
      const int j = i + uniform_int(n - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0;
};

}  // namespace mp
