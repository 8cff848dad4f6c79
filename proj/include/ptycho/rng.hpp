#pragma once
#include <cmath>
#include <cstdint>
#include <vector>

namespace ptycho {

// Counter-based stream RNG (splitmix64 finalizer over key+counter). Streams
// are derived from (seed, stream ids...), so per-position / per-pixel draws
// are independent of evaluation order and of any parallel partitioning.
struct CounterRng {
  std::uint64_t key = 0;
  std::uint64_t counter = 0;

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static CounterRng from(std::uint64_t seed, std::uint64_t s1 = 0, std::uint64_t s2 = 0,
                         std::uint64_t s3 = 0) {
    CounterRng r;
    r.key = mix(seed ^ mix(s1 ^ mix(s2 ^ mix(s3))));
    return r;
  }

  std::uint64_t next_u64() { return mix(key + 0x9e3779b97f4a7c15ull * (++counter)); }

  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; } // [0,1)

  double uniform_open() { // (0,1]
    return 1.0 - uniform();
  }

  double gaussian() {
    double u1 = uniform_open();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }
};

// Poisson draw with mean lambda: Knuth product method for small means, PTRS
// transformed rejection (Hoermann) otherwise.
std::uint64_t poisson_sample(CounterRng& rng, double lambda);

// Uniform permutation of {0, ..., n-1}, reproducible from the stream.
std::vector<std::size_t> shuffled_indices(std::size_t n, CounterRng rng);

} // namespace ptycho
