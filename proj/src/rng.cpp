#include "ptycho/rng.hpp"

#include <numeric>
#include <stdexcept>

namespace ptycho {

std::uint64_t poisson_sample(CounterRng& rng, double lambda) {
  if (lambda < 0.0 || !std::isfinite(lambda))
    throw std::invalid_argument("poisson_sample: mean must be finite and >= 0");
  if (lambda == 0.0) return 0;
  if (lambda < 30.0) {
    double limit = std::exp(-lambda);
    double p = 1.0;
    std::uint64_t k = 0;
    do {
      ++k;
      p *= rng.uniform_open();
    } while (p > limit);
    return k - 1;
  }
  // PTRS rejection, Hoermann (1993).
  double b = 0.931 + 2.53 * std::sqrt(lambda);
  double a = -0.059 + 0.02483 * b;
  double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  double v_r = 0.9277 - 3.6224 / (b - 2.0);
  double log_lambda = std::log(lambda);
  for (;;) {
    double u = rng.uniform() - 0.5;
    double v = rng.uniform_open();
    double us = 0.5 - std::abs(u);
    double kf = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
    if (us >= 0.07 && v <= v_r) return std::uint64_t(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
        kf * log_lambda - lambda - std::lgamma(kf + 1.0))
      return std::uint64_t(kf);
  }
}

std::vector<std::size_t> shuffled_indices(std::size_t n, CounterRng rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = std::size_t(rng.next_u64() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

} // namespace ptycho
