#include "droidsynth/rng.hpp"

#include <algorithm>
#include <numeric>

namespace droidsynth {

std::vector<std::size_t> sample_without_replacement(std::size_t total, std::size_t n,
                                                    std::uint64_t seed) {
  std::vector<std::size_t> pool(total);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng rng(seed);
  n = std::min(n, total);
  // Forward partial Fisher-Yates: step i only depends on steps < i.
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng.below(total - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(n);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace droidsynth
