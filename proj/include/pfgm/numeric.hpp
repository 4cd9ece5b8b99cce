#pragma once

#include <cmath>
#include <cstddef>

namespace pfgm::detail {

// Pairwise summation of f(i) for i in [begin, end).
template <class F>
double pairwise_sum(std::size_t begin, std::size_t end, const F& f) {
  constexpr std::size_t kBlock = 128;
  if (end - begin <= kBlock) {
    double s = 0.0;
    for (std::size_t i = begin; i < end; ++i) s += f(i);
    return s;
  }
  const std::size_t mid = begin + (end - begin) / 2;
  return pairwise_sum(begin, mid, f) + pairwise_sum(mid, end, f);
}

// r^(-2p) given r2 = r^2 and twice_p = 2p, for a positive integer twice_p.
inline double inv_pow_half(double r2, int twice_p) {
  const int k = twice_p / 2;
  double s = 1.0;
  for (int i = 0; i < k; ++i) s *= r2;
  if (twice_p % 2) s *= std::sqrt(r2);
  return 1.0 / s;
}

// ratio^(twice_p / 2) for ratio in (0, 1].
inline double pow_half(double ratio, int twice_p) {
  const int k = twice_p / 2;
  double s = 1.0;
  for (int i = 0; i < k; ++i) s *= ratio;
  if (twice_p % 2) s *= std::sqrt(ratio);
  return s;
}

}  // namespace pfgm::detail
