#pragma once

#include "specbnp/tensor.hpp"

#include <cstdint>
#include <random>

namespace specbnp::detail {

/// Independent generator for (seed, a, b), e.g. (seed, component, restart).
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

inline Vector random_gaussian(std::mt19937_64& rng, Eigen::Index n) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

inline Vector random_unit(std::mt19937_64& rng, Eigen::Index n) {
  Vector v = random_gaussian(rng, n);
  while (!(v.norm() > 0.0)) v = random_gaussian(rng, n);
  return v / v.norm();
}

/// n × k with orthonormal columns (k ≤ n).
inline Matrix random_orthonormal(std::mt19937_64& rng, Eigen::Index n, Eigen::Index k) {
  Matrix g(n, k);
  for (Eigen::Index j = 0; j < k; ++j) g.col(j) = random_gaussian(rng, n);
  Eigen::HouseholderQR<Matrix> qr(g);
  return qr.householderQ() * Matrix::Identity(n, k);
}

}  // namespace specbnp::detail
