#pragma once

// Rank estimation, whitening, and whitened tensors.

#include "specbnp/tensor.hpp"

#include <cstdint>

namespace specbnp {

enum class RankGap { Relative, Absolute };

struct RankEstimate {
  int k = 0;
  Vector eigenvalues;  // eigenvalues of (QᵀM)(QᵀM)ᵀ with Q = orth(MΘ), descending
};

/// Projects M onto K′ Gaussian directions, orthonormalizes the range Q = orth(MΘ), and
/// returns the position of the largest drop in the eigenvalues of (QᵀM)(QᵀM)ᵀ. The relative drop
/// λ_k / λ_{k+1} uses a floor of 1e-10 · λ_1 on the denominator.
RankEstimate estimate_rank_slope(const Matrix& m, int kprime, std::uint64_t seed,
                                 RankGap mode = RankGap::Relative);

/// K′ for a rank search: min(2 · guess, 50), capped below min(rows, cols).
int default_kprime(const Matrix& m, int guess = 25);

struct Whitener {
  Matrix w;       // d × K, Wᵀ S2 W = I
  Matrix w_pinv;  // K × d
  Vector singular_values;  // top-K eigenvalues of S2, descending
  int k() const { return static_cast<int>(w.cols()); }
};

/// W = U Σ^{-1/2}, W† = Σ^{1/2} Uᵀ from the top-K eigenpairs of S2. Eigenvalues at or
/// below eps_rel · λ_max do not count as positive.
Whitener whiten(const Matrix& s2, int k, double eps_rel = 1e-8);

/// T(S, W, ..., W) over K.
DenseTensor whitened_tensor(const DenseTensor& s, const Matrix& w);

}  // namespace specbnp
