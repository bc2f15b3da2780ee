#include "specbnp/spectral_common.hpp"

#include "specbnp/error.hpp"

#include <algorithm>
#include <random>

namespace specbnp {

RankEstimate estimate_rank_slope(const Matrix& m, int kprime, std::uint64_t seed, RankGap mode) {
  const Eigen::Index min_dim = std::min(m.rows(), m.cols());
  if (kprime < 2) throw InputError("rank estimation needs K' >= 2");
  if (kprime >= min_dim)
    throw InputError("K' = " + std::to_string(kprime) + " must be below min(dims) = " + std::to_string(min_dim));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix theta(m.cols(), kprime);
  for (Eigen::Index j = 0; j < theta.cols(); ++j)
    for (Eigen::Index i = 0; i < theta.rows(); ++i) theta(i, j) = normal(rng);

  // range finder: Q spans M Θ, and QᵀM carries the top singular values of M
  Eigen::HouseholderQR<Matrix> qr(m * theta);
  const Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), kprime);
  const Matrix b = q.transpose() * m;
  const Matrix gram = b * b.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram, Eigen::EigenvaluesOnly);
  RankEstimate out;
  out.eigenvalues = eig.eigenvalues().reverse();
  const Vector& lam = out.eigenvalues;
  if (!(lam(0) > 0.0)) return out;  // k = 0

  const double floor = 1e-10 * lam(0);
  double best = -1.0;
  for (Eigen::Index i = 0; i + 1 < lam.size(); ++i) {
    const double hi = std::max(lam(i), floor);
    const double lo = std::max(lam(i + 1), floor);
    const double gap = mode == RankGap::Relative ? hi / lo : hi - lo;
    if (gap > best) {
      best = gap;
      out.k = static_cast<int>(i + 1);
    }
  }
  return out;
}

int default_kprime(const Matrix& m, int guess) {
  const auto min_dim = static_cast<int>(std::min(m.rows(), m.cols()));
  return std::max(2, std::min({2 * guess, 50, min_dim - 1}));
}

Whitener whiten(const Matrix& s2, int k, double eps_rel) {
  if (s2.rows() != s2.cols()) throw DimensionError("whiten: S2 must be square", 1);
  if (k < 1 || k > s2.rows())
    throw InputError("whiten: K = " + std::to_string(k) + " outside 1.." + std::to_string(s2.rows()));
  const Matrix sym = 0.5 * (s2 + s2.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const Vector lam = eig.eigenvalues().reverse();
  const Matrix u = eig.eigenvectors().rowwise().reverse();
  const double eps = eps_rel * std::max(lam(0), 0.0);
  int positive = 0;
  while (positive < lam.size() && lam(positive) > eps && lam(positive) > 0.0) ++positive;
  if (positive < k)
    throw NumericalError("whiten: S2 has " + std::to_string(positive) + " positive eigenvalues, need K = " +
                         std::to_string(k));

  Whitener out;
  out.singular_values = lam.head(k);
  const Matrix uk = u.leftCols(k);
  out.w = uk * out.singular_values.cwiseSqrt().cwiseInverse().asDiagonal();
  out.w_pinv = out.singular_values.cwiseSqrt().asDiagonal() * uk.transpose();
  return out;
}

DenseTensor whitened_tensor(const DenseTensor& s, const Matrix& w) {
  if (!s.is_cubic()) throw InputError("whitened_tensor: tensor must be cubic");
  if (static_cast<std::size_t>(w.rows()) != s.dim(0)) throw DimensionError("whitener rows vs tensor side", 0);
  return contract_all(s, w.transpose());
}

}  // namespace specbnp
