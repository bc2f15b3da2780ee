#include "specbnp/decomposition.hpp"

#include "specbnp/error.hpp"
#include "specbnp/parallel.hpp"
#include "random_streams.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace specbnp {
namespace {

void require_decomposable(const DenseTensor& s, int k, const char* who) {
  if ((s.order() != 3 && s.order() != 4) || !s.is_cubic())
    throw InputError(std::string(who) + ": expected a cubic tensor of order 3 or 4");
  if (k < 1 || static_cast<std::size_t>(k) > s.dim(0))
    throw InputError(std::string(who) + ": cannot extract " + std::to_string(k) + " components from side " +
                     std::to_string(s.dim(0)));
}

struct Candidate {
  Vector theta;
  double rayleigh = 0.0;
};

}  // namespace

Solver parse_solver(const std::string& name) {
  if (name == "rtpm") return Solver::Rtpm;
  if (name == "als") return Solver::Als;
  if (name == "fc") return Solver::Fc;
  throw InputError("unknown solver \"" + name + "\" (expected rtpm, als or fc)");
}

const char* to_string(Solver solver) {
  switch (solver) {
    case Solver::Rtpm: return "rtpm";
    case Solver::Als: return "als";
    case Solver::Fc: return "fc";
  }
  return "?";
}

void DecompositionConfig::validate() const {
  if (restarts < 1 || iters_init < 1 || iters_final < 1 || als_max_iters < 1)
    throw InputError("restart and iteration counts must be positive");
  if (!(tol > 0.0)) throw InputError("tolerance must be positive");
  if (sketch_repeats < 1) throw InputError("sketch repeats must be positive");
  if (backend == Solver::Fc && sketch_len < 2) throw InputError("sketch length must be at least 2");
  if (threads < 1) throw InputError("thread count must be positive");
}

Vector power_step(const DenseTensor& s, const Vector& u) {
  const auto k = static_cast<Eigen::Index>(s.dim(0));
  if (u.size() != k) throw DimensionError("power_step: vector length", 1);
  if (s.order() == 3) {
    Eigen::Map<const RowMajorMatrix> unfolded(s.data().data(), k, k * k);
    Vector uu(k * k);
    for (Eigen::Index j = 0; j < k; ++j) uu.segment(j * k, k) = u(j) * u;
    return unfolded * uu;
  }
  if (s.order() == 4) {
    Eigen::Map<const RowMajorMatrix> unfolded(s.data().data(), k, k * k * k);
    Vector uuu(k * k * k);
    for (Eigen::Index j = 0; j < k; ++j)
      for (Eigen::Index l = 0; l < k; ++l) uuu.segment((j * k + l) * k, k) = (u(j) * u(l)) * u;
    return unfolded * uuu;
  }
  throw InputError("power_step: order must be 3 or 4");
}

void canonicalize_sign(EigenPair& pair, int order) {
  Eigen::Index at = 0;
  pair.vector.cwiseAbs().maxCoeff(&at);
  if (pair.vector(at) < 0) {
    pair.vector = -pair.vector;
    if (order % 2 == 1) pair.value = -pair.value;
  }
}

std::vector<EigenPair> rtpm(const DenseTensor& s, int k, const DecompositionConfig& config) {
  config.validate();
  require_decomposable(s, k, "rtpm");
  const int order = s.order();
  const auto dim = static_cast<Eigen::Index>(s.dim(0));
  DenseTensor work = s;
  std::vector<EigenPair> out;
  out.reserve(static_cast<std::size_t>(k));

  for (int c = 0; c < k; ++c) {
    std::vector<Candidate> cands(static_cast<std::size_t>(config.restarts));
    parallel_for(cands.size(), config.threads, [&](std::size_t r) {
      auto rng = detail::stream(config.seed, static_cast<std::uint64_t>(c), r);
      Vector theta = detail::random_unit(rng, dim);
      for (int t = 0; t < config.iters_init; ++t) {
        Vector next = power_step(work, theta);
        const double n = next.norm();
        if (!(n > 0.0)) break;
        theta = next / n;
      }
      cands[r] = {theta, theta.dot(power_step(work, theta))};
    });
    std::size_t best = 0;
    for (std::size_t r = 1; r < cands.size(); ++r)
      if (std::abs(cands[r].rayleigh) > std::abs(cands[best].rayleigh)) best = r;

    EigenPair pair;
    pair.branch = order == 3 ? Branch::Order3 : Branch::Order4;
    pair.converged = false;
    Vector theta = cands[best].theta;
    for (int t = 0; t < config.iters_final; ++t) {
      Vector next = power_step(work, theta);
      const double n = next.norm();
      if (!(n > 0.0)) break;
      next /= n;
      const double diff = std::min((next - theta).norm(), (next + theta).norm());
      theta = next;
      if (diff < config.tol) {
        pair.converged = true;
        break;
      }
    }
    pair.value = theta.dot(power_step(work, theta));
    pair.vector = theta;
    work.axpy(-pair.value, DenseTensor::outer_power(theta, order));
    canonicalize_sign(pair, order);
    out.push_back(std::move(pair));
  }
  return out;
}

AlsResult als(const DenseTensor& s, int k, const DecompositionConfig& config) {
  config.validate();
  require_decomposable(s, k, "als");
  const int order = s.order();
  const auto dim = static_cast<Eigen::Index>(s.dim(0));
  std::vector<Matrix> unfold;
  for (int m = 0; m < order; ++m) unfold.push_back(mode_unfold(s, m));
  const double norm = s.frobenius_norm();

  auto residual_of = [&](const Matrix& v, const Vector& lambda) {
    DenseTensor r = s;
    for (Eigen::Index i = 0; i < v.cols(); ++i) r.axpy(-lambda(i), DenseTensor::outer_power(v.col(i), order));
    return norm > 0 ? r.frobenius_norm() / norm : r.frobenius_norm();
  };

  AlsResult result;
  bool found = false;
  for (int attempt = 0; attempt < config.restarts; ++attempt) {
    auto rng = detail::stream(config.seed, 0xa15, static_cast<std::uint64_t>(attempt));
    const Matrix q = detail::random_orthonormal(rng, dim, k);
    std::vector<Matrix> f(static_cast<std::size_t>(order), q);
    Vector lambda = Vector::Ones(k);
    double prev = std::numeric_limits<double>::infinity();
    bool singular = false;
    bool converged = false;
    int sweep = 0;
    for (; sweep < config.als_max_iters && !singular; ++sweep) {
      for (int n = 0; n < order; ++n) {
        Matrix kr;
        Matrix gram = Matrix::Ones(k, k);
        for (int m = 0; m < order; ++m) {
          if (m == n) continue;
          const Matrix& fm = f[static_cast<std::size_t>(m)];
          kr = kr.size() == 0 ? fm : khatri_rao(fm, kr);
          gram = gram.cwiseProduct(fm.transpose() * fm);
        }
        Eigen::JacobiSVD<Matrix> svd(gram);
        const Vector sv = svd.singularValues();
        if (!(sv(sv.size() - 1) > 1e-12 * sv(0))) {
          singular = true;
          break;
        }
        Matrix a = unfold[static_cast<std::size_t>(n)] * kr * gram.inverse();
        const Vector norms = a.colwise().norm();
        if (!(norms.minCoeff() > 0.0)) {
          singular = true;
          break;
        }
        lambda = norms;
        f[static_cast<std::size_t>(n)] = a * norms.cwiseInverse().asDiagonal();
      }
      if (singular) break;
      // S ≈ Σ λ_i ⊗_m f_m(:, i): residual from the identity ‖S - X‖² = ‖S‖² - 2⟨S, X⟩ + ‖X‖².
      Matrix kr;
      Matrix gram = Matrix::Ones(k, k);
      for (int m = 1; m < order; ++m) {
        const Matrix& fm = f[static_cast<std::size_t>(m)];
        kr = kr.size() == 0 ? fm : khatri_rao(fm, kr);
      }
      for (int m = 0; m < order; ++m) gram = gram.cwiseProduct(f[static_cast<std::size_t>(m)].transpose() * f[static_cast<std::size_t>(m)]);
      const double inner = (f[0].transpose() * unfold[0] * kr).diagonal().dot(lambda);
      const double xx = lambda.dot(gram * lambda);
      const double res = std::sqrt(std::max(0.0, norm * norm - 2 * inner + xx)) / (norm > 0 ? norm : 1.0);
      if (std::abs(prev - res) < config.tol || res < config.tol) {
        converged = true;
        ++sweep;
        break;
      }
      prev = res;
    }
    if (singular) continue;

    AlsResult candidate;
    candidate.v = f[0];
    candidate.lambda.resize(k);
    for (int i = 0; i < k; ++i) {
      EigenPair p{0.0, f[0].col(i), Branch::Order3, true};
      p.value = p.vector.dot(power_step(s, p.vector));
      canonicalize_sign(p, order);
      candidate.v.col(i) = p.vector;
      candidate.lambda(i) = p.value;
    }
    candidate.residual = residual_of(candidate.v, candidate.lambda);
    candidate.sweeps = sweep;
    candidate.converged = converged;
    if (!found || candidate.residual < result.residual) result = std::move(candidate);
    found = true;
    // ALS can settle on a non-symmetric stationary point; only an exact fit ends the restarts early.
    if (result.residual < std::sqrt(config.tol)) break;
  }
  if (found) return result;
  // Every restart hit a singular Gram product.
  result.v = Matrix::Zero(dim, k);
  result.lambda = Vector::Zero(k);
  result.residual = 1.0;
  result.converged = false;
  return result;
}

std::vector<EigenPair> decompose(const DenseTensor& s, int k, const DecompositionConfig& config) {
  switch (config.backend) {
    case Solver::Rtpm: return rtpm(s, k, config);
    case Solver::Fc: return fc_decompose(s, k, config);
    case Solver::Als: {
      const AlsResult r = als(s, k, config);
      std::vector<EigenPair> out;
      for (int i = 0; i < k; ++i)
        out.push_back({r.lambda(i), r.v.col(i), s.order() == 3 ? Branch::Order3 : Branch::Order4, r.converged});
      std::stable_sort(out.begin(), out.end(),
                       [](const EigenPair& a, const EigenPair& b) { return std::abs(a.value) > std::abs(b.value); });
      return out;
    }
  }
  throw InputError("unknown solver");
}

}  // namespace specbnp
