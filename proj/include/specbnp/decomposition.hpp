#pragma once

// Orthogonal CP decomposition of whitened symmetric tensors of order 3 or 4.

#include "specbnp/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace specbnp {

enum class Solver { Rtpm, Als, Fc };

Solver parse_solver(const std::string& name);
const char* to_string(Solver solver);

struct DecompositionConfig {
  Solver backend = Solver::Rtpm;
  int restarts = 50;      // L
  int iters_init = 10;    // T
  int iters_final = 30;
  double tol = 1e-8;
  int sketch_len = 10;    // b
  int sketch_repeats = 6; // B
  int als_max_iters = 500;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

enum class Branch { Order3, Order4 };

struct EigenPair {
  double value = 0.0;
  Vector vector;  // unit norm, largest-magnitude coordinate positive
  Branch branch = Branch::Order3;
  bool converged = true;
};

/// Robust tensor power method: for each of k components, L random starts with T power
/// steps each, keep the start with the largest |T(S, θ, ..., θ)|, refine, then deflate
/// S ← S - λ v^{⊗r}.
std::vector<EigenPair> rtpm(const DenseTensor& s, int k, const DecompositionConfig& config);

struct AlsResult {
  Matrix v;       // K × k, unit columns
  Vector lambda;  // k
  double residual = 0.0;  // ‖S - Σ λ v^{⊗r}‖ / ‖S‖
  int sweeps = 0;
  bool converged = false;
};

/// Alternating least squares on the mode unfoldings, one factor matrix per mode, from a
/// random orthonormal start. A numerically singular Gram product triggers a restart, and
/// so does a fit with relative residual above √tol; the best of up to L starts is kept.
AlsResult als(const DenseTensor& s, int k, const DecompositionConfig& config);

/// Hashes and signs of one count sketch, one per mode.
struct SketchHashes {
  std::vector<std::vector<std::size_t>> h;  // h[mode][i] in [0, b)
  std::vector<std::vector<double>> s;       // s[mode][i] in {-1, +1}
};

/// Power iterations evaluated from B count sketches through FFTs; contractions are the
/// coordinate-wise median over the B sketches and deflation acts on the sketches.
std::vector<EigenPair> fc_decompose(const DenseTensor& s, int k, const DecompositionConfig& config);
/// The same with caller-supplied hashes (one entry per sketch), e.g. collision-free ones.
std::vector<EigenPair> fc_decompose(const DenseTensor& s, int k, const DecompositionConfig& config,
                                    const std::vector<SketchHashes>& hashes);

/// Dispatches on config.backend. ALS output is converted to pairs sorted by |λ|.
std::vector<EigenPair> decompose(const DenseTensor& s, int k, const DecompositionConfig& config);

/// T(S, 1, u, ..., u) for cubic S of order 3 or 4, as a matrix-vector product.
Vector power_step(const DenseTensor& s, const Vector& u);
/// Flips v so its largest-magnitude coordinate is positive; λ flips along for odd order.
void canonicalize_sign(EigenPair& pair, int order);

}  // namespace specbnp
