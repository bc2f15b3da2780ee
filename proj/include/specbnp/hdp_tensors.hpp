#pragma once

// Coefficients and symmetric tensors of a multi-layer HDP topic model.
//
// For a node at level l with topic weights π_l:
//   S1 = M1
//   S2 = M2 - C2 S1 ⊗ S1                                = T(C3 diag(π_l), Φ, Φ)
//   S3 = M3 - C4 S1^{⊗3} - C5 symm_3[S2 ⊗ M1]           = T(C6 diag(π_l), Φ, Φ, Φ)

#include "specbnp/moments.hpp"
#include "specbnp/tensor.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace specbnp {

struct HdpLevelCoefficients {
  double c2 = 1.0;
  double c3 = 0.0;
  double c4 = 1.0;
  double c5 = 0.0;
  double c6 = 0.0;
};

struct HdpCoefficients {
  /// levels[l] holds the coefficients for nodes at level l; the bottom level keeps the
  /// initialization (1, 0, 1, 0, 0).
  std::vector<HdpLevelCoefficients> levels;
  const HdpLevelCoefficients& at(int level) const;
};

/// Runs the recursion from the bottom level L-1 up to the root. Level l is built from
/// level l+1 with γ = gammas[l+1], the concentration of its children; gammas[0] is unused.
HdpCoefficients hdp_coefficients(std::span<const double> gammas, int depth);

/// Closed forms for the root of a 3-layer tree (symmetric in γ1, γ2).
HdpLevelCoefficients hdp_coefficients_3layer(double gamma1, double gamma2);

struct HdpTensorSet {
  Vector s1;
  Matrix s2;
  std::optional<DenseTensor> s3;
  int node_id = 0;
  int level = 0;
};

/// Tensors at `id` from its averaged moments. `with_s3 = false` skips the vocab³ moment.
HdpTensorSet node_tensors(const HdpTree& tree, int id, const HdpCoefficients& coeffs,
                          const AveragingPolicy& policy = {}, bool with_s3 = true);

/// The same construction from given moments (any dimension).
HdpTensorSet hdp_tensors_from_moments(const Vector& m1, const Matrix& m2, const std::optional<DenseTensor>& m3,
                                      const HdpLevelCoefficients& c);

/// T(S3, W, W, W) assembled from the whitened third moment T(M3, W, W, W), the raw M1 and
/// S2, without forming any vocab³ object.
DenseTensor whitened_hdp_s3(const DenseTensor& whitened_m3, const Vector& m1, const Matrix& s2, const Matrix& w,
                            const HdpLevelCoefficients& c);

void save_hdp_tensor_set(const std::filesystem::path& dir, const HdpTensorSet& set);

}  // namespace specbnp
