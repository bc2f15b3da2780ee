#pragma once

// Diagonalizable symmetric tensors for IBP latent features: raw binary draws, the
// linear-Gaussian latent feature model x = Φz + ε, and infinite sparse factor analysis
// x = Φ(z ⊙ y) + ε.

#include "specbnp/moments.hpp"
#include "specbnp/tensor.hpp"

#include <filesystem>
#include <optional>

namespace specbnp {

/// Feature probabilities, each strictly inside (0, 1).
struct IbpParams {
  Vector pi;
  void validate() const;
};

/// S1..S4 (any may be absent) plus the noise statistics used to build them.
struct SymmetricTensorSet {
  std::optional<Vector> s1;
  Matrix s2;
  std::optional<DenseTensor> s3;
  std::optional<DenseTensor> s4;
  double sigma2 = 0.0;
  Vector m1;
  double m4 = 0.0;
};

/// Diagonal coefficients of S2, S3, S4 for Bernoulli(π) features.
double ibp_s2_coefficient(double pi);  // π - π²
double ibp_s3_coefficient(double pi);  // π - 3π² + 2π³
double ibp_s4_coefficient(double pi);  // π - 7π² + 12π³ - 6π⁴

/// S1 = π, S2 = diag(π - π²), S3 = diag(π - 3π² + 2π³), S4 = diag(π - 7π² + 12π³ - 6π⁴).
SymmetricTensorSet ibp_population_s(const IbpParams& params);

/// Inverts the moment expansion of a {0,1}^K variable:
///   S2 = M2 - S1 ⊗ S1
///   S3 = M3 - symm_3[S1 ⊗ S2] - S1^{⊗3}
///   S4 = M4 - S1^{⊗4} - symm_6[S2 ⊗ S1 ⊗ S1] - symm_3[S2 ⊗ S2] - symm_4[S3 ⊗ S1]
SymmetricTensorSet ibp_s_from_moments(const DenseTensor& m1, const DenseTensor& m2, const DenseTensor& m3,
                                      const DenseTensor& m4);

struct NoiseEstimate {
  double sigma2 = 0.0;
  /// d × (d-K) eigenvectors of the covariance for its d-K smallest eigenvalues, ascending.
  Matrix noise_basis;
  Vector eigenvalues;  // all covariance eigenvalues, ascending
};

/// σ² as the smallest eigenvalue of M2 - M1 ⊗ M1.
NoiseEstimate estimate_sigma2(const Vector& m1, const Matrix& m2, int k);

struct AuxStats {
  Vector m1;        // E[x ⟨v, x - E x⟩²]  (= σ² Φπ)
  double m4 = 0.0;  // E[⟨v, x - E x⟩⁴] / 3  (= σ⁴)
};

AuxStats aux_stats(const SampleSet& x, const Vector& v);
/// The same statistics evaluated from raw moments M1..M4.
AuxStats aux_stats_from_moments(const Vector& m1, const Matrix& m2, const DenseTensor& m3, const DenseTensor& m4,
                                const Vector& v);

/// Linear-Gaussian tensors. `noise_metric` is the matrix standing in for the identity in
/// the noise terms: the identity for raw moments, WᵀW for moments already contracted
/// with W on every mode.
///   S1 = M1
///   S2 = M2 - S1 ⊗ S1 - σ² G
///   S3 = M3 - S1^{⊗3} - symm_3[S1 ⊗ S2] - symm_3[m1 ⊗ G]
///   S4 = M4 - S1^{⊗4} - symm_6[S2 ⊗ S1 ⊗ S1] - symm_3[S2 ⊗ S2] - symm_4[S3 ⊗ S1]
///        - σ² symm_6[(S2 + S1 ⊗ S1) ⊗ G] - m4 symm_3[G ⊗ G]
SymmetricTensorSet lg_s_tensors(const DenseTensor& m1, const DenseTensor& m2, const DenseTensor& m3,
                                const DenseTensor& m4, double sigma2, const Vector& aux_m1, double aux_m4,
                                const std::optional<Matrix>& noise_metric = std::nullopt);

enum class IsfaPrior { Gaussian, Laplace };

IsfaPrior parse_isfa_prior(const std::string& name);
const char* to_string(IsfaPrior prior);
/// E[y²] of the prior (1 for N(0,1), 2 for Laplace with unit scale).
double isfa_c(IsfaPrior prior);
/// Diagonal coefficient of the isFA S4: E[y⁴]π - 3c²π².
double isfa_f(IsfaPrior prior, double pi);

/// S2 = M2 - σ² G = T(c·diag(π), Φ, Φ)
/// S4 = M4 - symm_3[S2 ⊗ S2] - σ² symm_6[S2 ⊗ G] - m4 symm_3[G ⊗ G] = T(diag(f(π)), Φ, Φ, Φ, Φ)
SymmetricTensorSet isfa_s_tensors(const DenseTensor& m2, const DenseTensor& m4, double sigma2, double aux_m4,
                                  IsfaPrior prior, const std::optional<Matrix>& noise_metric = std::nullopt);

/// Writes s1/s2/s3/s4/m1 tensor files plus manifest.json into `dir`.
void save_tensor_set(const std::filesystem::path& dir, const SymmetricTensorSet& set);
SymmetricTensorSet load_tensor_set(const std::filesystem::path& dir);

}  // namespace specbnp
