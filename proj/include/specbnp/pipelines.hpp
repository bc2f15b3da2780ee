#pragma once

// End-to-end spectral fits: the linear-Gaussian IBP model, infinite sparse factor
// analysis, and the multi-layer HDP topic model; held-out likelihood of a topic fit.

#include "specbnp/decomposition.hpp"
#include "specbnp/hdp_tensors.hpp"
#include "specbnp/ibp_tensors.hpp"
#include "specbnp/moments.hpp"
#include "specbnp/spectral_common.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace specbnp {

/// Raw moments M1..M4 of a vector variable.
struct RawMoments {
  Vector m1;
  Matrix m2;
  DenseTensor m3;
  DenseTensor m4;
};

void save_raw_moments(const std::filesystem::path& dir, const RawMoments& m);
RawMoments load_raw_moments(const std::filesystem::path& dir);

/// What the IBP pipelines read from the data: the mean, the raw second moment, the raw
/// third and fourth moments contracted with W on every mode, and the auxiliary noise
/// statistics along a direction v.
class MomentSource {
 public:
  virtual ~MomentSource() = default;
  virtual Eigen::Index dim() const = 0;
  virtual Vector mean() const = 0;
  virtual Matrix second() const = 0;
  virtual DenseTensor whitened(const Matrix& w, int r) const = 0;
  virtual AuxStats aux(const Vector& v) const = 0;
};

class SampleMoments final : public MomentSource {
 public:
  explicit SampleMoments(const SampleSet& x, int threads = 1) : x_(x), threads_(threads) {}
  Eigen::Index dim() const override { return x_.d(); }
  Vector mean() const override;
  Matrix second() const override;
  DenseTensor whitened(const Matrix& w, int r) const override;
  AuxStats aux(const Vector& v) const override;

 private:
  const SampleSet& x_;
  int threads_;
};

class ExactMoments final : public MomentSource {
 public:
  explicit ExactMoments(RawMoments m);
  Eigen::Index dim() const override { return m_.m1.size(); }
  Vector mean() const override { return m_.m1; }
  Matrix second() const override { return m_.m2; }
  DenseTensor whitened(const Matrix& w, int r) const override;
  AuxStats aux(const Vector& v) const override;

 private:
  RawMoments m_;
};

/// y = Qᵀx for a fixed d × p matrix Q with orthonormal columns.
class ProjectedMoments final : public MomentSource {
 public:
  ProjectedMoments(const MomentSource& inner, Matrix q);
  Eigen::Index dim() const override { return q_.cols(); }
  Vector mean() const override;
  Matrix second() const override;
  DenseTensor whitened(const Matrix& w, int r) const override;
  AuxStats aux(const Vector& v) const override;
  const Matrix& basis() const { return q_; }

 private:
  const MomentSource& inner_;
  Matrix q_;
};

struct PipelineConfig {
  DecompositionConfig decomposition;
  std::optional<int> k;  // estimated from the data when absent
  int kprime_guess = 25;
  RankGap rank_gap = RankGap::Relative;
  /// Fit in a random p-dimensional subspace of the covariance range (IBP pipelines).
  std::optional<int> projection_dim;
  double whiten_eps = 1e-8;
  /// HDP: drop documents too short for third-order moments instead of failing.
  bool skip_short_documents = true;
};

struct IbpFit {
  Matrix phi;  // d × K
  Vector pi;
  double sigma2 = 0.0;
  int k = 0;
  int k1 = 0;  // components taken from the third-order tensor
  std::vector<Branch> branches;
  std::vector<bool> converged;
  Vector eigenvalues;
  std::vector<std::string> flags;
  std::vector<std::pair<std::string, double>> timings_ms;
};

/// f3(π) = (1 - 2π)/√(π - π²), the whitened third-order eigenvalue.
double f3(double pi);
/// f4(π) = (6π² - 6π + 1)/(π - π²), the whitened fourth-order eigenvalue.
double f4(double pi);
/// The unique π with f3(π) = λ.
double invert_f3(double lambda);
/// The root π ≤ 1/2 of f4(π) = λ for λ in [-2, -1); NumericalError outside.
double invert_f4(double lambda);

IbpFit fit_ibp_linear_gaussian(const MomentSource& source, const PipelineConfig& config);
IbpFit fit_ibp_linear_gaussian(const SampleSet& x, const PipelineConfig& config);

IbpFit fit_isfa(const MomentSource& source, IsfaPrior prior, const PipelineConfig& config);
IbpFit fit_isfa(const SampleSet& x, IsfaPrior prior, const PipelineConfig& config);

struct HdpFit {
  Matrix phi;  // vocab × k, columns on the simplex
  Matrix phi_raw;  // before clamping and renormalization
  Vector pi0;      // root topic weights implied by the eigenvalues
  int k = 0;
  Vector eigenvalues;
  HdpLevelCoefficients coefficients;
  std::vector<bool> converged;
  std::vector<std::pair<std::string, double>> timings_ms;
};

HdpFit fit_hdp(const HdpTree& tree, const PipelineConfig& config);
/// The same from root moments M1..M3 and root-level coefficients.
HdpFit fit_hdp(const Vector& m1, const Matrix& m2, const DenseTensor& m3, const HdpLevelCoefficients& root, int k,
               const PipelineConfig& config);

/// The same documents hung directly under the root, with the leaf-level γ.
HdpTree flatten(const HdpTree& tree);

/// Matrix of leaf first moments (vocab × leaves) used for the topic count.
Matrix leaf_first_moments(const HdpTree& tree, const AveragingPolicy& policy = {});

struct HeldoutConfig {
  double smoothing = 1e-3;   // Φ ← (1 - η)Φ + η/V
  int em_iterations = 50;
  double pseudocount = 1e-3;
};

/// Σ_docs -log p(doc | Φ, θ_doc) / Σ_docs |doc|, with θ_doc folded in by EM.
double heldout_perword_nll(const Matrix& phi, const std::vector<Document>& docs, const HeldoutConfig& config = {});
double heldout_perword_nll(const HdpFit& fit, const std::vector<Document>& docs, const HeldoutConfig& config = {});

/// Model JSON { K, K1, sigma2, pi, phi_file, branches, solver, seed, timings_ms } plus a
/// matrix file next to it.
struct ModelRecord {
  std::string model;
  int k = 0;
  int k1 = 0;
  double sigma2 = 0.0;
  Vector pi;
  Matrix phi;
  std::vector<std::string> branches;
  std::string solver;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, double>> timings_ms;
};

ModelRecord to_record(const IbpFit& fit, const std::string& model, const DecompositionConfig& config);
ModelRecord to_record(const HdpFit& fit, const DecompositionConfig& config);
void save_model(const std::filesystem::path& json_path, const ModelRecord& record);
ModelRecord load_model(const std::filesystem::path& json_path);

}  // namespace specbnp
