#pragma once

// Synthetic data with known parameters: IBP feature draws, linear-Gaussian and isFA
// samples, 6×6 image templates, HDP corpora, and exact population moments for each model.

#include "specbnp/ibp_tensors.hpp"
#include "specbnp/moments.hpp"
#include "specbnp/pipelines.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace specbnp {

/// n × K binary matrix with Z_ij ~ Bernoulli(π_j).
Matrix gen_ibp_z(Eigen::Index n, const Vector& pi, std::uint64_t seed);
/// Indian buffet with concentration α: customer i takes dish k with probability m_k / i,
/// then Poisson(α / i) new dishes. The column count is random.
Matrix gen_ibp_z_buffet(Eigen::Index n, double alpha, std::uint64_t seed);

/// Rows x = Φz + ε with z ~ Bernoulli(π), ε ~ N(0, σ² I). `sigma` is the standard deviation.
SampleSet gen_linear_gaussian(Eigen::Index n, const Matrix& phi, const Vector& pi, double sigma, std::uint64_t seed);
/// Rows x = Φ(z ⊙ y) + ε with y from the prior (N(0, 1) or Laplace with unit scale).
SampleSet gen_isfa(Eigen::Index n, const Matrix& phi, const Vector& pi, IsfaPrior prior, double sigma,
                   std::uint64_t seed);

/// Four disjoint binary 6×6 templates as columns (pixel r*6 + c): three corner blocks
/// and a central cross.
Matrix templates_6x6();

RawMoments population_moments_lg(const Matrix& phi, const Vector& pi, double sigma2);
RawMoments population_moments_isfa(const Matrix& phi, const Vector& pi, IsfaPrior prior, double sigma2);

/// Internal layout of an HDP corpus: a node either holds `documents` leaves directly or
/// has child groups.
struct TreeShape {
  int documents = 0;
  std::vector<TreeShape> children;
  int depth() const;  // levels including the document leaves
};

/// [a, b, ...] is a node with those children; a number n is a group of n documents.
TreeShape parse_tree_shape(const std::string& json_text);

struct HdpCorpus {
  HdpTree tree;
  /// Extra documents drawn like the training ones, `heldout_per_group` per document group.
  std::vector<Document> heldout;
};

/// Node weights π ~ Dirichlet(γ_level · π_parent) from the root's π0 down to the
/// documents; each document then draws `words_per_doc` words from Φρ. gammas[l] is the
/// concentration of level l (gammas[0] unused).
HdpCorpus gen_hdp_corpus(const TreeShape& shape, const std::vector<double>& gammas, const Matrix& phi,
                         const Vector& pi0, int words_per_doc, std::uint64_t seed, int heldout_per_group = 0);

/// Document word moments M1..M3 of the HDP under fixed root weights π0, averaged over the
/// Dirichlet draws along `chain` (the γ of each level below the root).
struct HdpPopulation {
  Vector m1;
  Matrix m2;
  DenseTensor m3;
};
HdpPopulation hdp_population_moments(const Matrix& phi, const Vector& pi0, const std::vector<double>& chain);

struct GeneratorSpec {
  std::string model;  // ibp-lg, isfa-gauss, isfa-laplace, hdp
  std::uint64_t seed = 0;
  bool exact = false;  // write population moments instead of samples (vector models)
  // vector models
  Eigen::Index n = 0;
  Matrix phi;
  Vector pi;
  double sigma2 = 0.0;
  // hdp
  Vector pi0;
  std::vector<double> gammas;
  TreeShape shape;
  int words_per_doc = 0;
  int heldout_docs_per_group = 0;
};

/// Parses the generator JSON. Φ is given as "phi": rows, "templates", or
/// {"random": {"d", "k"}} (Gaussian entries, or exponential columns normalized onto the
/// simplex for hdp).
GeneratorSpec parse_generator_spec(const std::string& json_text);

/// Writes samples.txt / corpus.json (or moments/) plus truth.json and truth_phi.txt.
void run_generator(const GeneratorSpec& spec, const std::filesystem::path& out_dir);

}  // namespace specbnp
