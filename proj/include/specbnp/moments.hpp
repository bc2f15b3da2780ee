#pragma once

// Empirical moments of vector samples and word-count documents, and hierarchical
// averaging of document moments over an HDP tree.

#include "specbnp/tensor.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace specbnp {

/// n observations of dimension d, one per row.
class SampleSet {
 public:
  explicit SampleSet(Matrix rows);

  Eigen::Index n() const { return rows_.rows(); }
  Eigen::Index d() const { return rows_.cols(); }
  const Matrix& rows() const { return rows_; }

 private:
  Matrix rows_;
};

/// (1/n) Σ_j x_j^{⊗r}, r in 1..4.
DenseTensor empirical_moment(const SampleSet& x, int r);

/// (1/n) Σ_j (Wᵀ(x_j - c))^{⊗r}: the whitened moment built sample by sample without
/// forming any d-sized tensor. `center` defaults to zero.
DenseTensor whitened_moment(const SampleSet& x, const Matrix& w, int r,
                            const std::optional<Vector>& center = std::nullopt, int threads = 1);

/// (Wᵀ/n) Σ_j (x_j - c) ⟨Wᵀ(x_j - c), u⟩^{l-1}, which equals
/// T(T(M_l, W, ..., W), 1, u, ..., u) for the (centered) raw moment M_l.
Vector reduced_moment_power(const SampleSet& x, const Matrix& w, const Vector& u, int l,
                            const std::optional<Vector>& center = std::nullopt);

/// Bag of words: sorted (word id, count) pairs with positive counts.
class Document {
 public:
  Document() = default;
  explicit Document(std::vector<std::pair<std::uint32_t, std::uint32_t>> counts);
  /// Builds counts from a token sequence.
  static Document from_tokens(const std::vector<std::uint32_t>& tokens);

  const std::vector<std::pair<std::uint32_t, std::uint32_t>>& counts() const { return counts_; }
  std::uint64_t length() const { return length_; }
  std::uint32_t max_word() const;

 private:
  std::vector<std::pair<std::uint32_t, std::uint32_t>> counts_;
  std::uint64_t length_ = 0;
};

/// ((m-r)!/m!) Σ over ordered tuples of r distinct word positions of e_{w1} ⊗ ... ⊗ e_{wr},
/// computed from the counts. Dense over vocab^r, r in 1..3.
DenseTensor word_moment(const Document& doc, int r, std::size_t vocab_size);

/// The same moment with every mode multiplied by Wᵀ (W is vocab × K), i.e.
/// T(word_moment(doc, r), Wᵀ, ..., Wᵀ), in O(nnz · K^r).
DenseTensor whitened_word_moment(const Document& doc, int r, const Matrix& w);

struct HdpNode {
  int id = 0;
  std::optional<int> parent;
  int level = 0;
  std::vector<int> children;
  std::optional<Document> document;
};

/// Rooted tree whose leaves (all at the bottom level) each own one document.
/// gammas[l] is the concentration parameter of the nodes at level l.
class HdpTree {
 public:
  HdpTree(std::vector<HdpNode> nodes, std::vector<double> gammas, std::size_t vocab_size);

  const HdpNode& node(int id) const;
  bool contains(int id) const;
  int root() const { return root_; }
  /// Number of levels L; leaves sit at level L-1.
  int depth() const { return depth_; }
  std::size_t vocab_size() const { return vocab_size_; }
  const std::vector<double>& gammas() const { return gammas_; }
  const std::vector<HdpNode>& nodes() const { return nodes_; }
  std::vector<int> leaves() const;
  std::vector<int> nodes_at_level(int level) const;
  std::vector<int> leaves_under(int id) const;
  bool is_leaf(int id) const { return node(id).children.empty(); }

 private:
  std::vector<HdpNode> nodes_;
  std::vector<std::size_t> index_;  // id -> position in nodes_, or npos
  std::vector<double> gammas_;
  std::size_t vocab_size_ = 0;
  int root_ = -1;
  int depth_ = 0;
};

/// Leaves with fewer than `order` words are skipped (with a warning) instead of rejected;
/// parents then average over their remaining children.
struct AveragingPolicy {
  bool skip_short_documents = false;
};

/// Uniform average of `leaf_value` over children, recursively. `leaf_value(leaf_id)`
/// returns std::nullopt for an excluded leaf; a node whose children are all excluded is
/// itself excluded.
template <typename T, typename LeafFn>
std::optional<T> average_over_tree(const HdpTree& tree, int id, LeafFn&& leaf_value) {
  const HdpNode& n = tree.node(id);
  if (n.children.empty()) return leaf_value(id);
  std::optional<T> sum;
  int used = 0;
  for (int child : n.children) {
    std::optional<T> v = average_over_tree<T>(tree, child, leaf_value);
    if (!v) continue;
    if (!sum) {
      sum = std::move(*v);
    } else {
      *sum += *v;
    }
    ++used;
  }
  if (sum) *sum *= 1.0 / used;
  return sum;
}

/// M_r at a node: the document moment at a leaf, the uniform mean over children otherwise.
DenseTensor node_moment(const HdpTree& tree, int id, int r, const AveragingPolicy& policy = {});
/// node_moment with every mode multiplied by Wᵀ.
DenseTensor whitened_node_moment(const HdpTree& tree, int id, int r, const Matrix& w,
                                 const AveragingPolicy& policy = {});

/// n_i = 1 at leaves and |c(i)|² / Σ_{j ∈ c(i)} 1/n_j at internal nodes.
double effective_sample_size(const HdpTree& tree, int id);

}  // namespace specbnp
