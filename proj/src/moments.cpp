#include "specbnp/moments.hpp"

#include "specbnp/error.hpp"
#include "specbnp/log.hpp"
#include "specbnp/parallel.hpp"

#include <algorithm>
#include <limits>
#include <map>

namespace specbnp {
namespace {

constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();
constexpr Eigen::Index kChunk = 256;

void require_order(int r, int max_order, const char* what) {
  if (r < 1 || r > max_order)
    throw InputError(std::string(what) + ": order " + std::to_string(r) + " outside 1.." +
                     std::to_string(max_order));
}

// y^{⊗r} accumulated into a cube of side y.size().
void add_outer_power(DenseTensor& acc, const Vector& y, int r, double weight) {
  const auto k = static_cast<std::size_t>(y.size());
  auto out = acc.data();
  switch (r) {
    case 1:
      for (std::size_t i = 0; i < k; ++i) out[i] += weight * y(static_cast<Eigen::Index>(i));
      break;
    case 2:
      for (std::size_t i = 0; i < k; ++i) {
        const double a = weight * y(static_cast<Eigen::Index>(i));
        for (std::size_t j = 0; j < k; ++j) out[i * k + j] += a * y(static_cast<Eigen::Index>(j));
      }
      break;
    case 3:
      for (std::size_t i = 0; i < k; ++i) {
        const double a = weight * y(static_cast<Eigen::Index>(i));
        for (std::size_t j = 0; j < k; ++j) {
          const double b = a * y(static_cast<Eigen::Index>(j));
          double* o = out.data() + (i * k + j) * k;
          for (std::size_t l = 0; l < k; ++l) o[l] += b * y(static_cast<Eigen::Index>(l));
        }
      }
      break;
    case 4:
      for (std::size_t i = 0; i < k; ++i) {
        const double a = weight * y(static_cast<Eigen::Index>(i));
        for (std::size_t j = 0; j < k; ++j) {
          const double b = a * y(static_cast<Eigen::Index>(j));
          for (std::size_t l = 0; l < k; ++l) {
            const double c = b * y(static_cast<Eigen::Index>(l));
            double* o = out.data() + ((i * k + j) * k + l) * k;
            for (std::size_t q = 0; q < k; ++q) o[q] += c * y(static_cast<Eigen::Index>(q));
          }
        }
      }
      break;
    default:
      throw InputError("outer power of order " + std::to_string(r));
  }
}

double falling(double c, int k) {
  double p = 1.0;
  for (int i = 0; i < k; ++i) p *= c - i;
  return p;
}

}  // namespace

SampleSet::SampleSet(Matrix rows) : rows_(std::move(rows)) {
  if (rows_.rows() < 1) throw InputError("sample set is empty");
  if (rows_.cols() < 1) throw InputError("sample set has zero dimension");
}

DenseTensor empirical_moment(const SampleSet& x, int r) {
  require_order(r, 4, "empirical_moment");
  return whitened_moment(x, Matrix::Identity(x.d(), x.d()), r);
}

DenseTensor whitened_moment(const SampleSet& x, const Matrix& w, int r, const std::optional<Vector>& center,
                            int threads) {
  require_order(r, 4, "whitened_moment");
  if (w.rows() != x.d())
    throw DimensionError("whitened_moment: W has " + std::to_string(w.rows()) + " rows, samples have d=" +
                             std::to_string(x.d()),
                         0);
  if (center && center->size() != x.d()) throw DimensionError("whitened_moment: center length", 0);
  const auto k = static_cast<std::size_t>(w.cols());
  // Fixed chunk boundaries; partial sums are reduced in chunk order.
  const auto chunks = static_cast<std::size_t>((x.n() + kChunk - 1) / kChunk);
  std::vector<DenseTensor> partial(chunks, DenseTensor::cube(k, r));
  parallel_for(chunks, threads, [&](std::size_t c) {
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * kChunk;
    const Eigen::Index end = std::min(x.n(), begin + kChunk);
    Vector y(static_cast<Eigen::Index>(k));
    for (Eigen::Index j = begin; j < end; ++j) {
      if (center) {
        y.noalias() = w.transpose() * (x.rows().row(j).transpose() - *center);
      } else {
        y.noalias() = w.transpose() * x.rows().row(j).transpose();
      }
      add_outer_power(partial[c], y, r, 1.0);
    }
  });
  DenseTensor total = DenseTensor::cube(k, r);
  for (const auto& p : partial) total += p;
  total *= 1.0 / static_cast<double>(x.n());
  return total;
}

Vector reduced_moment_power(const SampleSet& x, const Matrix& w, const Vector& u, int l,
                            const std::optional<Vector>& center) {
  if (l != 3 && l != 4) throw InputError("reduced_moment_power: l must be 3 or 4");
  if (w.rows() != x.d()) throw DimensionError("reduced_moment_power: W rows vs sample dimension", 0);
  if (u.size() != w.cols()) throw DimensionError("reduced_moment_power: u length vs W columns", 1);
  if (center && center->size() != x.d()) throw DimensionError("reduced_moment_power: center length", 0);
  Vector acc = Vector::Zero(x.d());
  for (Eigen::Index j = 0; j < x.n(); ++j) {
    Vector xj = x.rows().row(j).transpose();
    if (center) xj -= *center;
    const double proj = (w.transpose() * xj).dot(u);
    double p = 1.0;
    for (int e = 0; e < l - 1; ++e) p *= proj;
    acc += p * xj;
  }
  return w.transpose() * acc / static_cast<double>(x.n());
}

Document::Document(std::vector<std::pair<std::uint32_t, std::uint32_t>> counts) {
  std::map<std::uint32_t, std::uint64_t> merged;
  for (auto [word, c] : counts) {
    if (c == 0) continue;
    merged[word] += c;
  }
  for (auto [word, c] : merged) {
    counts_.emplace_back(word, static_cast<std::uint32_t>(c));
    length_ += c;
  }
}

Document Document::from_tokens(const std::vector<std::uint32_t>& tokens) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> counts;
  counts.reserve(tokens.size());
  for (auto t : tokens) counts.emplace_back(t, 1u);
  return Document(std::move(counts));
}

std::uint32_t Document::max_word() const { return counts_.empty() ? 0 : counts_.back().first; }

DenseTensor word_moment(const Document& doc, int r, std::size_t vocab_size) {
  require_order(r, 3, "word_moment");
  const double m = static_cast<double>(doc.length());
  if (doc.length() < static_cast<std::uint64_t>(r))
    throw InputError("document too short for order " + std::to_string(r));
  if (!doc.counts().empty() && doc.max_word() >= vocab_size)
    throw InputError("word id " + std::to_string(doc.max_word()) + " outside vocabulary of size " +
                     std::to_string(vocab_size));
  const double norm = 1.0 / falling(m, r);
  DenseTensor t = DenseTensor::cube(vocab_size, r);
  const auto& cs = doc.counts();
  for (const auto& [a, ca] : cs) {
    if (r == 1) {
      t(a) = ca * norm;
      continue;
    }
    for (const auto& [b, cb] : cs) {
      const double ab = (a == b) ? falling(ca, 2) : double(ca) * cb;
      if (r == 2) {
        t(a, b) = ab * norm;
        continue;
      }
      for (const auto& [c, cc] : cs) {
        double v;
        if (a == b && b == c) {
          v = falling(ca, 3);
        } else if (a == b) {
          v = ab * cc;
        } else if (a == c) {
          v = falling(ca, 2) * cb;
        } else if (b == c) {
          v = double(ca) * falling(cb, 2);
        } else {
          v = ab * cc;
        }
        t(a, b, c) = v * norm;
      }
    }
  }
  return t;
}

DenseTensor whitened_word_moment(const Document& doc, int r, const Matrix& w) {
  require_order(r, 3, "whitened_word_moment");
  if (doc.length() < static_cast<std::uint64_t>(r))
    throw InputError("document too short for order " + std::to_string(r));
  if (!doc.counts().empty() && doc.max_word() >= static_cast<std::uint64_t>(w.rows()))
    throw DimensionError("whitened_word_moment: word id outside W rows", 0);
  const Eigen::Index k = w.cols();
  const auto ku = static_cast<std::size_t>(k);
  const double m = static_cast<double>(doc.length());

  Vector s = Vector::Zero(k);
  for (auto [a, c] : doc.counts()) s += double(c) * w.row(a).transpose();
  if (r == 1) return DenseTensor::from_vector(s / m);

  Matrix diag2 = Matrix::Zero(k, k);
  for (auto [a, c] : doc.counts()) diag2.noalias() += double(c) * w.row(a).transpose() * w.row(a);
  if (r == 2) return DenseTensor::from_matrix((s * s.transpose() - diag2) / falling(m, 2));

  // Σ over distinct positions = all - (p=q) - (q=r) - (p=r) + 2 (p=q=r)
  DenseTensor t = DenseTensor::outer_power(s, 3);
  t -= symmetrize(outer(DenseTensor::from_matrix(diag2), DenseTensor::from_vector(s)), 3);
  DenseTensor diag3 = DenseTensor::cube(ku, 3);
  for (auto [a, c] : doc.counts()) add_outer_power(diag3, w.row(a).transpose(), 3, double(c));
  t.axpy(2.0, diag3);
  t *= 1.0 / falling(m, 3);
  return t;
}

HdpTree::HdpTree(std::vector<HdpNode> nodes, std::vector<double> gammas, std::size_t vocab_size)
    : nodes_(std::move(nodes)), gammas_(std::move(gammas)), vocab_size_(vocab_size) {
  if (nodes_.empty()) throw InputError("tree has no nodes");
  if (vocab_size_ == 0) throw InputError("vocabulary size must be positive");
  int max_id = 0;
  for (const auto& n : nodes_) {
    if (n.id < 0) throw InputError("negative node id " + std::to_string(n.id));
    max_id = std::max(max_id, n.id);
  }
  index_.assign(static_cast<std::size_t>(max_id) + 1, kNoNode);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    auto& slot = index_[static_cast<std::size_t>(nodes_[i].id)];
    if (slot != kNoNode) throw InputError("duplicate node id " + std::to_string(nodes_[i].id));
    slot = i;
    nodes_[i].children.clear();
  }
  for (auto& n : nodes_) {
    if (!n.parent) {
      if (root_ >= 0) throw InputError("tree has more than one root");
      root_ = n.id;
      continue;
    }
    if (!contains(*n.parent))
      throw InputError("node " + std::to_string(n.id) + " has unknown parent " + std::to_string(*n.parent));
    nodes_[index_[static_cast<std::size_t>(*n.parent)]].children.push_back(n.id);
  }
  if (root_ < 0) throw InputError("tree has no root");
  if (node(root_).level != 0) throw InputError("root must be at level 0");
  for (const auto& n : nodes_) {
    if (n.parent && n.level != node(*n.parent).level + 1)
      throw InputError("node " + std::to_string(n.id) + " level inconsistent with its parent");
    depth_ = std::max(depth_, n.level + 1);
  }
  // Every node must be reachable from the root (levels alone do not rule out cycles).
  std::size_t reached = 0;
  std::vector<int> stack{root_};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    ++reached;
    for (int c : node(id).children) stack.push_back(c);
  }
  if (reached != nodes_.size()) throw InputError("tree has nodes unreachable from the root");
  for (const auto& n : nodes_) {
    const bool leaf = n.children.empty();
    if (leaf && n.level != depth_ - 1)
      throw InputError("leaf " + std::to_string(n.id) + " is not on the bottom level");
    if (leaf && !n.document) throw InputError("leaf " + std::to_string(n.id) + " carries no document");
    if (!leaf && n.document) throw InputError("internal node " + std::to_string(n.id) + " carries a document");
    if (n.document && !n.document->counts().empty() && n.document->max_word() >= vocab_size_)
      throw InputError("document at leaf " + std::to_string(n.id) + " uses a word outside the vocabulary");
  }
  if (depth_ < 2) throw InputError("tree needs at least two levels");
  if (gammas_.size() < static_cast<std::size_t>(depth_))
    throw InputError("expected " + std::to_string(depth_) + " gammas, got " + std::to_string(gammas_.size()));
}

bool HdpTree::contains(int id) const {
  return id >= 0 && static_cast<std::size_t>(id) < index_.size() && index_[static_cast<std::size_t>(id)] != kNoNode;
}

const HdpNode& HdpTree::node(int id) const {
  if (!contains(id)) throw InputError("no node with id " + std::to_string(id));
  return nodes_[index_[static_cast<std::size_t>(id)]];
}

std::vector<int> HdpTree::leaves() const { return leaves_under(root_); }

std::vector<int> HdpTree::nodes_at_level(int level) const {
  std::vector<int> out;
  for (const auto& n : nodes_)
    if (n.level == level) out.push_back(n.id);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> HdpTree::leaves_under(int id) const {
  std::vector<int> out;
  std::vector<int> stack{id};
  while (!stack.empty()) {
    int cur = stack.back();
    stack.pop_back();
    const auto& n = node(cur);
    if (n.children.empty()) out.push_back(cur);
    for (int c : n.children) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

template <typename LeafMoment>
DenseTensor tree_moment(const HdpTree& tree, int id, int r, const AveragingPolicy& policy, LeafMoment&& moment) {
  auto leaf = [&](int leaf_id) -> std::optional<DenseTensor> {
    const Document& doc = *tree.node(leaf_id).document;
    if (doc.length() < static_cast<std::uint64_t>(r)) {
      if (!policy.skip_short_documents)
        throw InputError("leaf " + std::to_string(leaf_id) + ": document too short for order " + std::to_string(r));
      warn("skipping leaf " + std::to_string(leaf_id) + ": " + std::to_string(doc.length()) +
           " words, order " + std::to_string(r) + " moment needs " + std::to_string(r));
      return std::nullopt;
    }
    return moment(doc);
  };
  auto result = average_over_tree<DenseTensor>(tree, id, leaf);
  if (!result)
    throw InputError("node " + std::to_string(id) + " has no document long enough for order " + std::to_string(r));
  return *std::move(result);
}

}  // namespace

DenseTensor node_moment(const HdpTree& tree, int id, int r, const AveragingPolicy& policy) {
  return tree_moment(tree, id, r, policy,
                     [&](const Document& doc) { return word_moment(doc, r, tree.vocab_size()); });
}

DenseTensor whitened_node_moment(const HdpTree& tree, int id, int r, const Matrix& w,
                                 const AveragingPolicy& policy) {
  if (static_cast<std::size_t>(w.rows()) != tree.vocab_size())
    throw DimensionError("whitened_node_moment: W rows vs vocabulary size", 0);
  return tree_moment(tree, id, r, policy, [&](const Document& doc) { return whitened_word_moment(doc, r, w); });
}

double effective_sample_size(const HdpTree& tree, int id) {
  const HdpNode& n = tree.node(id);
  if (n.children.empty()) return 1.0;
  double inv = 0.0;
  for (int c : n.children) inv += 1.0 / effective_sample_size(tree, c);
  const double k = static_cast<double>(n.children.size());
  return k * k / inv;
}

}  // namespace specbnp
