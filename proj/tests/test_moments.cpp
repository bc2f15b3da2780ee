#include "doctest.h"
#include "oracles.hpp"

#include "specbnp/corpus_io.hpp"
#include "specbnp/error.hpp"
#include "specbnp/log.hpp"
#include "specbnp/moments.hpp"

#include <numeric>

using namespace specbnp;

namespace {

Document doc_of(std::initializer_list<std::uint32_t> tokens) { return Document::from_tokens(tokens); }

HdpNode leaf(int id, int parent, int level, Document d) {
  HdpNode n;
  n.id = id;
  n.parent = parent;
  n.level = level;
  n.document = std::move(d);
  return n;
}

HdpNode inner(int id, std::optional<int> parent, int level) {
  HdpNode n;
  n.id = id;
  n.parent = parent;
  n.level = level;
  return n;
}

// Random tree of the given depth; every internal node gets 1..max_children children.
HdpTree random_tree(std::mt19937_64& g, int depth, int max_children) {
  std::uniform_int_distribution<int> fan(1, max_children);
  std::vector<HdpNode> nodes{inner(0, std::nullopt, 0)};
  std::vector<int> frontier{0};
  int next = 1;
  for (int level = 1; level < depth; ++level) {
    std::vector<int> grown;
    for (int p : frontier) {
      const int c = fan(g);
      for (int i = 0; i < c; ++i) {
        if (level == depth - 1) {
          nodes.push_back(leaf(next, p, level, doc_of({0, 1, 2})));
        } else {
          nodes.push_back(inner(next, p, level));
        }
        grown.push_back(next++);
      }
    }
    frontier = grown;
  }
  return HdpTree(nodes, std::vector<double>(static_cast<std::size_t>(depth), 1.0), 3);
}

// Weight of each leaf in the root average, found by walking down from the root.
std::vector<double> eta(const HdpTree& tree) {
  std::vector<double> out;
  std::function<void(int, double)> walk = [&](int id, double w) {
    const auto& n = tree.node(id);
    if (n.children.empty()) {
      out.push_back(w);
      return;
    }
    for (int c : n.children) walk(c, w / static_cast<double>(n.children.size()));
  };
  walk(tree.root(), 1.0);
  return out;
}

}  // namespace

TEST_SUITE("moments") {

TEST_CASE("empirical moments of small sample sets") {
  Matrix x(2, 2);
  x << 1, 0, 0, 1;
  CHECK((empirical_moment(SampleSet(x), 2).to_matrix() - 0.5 * Matrix::Identity(2, 2)).norm() == 0.0);

  Matrix y(1, 2);
  y << 1, 2;
  const DenseTensor m3 = empirical_moment(SampleSet(y), 3);
  CHECK(m3(1, 1, 1) == 8.0);
  CHECK(m3(0, 1, 1) == 4.0);
  CHECK_THROWS_AS(SampleSet(Matrix(0, 3)), InputError);
}

TEST_CASE("empirical fourth moment matches a direct loop") {
  auto g = oracle::rng(21);
  const Matrix x = oracle::gaussian(g, 10, 4);
  const DenseTensor m4 = empirical_moment(SampleSet(x), 4);
  double worst = 0.0;
  oracle::for_each_index(4, 4, [&](const std::vector<std::size_t>& i) {
    double s = 0.0;
    for (int j = 0; j < 10; ++j) {
      double p = 1.0;
      for (std::size_t m : i) p *= x(j, static_cast<Eigen::Index>(m));
      s += p;
    }
    worst = std::max(worst, std::abs(s / 10 - m4.at(i)));
  });
  CHECK(worst < 1e-12);
  CHECK(max_asymmetry(m4) < 1e-12);
}

TEST_CASE("whitened moments are independent of the thread count") {
  auto g = oracle::rng(22);
  const SampleSet x(oracle::gaussian(g, 1000, 6));
  const Matrix w = oracle::gaussian(g, 6, 3);
  const DenseTensor one = whitened_moment(x, w, 3, std::nullopt, 1);
  const DenseTensor four = whitened_moment(x, w, 3, std::nullopt, 4);
  CHECK(oracle::max_diff(one, four) == 0.0);
  const DenseTensor dense = contract_all(empirical_moment(x, 3), w.transpose());
  CHECK(oracle::max_diff(one, dense) < 1e-12);
}

TEST_CASE("reduced_moment_power matches the dense whitened moment") {
  auto g = oracle::rng(23);
  const SampleSet x(oracle::gaussian(g, 50, 8));
  const Matrix w = oracle::gaussian(g, 8, 3);
  const Vector u = oracle::gaussian(g, 3, 1).col(0);
  for (int l : {3, 4}) {
    const DenseTensor dense = contract_all(empirical_moment(x, l), w.transpose());
    const Vector expected = tensor_apply(dense, u);
    CHECK((reduced_moment_power(x, w, u, l) - expected).norm() < 1e-10 * (1 + expected.norm()));
  }
  CHECK(reduced_moment_power(x, w, Vector::Zero(3), 3).norm() == 0.0);

  Matrix one(1, 3);
  one << 1, -2, 0.5;
  const Vector u3 = (Vector(3) << 0.3, 0.1, -1).finished();
  const Vector x0 = one.row(0).transpose();
  CHECK((reduced_moment_power(SampleSet(one), Matrix::Identity(3, 3), u3, 4) - x0 * std::pow(x0.dot(u3), 3)).norm() <
        1e-14);
  CHECK_THROWS_AS(reduced_moment_power(x, w, Vector::Zero(4), 3), DimensionError);
}

TEST_CASE("word moments count distinct ordered positions") {
  // words a=0, a=0, b=1: ordered distinct pairs (a,a) ×2, (a,b) ×2, (b,a) ×2
  const DenseTensor m2 = word_moment(doc_of({0, 0, 1}), 2, 2);
  CHECK(m2(0, 0) == doctest::Approx(1.0 / 3));
  CHECK(m2(0, 1) == doctest::Approx(1.0 / 3));
  CHECK(m2(1, 0) == doctest::Approx(1.0 / 3));
  CHECK(m2(1, 1) == 0.0);

  const DenseTensor m1 = word_moment(doc_of({0, 0, 1, 2}), 1, 3);
  CHECK(m1.to_vector().isApprox((Vector(3) << 0.5, 0.25, 0.25).finished()));

  const DenseTensor m3 = word_moment(doc_of({0, 1, 2}), 3, 3);
  oracle::for_each_index(3, 3, [&](const std::vector<std::size_t>& i) {
    const bool distinct = i[0] != i[1] && i[1] != i[2] && i[0] != i[2];
    CHECK(m3.at(i) == doctest::Approx(distinct ? 1.0 / 6 : 0.0));
  });

  try {
    word_moment(doc_of({0, 1}), 3, 3);
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("document too short for order 3") != std::string::npos);
  }
  CHECK_THROWS_AS(word_moment(doc_of({0, 7, 1}), 2, 3), InputError);
}

TEST_CASE("word moments match enumeration over positions and sum to one") {
  auto g = oracle::rng(24);
  std::uniform_int_distribution<std::uint32_t> word(0, 4);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::uint32_t> tokens(7);
    for (auto& t : tokens) t = word(g);
    const Document d = Document::from_tokens(tokens);
    for (int r = 1; r <= 3; ++r) {
      DenseTensor brute = DenseTensor::cube(5, r);
      double tuples = 0;
      oracle::for_each_index(tokens.size(), r, [&](const std::vector<std::size_t>& pos) {
        for (std::size_t a = 0; a < pos.size(); ++a)
          for (std::size_t b = a + 1; b < pos.size(); ++b)
            if (pos[a] == pos[b]) return;
        std::vector<std::size_t> w;
        for (std::size_t p : pos) w.push_back(tokens[p]);
        brute.at(w) += 1;
        tuples += 1;
      });
      brute *= 1.0 / tuples;
      const DenseTensor m = word_moment(d, r, 5);
      CHECK(oracle::max_diff(m, brute) < 1e-14);
      const auto data = m.data();
      CHECK(std::accumulate(data.begin(), data.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));

      const Matrix w = oracle::gaussian(g, 5, 3);
      CHECK(oracle::max_diff(whitened_word_moment(d, r, w), contract_all(m, w.transpose())) < 1e-12);
    }
  }
}

TEST_CASE("node moments average children uniformly") {
  // root -> {A -> L1, B -> {L2, L3}}: the root weights are 1/2, 1/4, 1/4
  const Document d1 = doc_of({0, 0, 1}), d2 = doc_of({1, 2, 2}), d3 = doc_of({0, 1, 2});
  std::vector<HdpNode> nodes{inner(0, std::nullopt, 0), inner(1, 0, 1), inner(2, 0, 1),
                             leaf(3, 1, 2, d1),        leaf(4, 2, 2, d2), leaf(5, 2, 2, d3)};
  const HdpTree tree(nodes, {1, 1, 1}, 3);
  for (int r = 1; r <= 3; ++r) {
    DenseTensor expected = 0.5 * word_moment(d1, r, 3);
    expected.axpy(0.25, word_moment(d2, r, 3));
    expected.axpy(0.25, word_moment(d3, r, 3));
    CHECK(oracle::max_diff(node_moment(tree, 0, r), expected) < 1e-15);
  }
  CHECK(effective_sample_size(tree, 0) == doctest::Approx(8.0 / 3).epsilon(1e-15));
  CHECK(effective_sample_size(tree, 3) == 1.0);
}

TEST_CASE("a balanced tree over identical documents has that document's moment") {
  const Document d = doc_of({0, 1, 1, 2});
  std::vector<HdpNode> nodes{inner(0, std::nullopt, 0), inner(1, 0, 1), inner(2, 0, 1)};
  for (int i = 0; i < 4; ++i) nodes.push_back(leaf(3 + i, 1 + i / 2, 2, d));
  const HdpTree tree(nodes, {1, 1, 1}, 3);
  CHECK(oracle::max_diff(node_moment(tree, 0, 3), word_moment(d, 3, 3)) < 1e-15);
  CHECK(effective_sample_size(tree, 0) == 4.0);
}

TEST_CASE("short documents are rejected or skipped with a warning") {
  const Document ok = doc_of({0, 1, 2}), shorty = doc_of({0, 1});
  std::vector<HdpNode> nodes{inner(0, std::nullopt, 0), leaf(1, 0, 1, ok), leaf(2, 0, 1, shorty)};
  const HdpTree tree(nodes, {1, 1}, 3);
  try {
    node_moment(tree, 0, 3);
    FAIL("expected an error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("leaf 2") != std::string::npos);
  }
  std::vector<std::string> seen;
  auto previous = set_warning_sink([&](const std::string& m) { seen.push_back(m); });
  const DenseTensor m3 = node_moment(tree, 0, 3, {true});
  set_warning_sink(previous);
  CHECK(seen.size() == 1);
  CHECK(oracle::max_diff(m3, word_moment(ok, 3, 3)) == 0.0);
}

TEST_CASE("effective sample size equals the eta-vector definition") {
  auto g = oracle::rng(25);
  for (int trial = 0; trial < 100; ++trial) {
    const HdpTree tree = random_tree(g, 2 + trial % 3, 4);
    const auto e = eta(tree);
    double l1 = 0, l2 = 0;
    for (double x : e) {
      l1 += x;
      l2 += x * x;
    }
    const double n = effective_sample_size(tree, tree.root());
    CHECK(std::abs(n - l1 * l1 / l2) < 1e-12 * n);
    CHECK(n <= static_cast<double>(tree.leaves().size()) * (1 + 1e-12));
  }
}

TEST_CASE("tree validation") {
  const Document d = doc_of({0, 1, 2});
  CHECK_THROWS_AS(HdpTree({inner(0, std::nullopt, 0), inner(1, 0, 1)}, {1, 1}, 3), InputError);
  CHECK_THROWS_AS(HdpTree({inner(0, std::nullopt, 0), leaf(1, 0, 2, d)}, {1, 1, 1}, 3), InputError);
  CHECK_THROWS_AS(HdpTree({inner(0, std::nullopt, 0), leaf(1, 0, 1, d)}, {1}, 3), InputError);
  CHECK_THROWS_AS(HdpTree({inner(0, std::nullopt, 0), leaf(1, 0, 1, d), leaf(2, 0, 1, d)}, {1, 1}, 2), InputError);
}

TEST_CASE("corpus JSON round-trips and rejects malformed input") {
  const std::string text = R"({"vocab_size": 4, "gammas": [1.0, 2.5],
    "nodes": [{"id": 0, "parent": null, "level": 0}, {"id": 1, "parent": 0, "level": 1},
              {"id": 2, "parent": 0, "level": 1}],
    "documents": [{"leaf": 1, "counts": {"0": 2, "3": 1}}, {"leaf": 2, "counts": {"1": 3}}]})";
  const HdpTree tree = corpus_from_json_text(text);
  CHECK(tree.vocab_size() == 4);
  CHECK(tree.depth() == 2);
  CHECK(tree.node(1).document->length() == 3);
  const HdpTree again = corpus_from_json_text(corpus_to_json_text(tree));
  CHECK(corpus_to_json_text(again) == corpus_to_json_text(tree));
  CHECK(oracle::max_diff(node_moment(again, 0, 2), node_moment(tree, 0, 2)) == 0.0);

  CHECK_THROWS_AS(corpus_from_json_text("{"), InputError);
  CHECK_THROWS_AS(corpus_from_json_text(R"({"vocab_size": 4})"), InputError);
  CHECK_THROWS_AS(corpus_from_json_text(R"({"vocab_size": 2, "gammas": [1, 1],
    "nodes": [{"id": 0, "parent": null, "level": 0}, {"id": 1, "parent": 0, "level": 1}],
    "documents": [{"leaf": 1, "counts": {"5": 1}}]})"),
                  InputError);
}

}  // TEST_SUITE
