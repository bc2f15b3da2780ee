#include "doctest.h"
#include "oracles.hpp"

#include "specbnp/error.hpp"
#include "specbnp/hdp_tensors.hpp"

#include <filesystem>

using namespace specbnp;

namespace {

struct Population {
  Vector m1;
  Matrix m2;
  DenseTensor m3;
};

// Word moments of a leaf at the end of a Dirichlet chain below `top`.
Population chain_population(const Matrix& phi, const Vector& top, const std::vector<double>& gammas) {
  Population p;
  p.m1 = phi * top;
  p.m2 = oracle::naive_contract(oracle::dirichlet_chain_moment(top, gammas, 2), {phi, phi}).to_matrix();
  p.m3 = oracle::naive_contract(oracle::dirichlet_chain_moment(top, gammas, 3), {phi, phi, phi});
  return p;
}

Matrix simplex_columns(std::mt19937_64& g, Eigen::Index v, Eigen::Index k) {
  Matrix phi = oracle::uniform(g, v * k, 0.01, 1.0).reshaped(v, k);
  for (Eigen::Index c = 0; c < k; ++c) phi.col(c) /= phi.col(c).sum();
  return phi;
}

}  // namespace

TEST_SUITE("hdp_tensors") {

TEST_CASE("coefficients at unit concentrations") {
  const std::vector<double> g{0.0, 1.0, 1.0};
  const HdpCoefficients c = hdp_coefficients(g, 3);
  CHECK(c.at(0).c2 == doctest::Approx(1.0 / 4).epsilon(1e-14));
  CHECK(c.at(0).c3 == doctest::Approx(3.0 / 4).epsilon(1e-14));
  CHECK(c.at(0).c4 == doctest::Approx(1.0 / 36).epsilon(1e-14));
  CHECK(c.at(0).c5 == doctest::Approx(4.0 / 27).epsilon(1e-14));
  CHECK(c.at(0).c6 == doctest::Approx(23.0 / 36).epsilon(1e-14));
  const HdpLevelCoefficients& bottom = c.at(2);
  CHECK(bottom.c2 == 1.0);
  CHECK(bottom.c3 == 0.0);
  CHECK(bottom.c4 == 1.0);
  CHECK(bottom.c5 == 0.0);
  CHECK(bottom.c6 == 0.0);
  CHECK_THROWS_AS(c.at(3), InputError);
}

TEST_CASE("two levels reduce to one Dirichlet step") {
  for (double g : {0.3, 1.0, 7.5}) {
    const std::vector<double> gs{0.0, g};
    const HdpLevelCoefficients c = hdp_coefficients(gs, 2).at(0);
    CHECK(c.c2 == doctest::Approx(g / (g + 1)));
    CHECK(c.c3 == doctest::Approx(1 / (g + 1)));
    CHECK(c.c6 / c.c3 == doctest::Approx(2 / (g + 2)));
  }
}

TEST_CASE("recursion matches the three-layer closed forms") {
  auto g = oracle::rng(41);
  const Vector draws = oracle::uniform(g, 40, 0.05, 20.0);
  for (int i = 0; i < 20; ++i) {
    const double g1 = draws(2 * i), g2 = draws(2 * i + 1);
    const std::vector<double> gs{0.0, g1, g2};
    const HdpLevelCoefficients r = hdp_coefficients(gs, 3).at(0);
    const HdpLevelCoefficients f = hdp_coefficients_3layer(g1, g2);
    CHECK(std::abs(r.c2 - f.c2) < 1e-12);
    CHECK(std::abs(r.c3 - f.c3) < 1e-12);
    CHECK(std::abs(r.c4 - f.c4) < 1e-12);
    CHECK(std::abs(r.c5 - f.c5) < 1e-12);
    CHECK(std::abs(r.c6 - f.c6) < 1e-12);
  }
}

TEST_CASE("coefficients stay in (0, 1]") {
  auto g = oracle::rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const int depth = 2 + trial % 4;
    std::vector<double> gs(static_cast<std::size_t>(depth));
    for (double& x : gs) x = oracle::uniform(g, 1, 0.01, 50.0)(0);
    const HdpCoefficients c = hdp_coefficients(gs, depth);
    for (int l = 0; l < depth - 1; ++l) {
      for (double x : {c.at(l).c2, c.at(l).c3, c.at(l).c4, c.at(l).c5, c.at(l).c6}) {
        CHECK(x > 0.0);
        CHECK(x <= 1.0 + 1e-15);
      }
    }
  }
  const std::vector<double> bad{0.0, 1.0, -1.0};
  CHECK_THROWS_AS(hdp_coefficients(bad, 3), InputError);
  CHECK_THROWS_AS(hdp_coefficients(bad, 1), InputError);
  CHECK_THROWS_AS(hdp_coefficients_3layer(0.0, 1.0), InputError);
}

TEST_CASE("population tensors are diagonal in the topics at every level") {
  auto g = oracle::rng(43);
  for (int depth = 2; depth <= 4; ++depth) {
    const Matrix phi = simplex_columns(g, 6, 3);
    Vector top = oracle::uniform(g, 3, 0.2, 1.0);
    top /= top.sum();
    std::vector<double> gs{0.0};
    for (int l = 1; l < depth; ++l) gs.push_back(oracle::uniform(g, 1, 0.3, 5.0)(0));
    const HdpCoefficients c = hdp_coefficients(gs, depth);
    // a node at level l sees the chain gammas[l+1..]
    for (int level = 0; level < depth - 1; ++level) {
      const std::vector<double> chain(gs.begin() + level + 1, gs.end());
      const Population p = chain_population(phi, top, chain);
      const HdpTensorSet s = hdp_tensors_from_moments(p.m1, p.m2, p.m3, c.at(level));
      const Matrix s2 = phi * (c.at(level).c3 * top).asDiagonal() * phi.transpose();
      CHECK((s.s2 - s2).cwiseAbs().maxCoeff() < 1e-12);
      const DenseTensor s3 = oracle::naive_contract(DenseTensor::diagonal(c.at(level).c6 * top, 3), {phi, phi, phi});
      CHECK(oracle::max_diff(*s.s3, s3) < 1e-12);
      CHECK(max_asymmetry(*s.s3) < 1e-14);
    }
  }
}

TEST_CASE("whitened S3 assembled from the whitened M3") {
  auto g = oracle::rng(44);
  const Matrix phi = simplex_columns(g, 8, 3);
  const Vector top = (Vector(3) << 0.5, 0.3, 0.2).finished();
  const std::vector<double> gs{0.0, 2.0, 0.7};
  const HdpLevelCoefficients c = hdp_coefficients(gs, 3).at(0);
  const Population p = chain_population(phi, top, {2.0, 0.7});
  const HdpTensorSet s = hdp_tensors_from_moments(p.m1, p.m2, p.m3, c);
  const Matrix w = oracle::gaussian(g, 8, 3);
  const DenseTensor direct = contract_all(*s.s3, w.transpose());
  const DenseTensor assembled = whitened_hdp_s3(contract_all(p.m3, w.transpose()), p.m1, s.s2, w, c);
  CHECK(oracle::max_diff(direct, assembled) < 1e-14);
  CHECK_THROWS_AS(whitened_hdp_s3(direct, Vector::Ones(5), s.s2, w, c), DimensionError);
}

TEST_CASE("single-topic corpus gives a rank-one S2") {
  Document d = Document::from_tokens({0, 1, 1, 2, 0});
  std::vector<HdpNode> nodes(3);
  nodes[0].id = 0;
  for (int i = 1; i <= 2; ++i) {
    nodes[static_cast<std::size_t>(i)].id = i;
    nodes[static_cast<std::size_t>(i)].parent = 0;
    nodes[static_cast<std::size_t>(i)].level = 1;
    nodes[static_cast<std::size_t>(i)].document = d;
  }
  const HdpTree tree(nodes, {1.0, 1.0}, 4);
  const std::vector<double> gs{0.0, 1.0};
  const HdpTensorSet s = node_tensors(tree, 0, hdp_coefficients(gs, 2));
  CHECK(s.node_id == 0);
  CHECK(s.level == 0);
  CHECK(s.s1.sum() == doctest::Approx(1.0));
  CHECK((s.s2 - s.s2.transpose()).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(s.s3.has_value());
  const HdpTensorSet no3 = node_tensors(tree, 0, hdp_coefficients(gs, 2), {}, false);
  CHECK(!no3.s3.has_value());

  const Vector word = (Vector(3) << 0.2, 0.5, 0.3).finished();
  const Matrix m2 = word * word.transpose();
  const HdpTensorSet one = hdp_tensors_from_moments(word, m2, std::nullopt, hdp_coefficients(gs, 2).at(0));
  Eigen::SelfAdjointEigenSolver<Matrix> eig(one.s2);
  CHECK(std::abs(eig.eigenvalues()(1)) < 1e-15);
}

TEST_CASE("tensor sets are written with a manifest") {
  HdpTensorSet s;
  s.s1 = Vector::Ones(2);
  s.s2 = Matrix::Identity(2, 2);
  const auto dir = std::filesystem::temp_directory_path() / "specbnp_hdp_set_test";
  std::filesystem::remove_all(dir);
  save_hdp_tensor_set(dir, s);
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  CHECK(std::filesystem::exists(dir / "s2.txt"));
  CHECK(!std::filesystem::exists(dir / "s3.txt"));
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
