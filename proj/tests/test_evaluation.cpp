#include "doctest.h"
#include "oracles.hpp"

#include "specbnp/error.hpp"
#include "specbnp/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <thread>

using namespace specbnp;

TEST_SUITE("evaluation") {

TEST_CASE("reversed columns") {
  auto g = oracle::rng(1);
  const Matrix phi = oracle::gaussian(g, 6, 5);
  const Matrix rev = phi.rowwise().reverse();
  const MatchResult m = match_columns(phi, rev, false);
  CHECK(m.permutation == std::vector<int>{4, 3, 2, 1, 0});
  CHECK(frobenius_error(m) == 0.0);
  CHECK(frobenius_error(match_columns(phi, phi, false)) == 0.0);
}

TEST_CASE("sign flips") {
  auto g = oracle::rng(2);
  const Matrix phi = oracle::gaussian(g, 6, 4);
  CHECK(frobenius_error(match_columns(phi, -phi, true)) == 0.0);
  const MatchResult unsigned_match = match_columns(phi, -phi, false);
  CHECK(frobenius_error(unsigned_match) > 0.0);
  const MatchResult m = match_columns(phi, -phi, true);
  CHECK(std::all_of(m.signs.begin(), m.signs.end(), [](int s) { return s == -1; }));
}

TEST_CASE("perturbation of fixed norm per column") {
  auto g = oracle::rng(3);
  const Eigen::Index k = 5;
  const double eps = 1e-3;
  const Matrix phi = 10.0 * oracle::orthonormal(g, 8, k);
  Matrix noise = oracle::gaussian(g, 8, k);
  noise.colwise().normalize();
  const Matrix hat = phi + eps * noise;
  const MatchResult m = match_columns(phi, hat, true);
  CHECK(std::abs(frobenius_error(m) - eps * std::sqrt(static_cast<double>(k))) < 1e-9);
  // equals the direct norm for the returned permutation and signs
  Matrix aligned(8, k);
  for (Eigen::Index i = 0; i < k; ++i)
    aligned.col(i) = m.signs[static_cast<std::size_t>(i)] * hat.col(m.permutation[static_cast<std::size_t>(i)]);
  CHECK(std::abs((phi - aligned).norm() - frobenius_error(m)) < 1e-12);
}

TEST_CASE("invariance under column permutation and sign of the estimate") {
  auto g = oracle::rng(4);
  const Matrix phi = oracle::gaussian(g, 7, 6);
  const Matrix hat = phi + 0.3 * oracle::gaussian(g, 7, 6);
  const double base = frobenius_error(match_columns(phi, hat, true));
  std::vector<int> order(6);
  std::iota(order.begin(), order.end(), 0);
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(order.begin(), order.end(), g);
    Matrix shuffled(7, 6);
    for (int j = 0; j < 6; ++j) shuffled.col(j) = (g() % 2 ? 1.0 : -1.0) * hat.col(order[static_cast<std::size_t>(j)]);
    CHECK(frobenius_error(match_columns(phi, shuffled, true)) == doctest::Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("Hungarian assignment beats greedy") {
  // greedy takes (0,0) at cost 1 and is then forced into (1,1) at cost 100
  Matrix cost(2, 2);
  cost << 1, 2, 3, 100;
  CHECK(hungarian(cost) == std::vector<int>{1, 0});

  auto g = oracle::rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix c = oracle::uniform(g, 36, 0.0, 1.0).reshaped(6, 6);
    std::vector<int> perm(6);
    std::iota(perm.begin(), perm.end(), 0);
    double best = 1e300;
    do {
      double total = 0;
      for (int i = 0; i < 6; ++i) total += c(i, perm[static_cast<std::size_t>(i)]);
      best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
    const std::vector<int> h = hungarian(c);
    double total = 0;
    for (int i = 0; i < 6; ++i) total += c(i, h[static_cast<std::size_t>(i)]);
    CHECK(total == doctest::Approx(best).epsilon(1e-12));
  }
  CHECK_THROWS_AS(hungarian(Matrix::Zero(2, 3)), DimensionError);
  CHECK_THROWS_AS(match_columns(Matrix::Zero(3, 2), Matrix::Zero(3, 3), true), DimensionError);
}

TEST_CASE("stage timer") {
  StageTimer t;
  t.begin("a");
  std::this_thread::sleep_for(std::chrono::milliseconds(20));
  t.begin("b");
  std::this_thread::sleep_for(std::chrono::milliseconds(10));
  t.begin("a");
  std::this_thread::sleep_for(std::chrono::milliseconds(5));
  t.end();
  REQUIRE(t.stages().size() == 2);
  CHECK(t.stages()[0].first == "a");
  CHECK(t.stage_ms("a") >= 25.0);
  CHECK(t.stage_ms("b") >= 10.0);
  CHECK(t.stage_ms("missing") == 0.0);
  CHECK(t.sum_ms() <= t.elapsed_ms());
  CHECK(t.sum_ms() >= 0.95 * t.elapsed_ms());
}

}  // TEST_SUITE
