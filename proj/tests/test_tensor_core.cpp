#include "doctest.h"
#include "oracles.hpp"

#include "specbnp/error.hpp"
#include "specbnp/tensor.hpp"
#include "specbnp/tensor_io.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

using namespace specbnp;

TEST_SUITE("tensor_core") {

TEST_CASE("contract with two matrices is a pair of matrix products") {
  auto g = oracle::rng(1);
  const Matrix m2 = oracle::gaussian(g, 3, 3);
  const Matrix a = oracle::gaussian(g, 2, 3);
  const Matrix b = oracle::gaussian(g, 2, 3);
  const DenseTensor out = contract(DenseTensor::from_matrix(m2), {a, b});
  CHECK((out.to_matrix() - a * m2 * b.transpose()).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("contract with identities or omitted entries is a no-op") {
  auto g = oracle::rng(2);
  const DenseTensor m = oracle::random_tensor(g, 3, 3);
  const Matrix id = Matrix::Identity(3, 3);
  CHECK(oracle::max_diff(contract(m, {id, id, id}), m) == 0.0);
  CHECK(oracle::max_diff(contract(m, {std::nullopt, std::nullopt, std::nullopt}), m) == 0.0);
}

TEST_CASE("contracting diag(1, 2) with u = v = (1, 1) gives 3") {
  const DenseTensor d = DenseTensor::diagonal(Vector::LinSpaced(2, 1, 2), 2);
  const Matrix ones = Matrix::Ones(1, 2);
  const DenseTensor s = contract(d, {ones, ones});
  CHECK(s.order() == 0);
  CHECK(s.scalar_value() == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("contract agrees with the full multilinear sum") {
  auto g = oracle::rng(3);
  const DenseTensor m({3, 4, 2}, std::vector<double>(24));
  DenseTensor t = m;
  std::normal_distribution<double> n;
  for (double& x : t.data()) x = n(g);
  const std::vector<Matrix> a = {oracle::gaussian(g, 2, 3), oracle::gaussian(g, 5, 4), oracle::gaussian(g, 3, 2)};
  const DenseTensor fast = contract(t, {a[0], a[1], a[2]});
  CHECK(fast.dims() == std::vector<std::size_t>{2, 5, 3});
  CHECK(oracle::max_diff(fast, oracle::naive_contract(t, a)) < 1e-12);
}

TEST_CASE("reduced modes are dropped") {
  auto g = oracle::rng(4);
  const DenseTensor t = oracle::random_tensor(g, 3, 3);
  const Matrix u = oracle::gaussian(g, 1, 3);
  const DenseTensor out = contract(t, {std::nullopt, u, std::nullopt});
  CHECK(out.dims() == std::vector<std::size_t>{3, 3});
}

TEST_CASE("a mismatched matrix is rejected with its mode") {
  auto g = oracle::rng(5);
  const DenseTensor t = oracle::random_tensor(g, 3, 3);
  try {
    contract(t, {std::nullopt, std::nullopt, Matrix::Ones(2, 4)});
    FAIL("expected a dimension error");
  } catch (const DimensionError& e) {
    CHECK(e.mode() == 2);
  }
}

TEST_CASE("contract is multilinear and composes") {
  auto g = oracle::rng(6);
  const DenseTensor a = oracle::random_tensor(g, 4, 3);
  const DenseTensor b = oracle::random_tensor(g, 4, 3);
  const Matrix x = oracle::gaussian(g, 3, 4);
  const DenseTensor lhs = contract_all(2.5 * a + (-1.5) * b, x);
  const DenseTensor rhs = 2.5 * contract_all(a, x) + (-1.5) * contract_all(b, x);
  CHECK(oracle::max_diff(lhs, rhs) < 1e-12);

  const Matrix p = oracle::gaussian(g, 5, 4);
  const Matrix q = oracle::gaussian(g, 2, 5);
  const DenseTensor twice = contract(contract(a, {p, std::nullopt, std::nullopt}), {q, std::nullopt, std::nullopt});
  const DenseTensor once = contract(a, {Matrix(q * p), std::nullopt, std::nullopt});
  CHECK(oracle::max_diff(twice, once) < 1e-12);
}

TEST_CASE("symm_3 of pi ⊗ diag(c)") {
  const Vector pi = (Vector(3) << 0.2, 0.5, 0.7).finished();
  const Vector c = (Vector(3) << 1.0, 2.0, 3.0).finished();
  const DenseTensor s = symmetrize(outer(DenseTensor::from_vector(pi), DenseTensor::diagonal(c, 2)), 3);
  CHECK(s(0, 1, 2) == 0.0);
  // at (i, i, j) only the placement pairing (i, i) with the diagonal factor survives
  CHECK(s(1, 1, 2) == doctest::Approx(c(1) * pi(2)).epsilon(1e-15));
  CHECK(s(1, 2, 1) == doctest::Approx(c(1) * pi(2)).epsilon(1e-15));
  CHECK(s(2, 1, 1) == doctest::Approx(c(1) * pi(2)).epsilon(1e-15));
  CHECK(s(1, 1, 1) == doctest::Approx(3 * c(1) * pi(1)).epsilon(1e-15));
}

TEST_CASE("symm_6 of v ⊗ B with symmetric B is twice symm_3") {
  auto g = oracle::rng(7);
  const Matrix r = oracle::gaussian(g, 4, 4);
  const DenseTensor b = DenseTensor::from_matrix(r + r.transpose());
  const DenseTensor v = DenseTensor::from_vector(oracle::gaussian(g, 4, 1).col(0));
  const DenseTensor a = outer(v, b);
  CHECK(oracle::max_diff(symmetrize(a, 6), 2.0 * symmetrize(a, 3)) < 1e-12);
}

TEST_CASE("every symmetrization of a partially symmetric input is fully symmetric") {
  auto g = oracle::rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix r1 = oracle::gaussian(g, 3, 3), r2 = oracle::gaussian(g, 3, 3);
    const DenseTensor b = DenseTensor::from_matrix(r1 + r1.transpose());
    const DenseTensor c = DenseTensor::from_matrix(r2 + r2.transpose());
    const DenseTensor v = DenseTensor::from_vector(oracle::gaussian(g, 3, 1).col(0));
    const DenseTensor w = DenseTensor::from_vector(oracle::gaussian(g, 3, 1).col(0));
    DenseTensor s3 = symmetrize(oracle::random_tensor(g, 3, 3), 6);

    CHECK(max_asymmetry(symmetrize(outer(b, v), 3)) < 1e-12);
    CHECK(max_asymmetry(symmetrize(outer(v, b), 3)) < 1e-12);
    CHECK(max_asymmetry(symmetrize(oracle::random_tensor(g, 3, 3), 6)) < 1e-12);
    CHECK(max_asymmetry(symmetrize(outer(b, b), 3)) < 1e-12);
    CHECK(max_asymmetry(symmetrize(outer(b, outer(v, v)), 6)) < 1e-12);
    CHECK(max_asymmetry(symmetrize(outer(b, c), 6)) < 1e-12);
    CHECK(max_asymmetry(symmetrize(outer(s3, w), 4)) < 1e-12);
    CHECK(max_asymmetry(symmetrize(DenseTensor::from_matrix(r1), 2)) < 1e-12);
  }
}

TEST_CASE("symm_6 placements reproduce the expansion of E[(a+b)^{⊗4}]") {
  // For independent zero-mean a, b: E[(a+b)^{⊗4}] = E[a^{⊗4}] + E[b^{⊗4}] + symm_6[E aa ⊗ E bb]
  // Checked with a, b uniform on {±u}, {±w}.
  auto g = oracle::rng(9);
  const Vector u = oracle::gaussian(g, 3, 1).col(0), w = oracle::gaussian(g, 3, 1).col(0);
  DenseTensor direct = DenseTensor::cube(3, 4);
  for (double su : {-1.0, 1.0})
    for (double sw : {-1.0, 1.0}) direct.axpy(0.25, DenseTensor::outer_power(su * u + sw * w, 4));
  DenseTensor expanded = DenseTensor::outer_power(u, 4) + DenseTensor::outer_power(w, 4);
  expanded += symmetrize(outer(DenseTensor::outer_power(u, 2), DenseTensor::outer_power(w, 2)), 6);
  CHECK(oracle::max_diff(direct, expanded) < 1e-12);
}

TEST_CASE("unsupported symmetrizations are rejected") {
  CHECK_THROWS_AS(symmetrize(DenseTensor::cube(2, 3), 4), InputError);
  CHECK_THROWS_AS(symmetrize(DenseTensor::cube(2, 2), 3), InputError);
}

TEST_CASE("mode-1 unfolding") {
  const DenseTensor d = DenseTensor::diagonal(Vector::LinSpaced(2, 1, 2), 3);
  Matrix expected(2, 4);
  expected << 1, 0, 0, 0, 0, 0, 0, 2;
  CHECK(mode1_unfold(d) == expected);

  auto g = oracle::rng(10);
  const DenseTensor t = oracle::random_tensor(g, 3, 3);
  CHECK(oracle::max_diff(refold_mode1(mode1_unfold(t)), t) == 0.0);
  // column block t is the slice S[:, :, t]
  const Matrix u = mode1_unfold(t);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int l = 0; l < 3; ++l) CHECK(u(i, l * 3 + j) == t(i, j, l));

  const Vector v = oracle::gaussian(g, 3, 1).col(0);
  const Matrix rank1 = mode1_unfold(DenseTensor::outer_power(v, 3));
  CHECK((rank1 - v * khatri_rao(v, v).transpose()).cwiseAbs().maxCoeff() < 1e-14);
  CHECK_THROWS_AS(mode1_unfold(DenseTensor({2, 3, 2})), InputError);
}

TEST_CASE("Khatri-Rao product") {
  const Matrix id = Matrix::Identity(2, 2);
  const Matrix kr = khatri_rao(id, id);
  CHECK(kr.col(0) == (Vector(4) << 1, 0, 0, 0).finished());
  CHECK(kr.col(1) == (Vector(4) << 0, 0, 0, 1).finished());
  const Vector v = (Vector(2) << 1, 2).finished();
  CHECK(khatri_rao(v, v).col(0) == (Vector(4) << 1, 2, 2, 4).finished());
  CHECK_THROWS_AS(khatri_rao(Matrix::Ones(2, 2), Matrix::Ones(2, 3)), DimensionError);

  auto g = oracle::rng(11);
  const Matrix vv = oracle::gaussian(g, 3, 2);
  const Vector lambda = oracle::gaussian(g, 2, 1).col(0);
  const Matrix lhs = mode1_unfold(oracle::cp_tensor(lambda, vv, 3));
  const Matrix rhs = vv * lambda.asDiagonal() * khatri_rao(vv, vv).transpose();
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("general mode unfolding keeps the lowest remaining mode fastest") {
  auto g = oracle::rng(12);
  const DenseTensor t = oracle::random_tensor(g, 3, 4);
  const Matrix u = mode_unfold(t, 2);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c)
        for (int d = 0; d < 3; ++d) CHECK(u(c, a + 3 * b + 9 * d) == t(a, b, c, d));
}

TEST_CASE("tensor_apply") {
  const DenseTensor d = DenseTensor::diagonal((Vector(2) << 2, 1).finished(), 3);
  const Vector e1 = (Vector(2) << 1, 0).finished();
  CHECK((tensor_apply(d, e1) - (Vector(2) << 2, 0).finished()).norm() == 0.0);
  const Vector u = (Vector(2) << 1, 1).finished() / std::sqrt(2.0);
  CHECK((tensor_apply(d, u) - (Vector(2) << 1, 0.5).finished()).norm() < 1e-15);

  auto g = oracle::rng(13);
  const Matrix v = oracle::orthonormal(g, 5, 3);
  const Vector lambda = (Vector(3) << 3, 2, 1).finished();
  const DenseTensor s = oracle::cp_tensor(lambda, v, 3);
  const Vector w = oracle::gaussian(g, 5, 1).col(0);
  Vector expected = Vector::Zero(5);
  for (int i = 0; i < 3; ++i) expected += lambda(i) * std::pow(v.col(i).dot(w), 2) * v.col(i);
  CHECK((tensor_apply(s, w) - expected).norm() < 1e-12);

  const Matrix wt = w.transpose();
  const Vector via_contract = contract(s, {std::nullopt, wt, wt}).to_vector();
  CHECK(tensor_apply(s, w) == via_contract);
  CHECK_THROWS_AS(tensor_apply(s, Vector::Ones(4)), DimensionError);
}

TEST_CASE("matrix and tensor text files round-trip exactly") {
  auto g = oracle::rng(14);
  const Matrix m = oracle::gaussian(g, 3, 5);
  std::stringstream ss;
  write_matrix(ss, m);
  CHECK(read_matrix(ss) == m);

  const DenseTensor t = oracle::random_tensor(g, 3, 4);
  std::stringstream st;
  write_tensor(st, t);
  const DenseTensor back = read_tensor(st);
  CHECK(back.dims() == t.dims());
  CHECK(oracle::max_diff(back, t) == 0.0);

  std::stringstream bad("2 2\n1 2\n3\n");
  CHECK_THROWS_AS(read_matrix(bad), InputError);
}

}  // TEST_SUITE
