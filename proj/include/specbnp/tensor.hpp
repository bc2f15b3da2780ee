#pragma once

// Dense multilinear algebra over row-major tensors.

#include <Eigen/Dense>

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

namespace specbnp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Order-r array of doubles with explicit dimensions, stored row-major
/// (last index fastest). Order 0 is a scalar with a single entry.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(std::vector<std::size_t> dims);
  DenseTensor(std::vector<std::size_t> dims, std::vector<double> data);

  static DenseTensor cube(std::size_t k, int order);
  static DenseTensor scalar(double value);
  static DenseTensor from_vector(const Vector& v);
  static DenseTensor from_matrix(const Matrix& m);
  /// Order-r tensor with `diag` on the superdiagonal i = j = ... and zero elsewhere.
  static DenseTensor diagonal(const Vector& diag, int order);
  /// v ⊗ v ⊗ ... ⊗ v (r factors).
  static DenseTensor outer_power(const Vector& v, int order);

  int order() const { return static_cast<int>(dims_.size()); }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t dim(int mode) const { return dims_.at(static_cast<std::size_t>(mode)); }
  std::size_t size() const { return data_.size(); }
  bool is_cubic() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  std::size_t offset(std::span<const std::size_t> index) const;
  double& at(std::span<const std::size_t> index) { return data_[offset(index)]; }
  double at(std::span<const std::size_t> index) const { return data_[offset(index)]; }

  template <typename... I>
  double& operator()(I... idx) {
    const std::size_t index[] = {static_cast<std::size_t>(idx)...};
    return at(std::span<const std::size_t>(index, sizeof...(I)));
  }
  template <typename... I>
  double operator()(I... idx) const {
    const std::size_t index[] = {static_cast<std::size_t>(idx)...};
    return at(std::span<const std::size_t>(index, sizeof...(I)));
  }

  double scalar_value() const;
  Vector to_vector() const;
  Matrix to_matrix() const;
  /// Zero-copy view of an order-2 tensor.
  Eigen::Map<const RowMajorMatrix> matrix_view() const;

  DenseTensor& operator+=(const DenseTensor& other);
  DenseTensor& operator-=(const DenseTensor& other);
  DenseTensor& operator*=(double s);
  /// this += s * other
  DenseTensor& axpy(double s, const DenseTensor& other);

  double frobenius_norm() const;
  double max_abs() const;

 private:
  void require_same_shape(const DenseTensor& other, const char* op) const;

  std::vector<std::size_t> dims_;
  std::vector<double> data_;
};

DenseTensor operator+(DenseTensor a, const DenseTensor& b);
DenseTensor operator-(DenseTensor a, const DenseTensor& b);
DenseTensor operator*(double s, DenseTensor a);

/// a ⊗ b; the output dims are the concatenation of the input dims.
DenseTensor outer(const DenseTensor& a, const DenseTensor& b);
DenseTensor outer(const DenseTensor& a, const DenseTensor& b, const DenseTensor& c);

/// Multilinear transform [T(M, A_1, ..., A_k)]_{i_1..i_k} = Σ_j M_{j_1..j_k} Π (A_m)_{i_m j_m}.
/// A missing entry is the identity on that mode. A 1×dims[m] matrix reduces the mode,
/// and reduced modes are dropped from the output.
DenseTensor contract(const DenseTensor& m, std::span<const std::optional<Matrix>> mats);
DenseTensor contract(const DenseTensor& m, std::initializer_list<std::optional<Matrix>> mats);
/// T(M, A, A, ..., A) with the same A on every mode.
DenseTensor contract_all(const DenseTensor& m, const Matrix& a);

/// Sums the tensor over a fixed family of index placements.
///
///   order 2, multiplicity 2: A_ij + A_ji
///   order 3, multiplicity 6: all 6 permutations
///   order 3, multiplicity 3: cyclic shifts A_ijk + A_jki + A_kij, for A = v ⊗ B or B ⊗ v
///                            with B symmetric
///   order 4, multiplicity 3: the 3 pairings of a 2+2 split, for A = B ⊗ C with B, C
///                            symmetric and B ⊗ C = C ⊗ B (e.g. S2 ⊗ S2, 1 ⊗ 1)
///   order 4, multiplicity 6: the 6 placements of the leading pair of A = B ⊗ C with B, C
///                            symmetric matrices (e.g. S2 ⊗ S1 ⊗ S1, S2 ⊗ 1)
///   order 4, multiplicity 4: the 4 placements of the trailing mode of A = S3 ⊗ v
///
/// Each distinct placement is counted once.
DenseTensor symmetrize(const DenseTensor& a, int multiplicity);

/// Largest |A_i - A_σ(i)| over all indices and all permutations σ of the modes.
double max_asymmetry(const DenseTensor& a);

/// S_(1) = [S[:,:,0] S[:,:,1] ... S[:,:,k-1]] for a cubic order-3 tensor (k × k²).
Matrix mode1_unfold(const DenseTensor& t3);
DenseTensor refold_mode1(const Matrix& unfolded);

/// General mode-n unfolding of a cubic tensor: rows index mode n, columns run over the
/// remaining modes with the lowest remaining mode fastest.
Matrix mode_unfold(const DenseTensor& t, int mode);

/// Column-wise Kronecker product: column i is V_i ⊠ W_i.
Matrix khatri_rao(const Matrix& v, const Matrix& w);

/// T(S, 1, u, ..., u): contraction of a cubic tensor with u on all modes but the first.
Vector tensor_apply(const DenseTensor& s, const Vector& u);
/// T(S, u, ..., u).
double tensor_form(const DenseTensor& s, const Vector& u);

}  // namespace specbnp
