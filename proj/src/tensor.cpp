#include "specbnp/tensor.hpp"

#include "specbnp/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

namespace specbnp {
namespace {

std::size_t product(const std::vector<std::size_t>& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string dims_string(const std::vector<std::size_t>& dims) {
  std::string s = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + ")";
}

// Advances a row-major multi-index; returns false after the last index.
bool next_index(std::vector<std::size_t>& idx, const std::vector<std::size_t>& dims) {
  for (std::size_t m = dims.size(); m-- > 0;) {
    if (++idx[m] < dims[m]) return true;
    idx[m] = 0;
  }
  return false;
}

// out(pre, r, post) = Σ_j a(r, j) in(pre, j, post)
DenseTensor mode_product(const DenseTensor& in, int mode, const Matrix& a) {
  const auto& dims = in.dims();
  const std::size_t n = dims[static_cast<std::size_t>(mode)];
  std::size_t pre = 1, post = 1;
  for (int m = 0; m < mode; ++m) pre *= dims[static_cast<std::size_t>(m)];
  for (std::size_t m = static_cast<std::size_t>(mode) + 1; m < dims.size(); ++m) post *= dims[m];
  const auto rows = static_cast<std::size_t>(a.rows());

  std::vector<std::size_t> out_dims = dims;
  out_dims[static_cast<std::size_t>(mode)] = rows;
  DenseTensor out(out_dims);
  auto src = in.data();
  auto dst = out.data();
  for (std::size_t p = 0; p < pre; ++p) {
    for (std::size_t r = 0; r < rows; ++r) {
      double* o = dst.data() + (p * rows + r) * post;
      for (std::size_t j = 0; j < n; ++j) {
        const double c = a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
        const double* s = src.data() + (p * n + j) * post;
        for (std::size_t q = 0; q < post; ++q) o[q] += c * s[q];
      }
    }
  }
  return out;
}

using Perm = std::array<int, 4>;

std::vector<Perm> placements(int order, int multiplicity) {
  if (order == 2 && multiplicity == 2) return {{0, 1}, {1, 0}};
  if (order == 3 && multiplicity == 3) return {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}};
  if (order == 3 && multiplicity == 6)
    return {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  if (order == 4 && multiplicity == 3) return {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2}};
  if (order == 4 && multiplicity == 4)
    return {{0, 1, 2, 3}, {0, 1, 3, 2}, {0, 2, 3, 1}, {1, 2, 3, 0}};
  if (order == 4 && multiplicity == 6)
    return {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2},
            {1, 2, 0, 3}, {1, 3, 0, 2}, {2, 3, 0, 1}};
  throw InputError("symmetrize: unsupported (order " + std::to_string(order) +
                   ", multiplicity " + std::to_string(multiplicity) + ")");
}

}  // namespace

DenseTensor::DenseTensor(std::vector<std::size_t> dims)
    : dims_(std::move(dims)), data_(product(dims_), 0.0) {
  for (std::size_t m = 0; m < dims_.size(); ++m)
    if (dims_[m] == 0) throw DimensionError("tensor dimension must be positive", static_cast<int>(m));
}

DenseTensor::DenseTensor(std::vector<std::size_t> dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  if (data_.size() != product(dims_))
    throw InputError("tensor data length " + std::to_string(data_.size()) +
                     " does not match dims " + dims_string(dims_));
}

DenseTensor DenseTensor::cube(std::size_t k, int order) {
  return DenseTensor(std::vector<std::size_t>(static_cast<std::size_t>(order), k));
}

DenseTensor DenseTensor::scalar(double value) { return DenseTensor({}, {value}); }

DenseTensor DenseTensor::from_vector(const Vector& v) {
  return DenseTensor({static_cast<std::size_t>(v.size())}, std::vector<double>(v.data(), v.data() + v.size()));
}

DenseTensor DenseTensor::from_matrix(const Matrix& m) {
  DenseTensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  Eigen::Map<RowMajorMatrix>(t.data_.data(), m.rows(), m.cols()) = m;
  return t;
}

DenseTensor DenseTensor::diagonal(const Vector& diag, int order) {
  const auto k = static_cast<std::size_t>(diag.size());
  DenseTensor t = cube(k, order);
  std::size_t stride = 0;
  for (int m = 0; m < order; ++m) stride = stride * k + 1;
  for (std::size_t i = 0; i < k; ++i) t.data_[i * stride] = diag(static_cast<Eigen::Index>(i));
  return t;
}

DenseTensor DenseTensor::outer_power(const Vector& v, int order) {
  DenseTensor t = from_vector(v);
  const DenseTensor base = t;
  for (int m = 1; m < order; ++m) t = outer(t, base);
  return t;
}

bool DenseTensor::is_cubic() const {
  return !dims_.empty() && std::all_of(dims_.begin(), dims_.end(), [&](std::size_t d) { return d == dims_[0]; });
}

std::size_t DenseTensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != dims_.size())
    throw InputError("index of length " + std::to_string(index.size()) + " for order-" +
                     std::to_string(dims_.size()) + " tensor");
  std::size_t off = 0;
  for (std::size_t m = 0; m < dims_.size(); ++m) {
    if (index[m] >= dims_[m]) throw DimensionError("index out of range", static_cast<int>(m));
    off = off * dims_[m] + index[m];
  }
  return off;
}

double DenseTensor::scalar_value() const {
  if (data_.size() != 1) throw InputError("tensor of dims " + dims_string(dims_) + " is not a scalar");
  return data_[0];
}

Vector DenseTensor::to_vector() const {
  if (order() != 1) throw InputError("to_vector on order-" + std::to_string(order()) + " tensor");
  return Eigen::Map<const Vector>(data_.data(), static_cast<Eigen::Index>(data_.size()));
}

Matrix DenseTensor::to_matrix() const { return matrix_view(); }

Eigen::Map<const RowMajorMatrix> DenseTensor::matrix_view() const {
  if (order() != 2) throw InputError("matrix view of order-" + std::to_string(order()) + " tensor");
  return Eigen::Map<const RowMajorMatrix>(data_.data(), static_cast<Eigen::Index>(dims_[0]),
                                          static_cast<Eigen::Index>(dims_[1]));
}

void DenseTensor::require_same_shape(const DenseTensor& other, const char* op) const {
  if (dims_ != other.dims_)
    throw InputError(std::string(op) + ": shape " + dims_string(dims_) + " vs " + dims_string(other.dims_));
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& other) { return axpy(1.0, other); }
DenseTensor& DenseTensor::operator-=(const DenseTensor& other) { return axpy(-1.0, other); }

DenseTensor& DenseTensor::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

DenseTensor& DenseTensor::axpy(double s, const DenseTensor& other) {
  require_same_shape(other, "axpy");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
  return *this;
}

double DenseTensor::frobenius_norm() const {
  double s = 0.0;
  for (double x : data_) s += x * x;
  return std::sqrt(s);
}

double DenseTensor::max_abs() const {
  double m = 0.0;
  for (double x : data_) m = std::max(m, std::abs(x));
  return m;
}

DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }
DenseTensor operator*(double s, DenseTensor a) { return a *= s; }

DenseTensor outer(const DenseTensor& a, const DenseTensor& b) {
  std::vector<std::size_t> dims = a.dims();
  dims.insert(dims.end(), b.dims().begin(), b.dims().end());
  DenseTensor out(dims);
  auto o = out.data();
  auto x = a.data();
  auto y = b.data();
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) o[i * y.size() + j] = x[i] * y[j];
  return out;
}

DenseTensor outer(const DenseTensor& a, const DenseTensor& b, const DenseTensor& c) {
  return outer(outer(a, b), c);
}

DenseTensor contract(const DenseTensor& m, std::span<const std::optional<Matrix>> mats) {
  if (static_cast<int>(mats.size()) != m.order())
    throw InputError("contract: " + std::to_string(mats.size()) + " matrices for order-" +
                     std::to_string(m.order()) + " tensor");
  std::vector<bool> reduced(mats.size(), false);
  for (std::size_t i = 0; i < mats.size(); ++i) {
    if (!mats[i]) continue;
    if (static_cast<std::size_t>(mats[i]->cols()) != m.dim(static_cast<int>(i)))
      throw DimensionError("contract: matrix has " + std::to_string(mats[i]->cols()) +
                               " columns, tensor mode has " + std::to_string(m.dim(static_cast<int>(i))),
                           static_cast<int>(i));
    reduced[i] = mats[i]->rows() == 1;
  }
  // Trailing modes first: contracting the contiguous mode shrinks the work for the rest.
  DenseTensor out = m;
  for (std::size_t i = mats.size(); i-- > 0;)
    if (mats[i]) out = mode_product(out, static_cast<int>(i), *mats[i]);

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < mats.size(); ++i)
    if (!reduced[i]) kept.push_back(out.dim(static_cast<int>(i)));
  if (kept.size() == out.dims().size()) return out;
  auto data = out.data();
  return DenseTensor(kept, std::vector<double>(data.begin(), data.end()));
}

DenseTensor contract(const DenseTensor& m, std::initializer_list<std::optional<Matrix>> mats) {
  return contract(m, std::span<const std::optional<Matrix>>(mats.begin(), mats.size()));
}

DenseTensor contract_all(const DenseTensor& m, const Matrix& a) {
  std::vector<std::optional<Matrix>> mats(static_cast<std::size_t>(m.order()), a);
  return contract(m, mats);
}

DenseTensor symmetrize(const DenseTensor& a, int multiplicity) {
  const auto perms = placements(a.order(), multiplicity);
  if (!a.is_cubic()) throw InputError("symmetrize: tensor is not cubic");
  const auto order = static_cast<std::size_t>(a.order());
  DenseTensor out(a.dims());
  std::vector<std::size_t> idx(order, 0), src(order, 0);
  std::size_t flat = 0;
  do {
    double s = 0.0;
    for (const Perm& p : perms) {
      for (std::size_t m = 0; m < order; ++m) src[m] = idx[static_cast<std::size_t>(p[m])];
      s += a.at(src);
    }
    out.data()[flat++] = s;
  } while (next_index(idx, a.dims()));
  return out;
}

double max_asymmetry(const DenseTensor& a) {
  if (a.order() <= 1) return 0.0;
  if (!a.is_cubic()) throw InputError("max_asymmetry: tensor is not cubic");
  const auto order = static_cast<std::size_t>(a.order());
  std::vector<std::size_t> idx(order, 0), perm(order), src(order);
  double worst = 0.0;
  do {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    const double v = a.at(idx);
    while (std::next_permutation(perm.begin(), perm.end())) {
      for (std::size_t m = 0; m < order; ++m) src[m] = idx[perm[m]];
      worst = std::max(worst, std::abs(v - a.at(src)));
    }
  } while (next_index(idx, a.dims()));
  return worst;
}

Matrix mode1_unfold(const DenseTensor& t3) {
  if (t3.order() != 3 || !t3.is_cubic()) throw InputError("mode1_unfold: expected a cubic order-3 tensor");
  return mode_unfold(t3, 0);
}

DenseTensor refold_mode1(const Matrix& unfolded) {
  const auto k = static_cast<std::size_t>(unfolded.rows());
  if (static_cast<std::size_t>(unfolded.cols()) != k * k)
    throw InputError("refold_mode1: expected a k × k² matrix");
  DenseTensor t = DenseTensor::cube(k, 3);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t l = 0; l < k; ++l)
        t(i, j, l) = unfolded(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(l * k + j));
  return t;
}

Matrix mode_unfold(const DenseTensor& t, int mode) {
  if (!t.is_cubic()) throw InputError("mode_unfold: tensor is not cubic");
  if (mode < 0 || mode >= t.order()) throw DimensionError("mode_unfold: no such mode", mode);
  const auto k = t.dim(0);
  const auto order = static_cast<std::size_t>(t.order());
  std::size_t cols = 1;
  for (std::size_t m = 1; m < order; ++m) cols *= k;
  Matrix out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(cols));
  std::vector<std::size_t> idx(order, 0);
  std::size_t flat = 0;
  do {
    std::size_t col = 0;
    for (std::size_t m = order; m-- > 0;)
      if (static_cast<int>(m) != mode) col = col * k + idx[m];
    out(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(mode)]), static_cast<Eigen::Index>(col)) =
        t.data()[flat++];
  } while (next_index(idx, t.dims()));
  return out;
}

Matrix khatri_rao(const Matrix& v, const Matrix& w) {
  if (v.cols() != w.cols())
    throw DimensionError("khatri_rao: column counts " + std::to_string(v.cols()) + " and " +
                             std::to_string(w.cols()) + " differ",
                         1);
  Matrix out(v.rows() * w.rows(), v.cols());
  for (Eigen::Index c = 0; c < v.cols(); ++c)
    for (Eigen::Index a = 0; a < v.rows(); ++a)
      out.col(c).segment(a * w.rows(), w.rows()) = v(a, c) * w.col(c);
  return out;
}

Vector tensor_apply(const DenseTensor& s, const Vector& u) {
  if (!s.is_cubic() || s.order() < 2) throw InputError("tensor_apply: expected a cubic tensor of order >= 2");
  if (static_cast<std::size_t>(u.size()) != s.dim(0))
    throw DimensionError("tensor_apply: vector length " + std::to_string(u.size()) + " vs dimension " +
                             std::to_string(s.dim(0)),
                         1);
  std::vector<std::optional<Matrix>> mats(static_cast<std::size_t>(s.order()), Matrix(u.transpose()));
  mats[0].reset();
  return contract(s, mats).to_vector();
}

double tensor_form(const DenseTensor& s, const Vector& u) { return u.dot(tensor_apply(s, u)); }

}  // namespace specbnp
