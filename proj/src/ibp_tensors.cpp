#include "specbnp/ibp_tensors.hpp"

#include "specbnp/error.hpp"
#include "specbnp/tensor_io.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>

namespace specbnp {
namespace {

const DenseTensor& require(const DenseTensor& t, int order, std::size_t d, const char* name) {
  if (t.order() != order || !t.is_cubic() || t.dim(0) != d)
    throw InputError(std::string(name) + ": expected an order-" + std::to_string(order) + " cube of side " +
                     std::to_string(d));
  return t;
}

DenseTensor as_tensor(const Vector& v) { return DenseTensor::from_vector(v); }
DenseTensor as_tensor(const Matrix& m) { return DenseTensor::from_matrix(m); }

Matrix metric_or_identity(const std::optional<Matrix>& g, std::size_t d) {
  if (!g) return Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  if (g->rows() != static_cast<Eigen::Index>(d) || g->cols() != static_cast<Eigen::Index>(d))
    throw DimensionError("noise metric must be " + std::to_string(d) + " × " + std::to_string(d), 0);
  return *g;
}

}  // namespace

void IbpParams::validate() const {
  if (pi.size() == 0) throw InputError("IBP parameters need at least one feature");
  for (Eigen::Index i = 0; i < pi.size(); ++i)
    if (!(pi(i) > 0.0 && pi(i) < 1.0))
      throw InputError("feature probability " + std::to_string(pi(i)) + " outside (0, 1)");
}

double ibp_s2_coefficient(double p) { return p - p * p; }
double ibp_s3_coefficient(double p) { return p - 3 * p * p + 2 * p * p * p; }
double ibp_s4_coefficient(double p) { return p - 7 * p * p + 12 * p * p * p - 6 * p * p * p * p; }

SymmetricTensorSet ibp_population_s(const IbpParams& params) {
  params.validate();
  const Vector& pi = params.pi;
  SymmetricTensorSet s;
  s.s1 = pi;
  s.s2 = pi.unaryExpr(&ibp_s2_coefficient).asDiagonal();
  s.s3 = DenseTensor::diagonal(pi.unaryExpr(&ibp_s3_coefficient), 3);
  s.s4 = DenseTensor::diagonal(pi.unaryExpr(&ibp_s4_coefficient), 4);
  s.m1 = Vector::Zero(pi.size());
  return s;
}

SymmetricTensorSet ibp_s_from_moments(const DenseTensor& m1, const DenseTensor& m2, const DenseTensor& m3,
                                      const DenseTensor& m4) {
  if (m1.order() != 1) throw InputError("ibp_s_from_moments: M1 must be a vector");
  const std::size_t k = m1.dim(0);
  require(m2, 2, k, "M2");
  require(m3, 3, k, "M3");
  require(m4, 4, k, "M4");
  // The noise-free linear-Gaussian construction is exactly this inversion.
  return lg_s_tensors(m1, m2, m3, m4, 0.0, Vector::Zero(static_cast<Eigen::Index>(k)), 0.0);
}

NoiseEstimate estimate_sigma2(const Vector& m1, const Matrix& m2, int k) {
  const Eigen::Index d = m1.size();
  if (m2.rows() != d || m2.cols() != d) throw DimensionError("estimate_sigma2: M2 shape vs M1 length", 0);
  if (k < 0) throw InputError("estimate_sigma2: negative K");
  if (d <= k)
    throw InputError("estimate_sigma2: dimension " + std::to_string(d) + " leaves no noise subspace for K=" +
                     std::to_string(k));
  Matrix cov = m2 - m1 * m1.transpose();
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  NoiseEstimate out;
  out.eigenvalues = eig.eigenvalues();
  out.sigma2 = std::max(0.0, out.eigenvalues(0));
  out.noise_basis = eig.eigenvectors().leftCols(d - k);
  return out;
}

AuxStats aux_stats(const SampleSet& x, const Vector& v) {
  if (v.size() != x.d()) throw DimensionError("aux_stats: v length vs sample dimension", 0);
  const Vector mean = x.rows().colwise().mean().transpose();
  const Vector proj = (x.rows().rowwise() - mean.transpose()) * v;
  AuxStats out;
  out.m1 = x.rows().transpose() * proj.array().square().matrix() / static_cast<double>(x.n());
  out.m4 = proj.array().pow(4).mean() / 3.0;
  return out;
}

AuxStats aux_stats_from_moments(const Vector& m1, const Matrix& m2, const DenseTensor& m3, const DenseTensor& m4,
                                const Vector& v) {
  const auto d = static_cast<std::size_t>(m1.size());
  if (v.size() != m1.size()) throw DimensionError("aux_stats_from_moments: v length", 0);
  require(m3, 3, d, "M3");
  require(m4, 4, d, "M4");
  const Matrix vt = v.transpose();
  const double a = v.dot(m1);               // E[s], s = vᵀx
  const double e2 = v.dot(m2 * v);          // E[s²]
  const double e3 = contract_all(m3, vt).scalar_value();
  const double e4 = contract_all(m4, vt).scalar_value();
  AuxStats out;
  // E[x (s - a)²] = E[x s²] - 2a E[x s] + a² E[x]
  out.m1 = contract(m3, {std::nullopt, vt, vt}).to_vector() - 2.0 * a * (m2 * v) + a * a * m1;
  out.m4 = (e4 - 4 * a * e3 + 6 * a * a * e2 - 3 * a * a * a * a) / 3.0;
  return out;
}

SymmetricTensorSet lg_s_tensors(const DenseTensor& m1, const DenseTensor& m2, const DenseTensor& m3,
                                const DenseTensor& m4, double sigma2, const Vector& aux_m1, double aux_m4,
                                const std::optional<Matrix>& noise_metric) {
  if (m1.order() != 1) throw InputError("lg_s_tensors: M1 must be a vector");
  const std::size_t d = m1.dim(0);
  require(m2, 2, d, "M2");
  require(m3, 3, d, "M3");
  require(m4, 4, d, "M4");
  if (static_cast<std::size_t>(aux_m1.size()) != d) throw DimensionError("lg_s_tensors: m1 length", 0);
  const Matrix g = metric_or_identity(noise_metric, d);
  const DenseTensor gt = as_tensor(g);

  SymmetricTensorSet s;
  s.sigma2 = sigma2;
  s.m1 = aux_m1;
  s.m4 = aux_m4;
  const DenseTensor& s1 = m1;
  s.s1 = s1.to_vector();
  const DenseTensor s1s1 = outer(s1, s1);

  DenseTensor s2 = m2 - s1s1;
  s2.axpy(-sigma2, gt);
  s.s2 = s2.to_matrix();

  DenseTensor s3 = m3 - outer(s1s1, s1);
  s3 -= symmetrize(outer(s1, s2), 3);
  s3 -= symmetrize(outer(as_tensor(aux_m1), gt), 3);

  DenseTensor s4 = m4 - outer(s1s1, s1s1);
  s4 -= symmetrize(outer(s2, s1s1), 6);
  s4 -= symmetrize(outer(s2, s2), 3);
  s4 -= symmetrize(outer(s3, s1), 4);
  // E[y yᵀ] for the noise-free signal y = Φz is S2 + S1 ⊗ S1, not S2 alone.
  s4.axpy(-sigma2, symmetrize(outer(s2 + s1s1, gt), 6));
  s4.axpy(-aux_m4, symmetrize(outer(gt, gt), 3));

  s.s3 = std::move(s3);
  s.s4 = std::move(s4);
  return s;
}

IsfaPrior parse_isfa_prior(const std::string& name) {
  if (name == "gaussian" || name == "gauss") return IsfaPrior::Gaussian;
  if (name == "laplace") return IsfaPrior::Laplace;
  throw InputError("unknown isFA prior \"" + name + "\" (expected gaussian or laplace)");
}

const char* to_string(IsfaPrior prior) { return prior == IsfaPrior::Gaussian ? "gaussian" : "laplace"; }

double isfa_c(IsfaPrior prior) { return prior == IsfaPrior::Gaussian ? 1.0 : 2.0; }

double isfa_f(IsfaPrior prior, double pi) {
  // E[y⁴]: 3 for N(0,1), 24 for Laplace(0,1)
  const double y4 = prior == IsfaPrior::Gaussian ? 3.0 : 24.0;
  const double c = isfa_c(prior);
  return y4 * pi - 3.0 * c * c * pi * pi;
}

SymmetricTensorSet isfa_s_tensors(const DenseTensor& m2, const DenseTensor& m4, double sigma2, double aux_m4,
                                  IsfaPrior prior, const std::optional<Matrix>& noise_metric) {
  if (prior != IsfaPrior::Gaussian && prior != IsfaPrior::Laplace) throw InputError("unknown isFA prior");
  if (m2.order() != 2 || !m2.is_cubic()) throw InputError("isfa_s_tensors: M2 must be square");
  const std::size_t d = m2.dim(0);
  require(m4, 4, d, "M4");
  const DenseTensor gt = as_tensor(metric_or_identity(noise_metric, d));

  SymmetricTensorSet s;
  s.sigma2 = sigma2;
  s.m4 = aux_m4;
  s.m1 = Vector::Zero(static_cast<Eigen::Index>(d));
  DenseTensor s2 = m2;
  s2.axpy(-sigma2, gt);
  DenseTensor s4 = m4 - symmetrize(outer(s2, s2), 3);
  s4.axpy(-sigma2, symmetrize(outer(s2, gt), 6));
  s4.axpy(-aux_m4, symmetrize(outer(gt, gt), 3));
  s.s2 = s2.to_matrix();
  s.s4 = std::move(s4);
  return s;
}

void save_tensor_set(const std::filesystem::path& dir, const SymmetricTensorSet& set) {
  std::filesystem::create_directories(dir);
  nlohmann::json files = nlohmann::json::object();
  auto put = [&](const char* name, const DenseTensor& t) {
    const std::string file = std::string(name) + ".txt";
    save_tensor(dir / file, t);
    files[name] = file;
  };
  if (set.s1) put("s1", as_tensor(*set.s1));
  put("s2", as_tensor(set.s2));
  if (set.s3) put("s3", *set.s3);
  if (set.s4) put("s4", *set.s4);
  if (set.m1.size() > 0) put("m1", as_tensor(set.m1));
  nlohmann::json manifest = {{"sigma2", set.sigma2}, {"m4", set.m4}, {"files", files}};
  std::ofstream f(dir / "manifest.json");
  if (!f) throw InputError("cannot write " + (dir / "manifest.json").string());
  f << manifest.dump(2) << '\n';
}

SymmetricTensorSet load_tensor_set(const std::filesystem::path& dir) {
  std::ifstream f(dir / "manifest.json");
  if (!f) throw InputError("cannot read " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed tensor manifest: ") + e.what());
  }
  SymmetricTensorSet set;
  set.sigma2 = manifest.value("sigma2", 0.0);
  set.m4 = manifest.value("m4", 0.0);
  const auto& files = manifest.at("files");
  auto get = [&](const char* name) -> std::optional<DenseTensor> {
    if (!files.contains(name)) return std::nullopt;
    return load_tensor(dir / files.at(name).get<std::string>());
  };
  if (auto t = get("s1")) set.s1 = t->to_vector();
  auto s2 = get("s2");
  if (!s2) throw InputError("tensor set without s2");
  set.s2 = s2->to_matrix();
  set.s3 = get("s3");
  set.s4 = get("s4");
  if (auto t = get("m1")) set.m1 = t->to_vector();
  return set;
}

}  // namespace specbnp
