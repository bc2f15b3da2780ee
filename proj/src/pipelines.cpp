#include "specbnp/pipelines.hpp"

#include "specbnp/error.hpp"
#include "specbnp/evaluation.hpp"
#include "specbnp/log.hpp"
#include "specbnp/spectral_common.hpp"
#include "specbnp/tensor_io.hpp"
#include "random_streams.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <functional>

namespace specbnp {
namespace {

DenseTensor contract_moment(const RawMoments& m, const Matrix& w, int r) {
  switch (r) {
    case 1: return DenseTensor::from_vector(w.transpose() * m.m1);
    case 2: return DenseTensor::from_matrix(w.transpose() * m.m2 * w);
    case 3: return contract_all(m.m3, w.transpose());
    case 4: return contract_all(m.m4, w.transpose());
    default: throw InputError("moment order must be 1..4");
  }
}

// K from the data when not given, checked against the room left for a noise subspace.
int choose_rank(const Matrix& s2, const PipelineConfig& config, bool need_noise_subspace) {
  const auto d = static_cast<int>(s2.rows());
  int k = 0;
  if (config.k) {
    k = *config.k;
    if (k < 1) throw InputError("K must be positive");
  } else {
    if (d < 3) throw InputError("rank estimation needs dimension >= 3");
    k = estimate_rank_slope(s2, default_kprime(s2, config.kprime_guess), config.decomposition.seed, config.rank_gap).k;
    if (k == 0) throw NumericalError("no latent features: S2 has no positive spectrum");
  }
  if (need_noise_subspace && k >= d)
    throw InputError("K = " + std::to_string(k) + " leaves no noise subspace in dimension " + std::to_string(d));
  if (k > d) throw InputError("K = " + std::to_string(k) + " exceeds dimension " + std::to_string(d));
  return k;
}

// Orthonormal basis of a random p-dimensional slice of the covariance range.
std::optional<Matrix> projection_basis(const MomentSource& source, const PipelineConfig& config) {
  if (!config.projection_dim) return std::nullopt;
  const int p = *config.projection_dim;
  if (p < 2 || p >= source.dim())
    throw InputError("projection dimension must lie in [2, d), got " + std::to_string(p));
  const Vector m1 = source.mean();
  const Matrix cov = source.second() - m1 * m1.transpose();
  auto rng = detail::stream(config.decomposition.seed, 0x9e, 0);
  Matrix theta(cov.cols(), p);
  for (Eigen::Index j = 0; j < p; ++j) theta.col(j) = detail::random_gaussian(rng, cov.cols());
  Eigen::HouseholderQR<Matrix> qr(cov * theta);
  return Matrix(qr.householderQ() * Matrix::Identity(cov.rows(), p));
}

// Maps whitened directions back to the full space through the unprojected covariance:
// Φ_i = (cov - σ² I) Q W u_i for u_i = v_i / Z_i, since Φᵀ Q W = diag(Z)⁻¹ Vᵀ.
Matrix lift(const MomentSource& data, bool centered, double sigma2, const Matrix& q, const Matrix& w,
            const Matrix& u) {
  Matrix s2 = data.second();
  if (centered) {
    const Vector m1 = data.mean();
    s2 -= m1 * m1.transpose();
  }
  s2.diagonal().array() -= sigma2;
  return s2 * (q * (w * u));
}

}  // namespace

void save_raw_moments(const std::filesystem::path& dir, const RawMoments& m) {
  std::filesystem::create_directories(dir);
  save_tensor(dir / "m1.txt", DenseTensor::from_vector(m.m1));
  save_matrix(dir / "m2.txt", m.m2);
  save_tensor(dir / "m3.txt", m.m3);
  save_tensor(dir / "m4.txt", m.m4);
  std::ofstream f(dir / "manifest.json");
  if (!f) throw InputError("cannot write " + (dir / "manifest.json").string());
  f << nlohmann::json{{"kind", "raw_moments"}, {"dim", m.m1.size()}}.dump(2) << '\n';
}

RawMoments load_raw_moments(const std::filesystem::path& dir) {
  for (const char* f : {"m1.txt", "m2.txt", "m3.txt", "m4.txt"})
    if (!std::filesystem::exists(dir / f)) throw InputError("moment directory lacks " + (dir / f).string());
  RawMoments m;
  m.m1 = load_tensor(dir / "m1.txt").to_vector();
  m.m2 = load_matrix(dir / "m2.txt");
  m.m3 = load_tensor(dir / "m3.txt");
  m.m4 = load_tensor(dir / "m4.txt");
  ExactMoments check(m);  // validates shapes
  return m;
}

Vector SampleMoments::mean() const { return x_.rows().colwise().mean().transpose(); }

Matrix SampleMoments::second() const {
  return x_.rows().transpose() * x_.rows() / static_cast<double>(x_.n());
}

DenseTensor SampleMoments::whitened(const Matrix& w, int r) const {
  return whitened_moment(x_, w, r, std::nullopt, threads_);
}

AuxStats SampleMoments::aux(const Vector& v) const { return aux_stats(x_, v); }

ExactMoments::ExactMoments(RawMoments m) : m_(std::move(m)) {
  const auto d = static_cast<std::size_t>(m_.m1.size());
  if (m_.m2.rows() != m_.m1.size() || m_.m2.cols() != m_.m1.size()) throw DimensionError("M2 shape vs M1", 0);
  if (m_.m3.order() != 3 || !m_.m3.is_cubic() || m_.m3.dim(0) != d) throw DimensionError("M3 shape vs M1", 0);
  if (m_.m4.order() != 4 || !m_.m4.is_cubic() || m_.m4.dim(0) != d) throw DimensionError("M4 shape vs M1", 0);
}

DenseTensor ExactMoments::whitened(const Matrix& w, int r) const {
  if (w.rows() != dim()) throw DimensionError("whitener rows vs moment dimension", 0);
  return contract_moment(m_, w, r);
}

AuxStats ExactMoments::aux(const Vector& v) const { return aux_stats_from_moments(m_.m1, m_.m2, m_.m3, m_.m4, v); }

ProjectedMoments::ProjectedMoments(const MomentSource& inner, Matrix q) : inner_(inner), q_(std::move(q)) {
  if (q_.rows() != inner_.dim()) throw DimensionError("projection rows vs dimension", 0);
}

Vector ProjectedMoments::mean() const { return q_.transpose() * inner_.mean(); }
Matrix ProjectedMoments::second() const { return q_.transpose() * inner_.second() * q_; }
DenseTensor ProjectedMoments::whitened(const Matrix& w, int r) const { return inner_.whitened(q_ * w, r); }

AuxStats ProjectedMoments::aux(const Vector& v) const {
  AuxStats a = inner_.aux(q_ * v);
  a.m1 = q_.transpose() * a.m1;
  return a;
}

double f3(double pi) { return (1 - 2 * pi) / std::sqrt(pi - pi * pi); }
double f4(double pi) { return (6 * pi * pi - 6 * pi + 1) / (pi - pi * pi); }

double invert_f3(double lambda) {
  if (!std::isfinite(lambda)) throw NumericalError("invert_f3: non-finite eigenvalue");
  return 0.5 - lambda / (2 * std::sqrt(lambda * lambda + 4));
}

double invert_f4(double lambda) {
  if (!(lambda >= -2.0 && lambda < -1.0))
    throw NumericalError("fourth-order eigenvalue " + std::to_string(lambda) + " outside [-2, -1)");
  return 0.5 - 0.5 * std::sqrt((lambda + 2) / (lambda + 6));
}

IbpFit fit_ibp_linear_gaussian(const SampleSet& x, const PipelineConfig& config) {
  return fit_ibp_linear_gaussian(SampleMoments(x, config.decomposition.threads), config);
}

IbpFit fit_ibp_linear_gaussian(const MomentSource& data, const PipelineConfig& config) {
  config.decomposition.validate();
  StageTimer timer;
  IbpFit fit;

  timer.begin("projection");
  const std::optional<Matrix> q = projection_basis(data, config);
  std::optional<ProjectedMoments> projected;
  if (q) projected.emplace(data, *q);
  const MomentSource& source = projected ? static_cast<const MomentSource&>(*projected) : data;

  timer.begin("second_order");
  const Eigen::Index d = source.dim();
  const Vector m1 = source.mean();
  const Matrix m2 = source.second();
  const NoiseEstimate noise = estimate_sigma2(m1, m2, 0);
  fit.sigma2 = noise.sigma2;
  const Matrix s2 = m2 - m1 * m1.transpose() - fit.sigma2 * Matrix::Identity(d, d);
  fit.k = choose_rank(s2, config, true);
  const Whitener w = whiten(s2, fit.k, config.whiten_eps);

  timer.begin("higher_order");
  const AuxStats aux = source.aux(noise.noise_basis.col(0));
  const Matrix metric = w.w.transpose() * w.w;
  const SymmetricTensorSet s =
      lg_s_tensors(DenseTensor::from_vector(w.w.transpose() * m1), DenseTensor::from_matrix(w.w.transpose() * m2 * w.w),
                   source.whitened(w.w, 3), source.whitened(w.w, 4), fit.sigma2, w.w.transpose() * aux.m1, aux.m4, metric);

  timer.begin("decompose_order3");
  std::vector<EigenPair> pairs;
  for (const EigenPair& p : decompose(*s.s3, fit.k, config.decomposition))
    if (std::abs(p.value) > 1.0) pairs.push_back(p);
  fit.k1 = static_cast<int>(pairs.size());

  timer.begin("decompose_order4");
  std::vector<double> pis;
  DenseTensor w4 = *s.s4;
  for (const EigenPair& p : pairs) {
    pis.push_back(invert_f3(p.value));
    w4.axpy(-f4(pis.back()), DenseTensor::outer_power(p.vector, 4));
  }
  if (fit.k1 < fit.k) {
    for (EigenPair& p : decompose(w4, fit.k - fit.k1, config.decomposition)) {
      double lambda = p.value;
      if (!(lambda >= -2.0 && lambda < -1.0)) {
        fit.flags.push_back("fourth-order eigenvalue " + std::to_string(lambda) + " clamped into [-2, -1)");
        lambda = std::clamp(lambda, -2.0, std::nextafter(-1.0, -2.0));
      }
      pis.push_back(invert_f4(lambda));
      pairs.push_back(std::move(p));
    }
  }

  timer.begin("reconstruct");
  const auto k = static_cast<Eigen::Index>(pairs.size());
  Matrix base(d, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double p = pis[static_cast<std::size_t>(i)];
    base.col(i) = w.w_pinv.transpose() * pairs[static_cast<std::size_t>(i)].vector / std::sqrt(p - p * p);
  }
  // The tensors fix each column only up to (u, π) ~ (-u, 1 - π), plus a free sign on the
  // fourth-order branch. S1 = Σ π_i Φ_i picks the combination.
  const Vector a = base.colPivHouseholderQr().solve(m1);
  fit.phi.resize(d, k);
  fit.pi.resize(k);
  fit.eigenvalues.resize(k);
  Matrix u(fit.k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& pair = pairs[static_cast<std::size_t>(i)];
    const double p = pis[static_cast<std::size_t>(i)];
    std::vector<std::pair<double, double>> candidates{{1.0, p}, {-1.0, 1 - p}};  // (sign, π)
    if (pair.branch == Branch::Order4) {
      candidates.emplace_back(1.0, 1 - p);
      candidates.emplace_back(-1.0, p);
    }
    auto best = candidates.front();
    for (const auto& c : candidates)
      if (std::abs(a(i) - c.first * c.second) < std::abs(a(i) - best.first * best.second)) best = c;
    fit.phi.col(i) = best.first * base.col(i);
    u.col(i) = best.first * pair.vector / std::sqrt(p - p * p);
    fit.pi(i) = best.second;
    fit.eigenvalues(i) = pair.value;
    fit.branches.push_back(pair.branch);
    fit.converged.push_back(pair.converged);
    if (!pair.converged) fit.flags.push_back("component " + std::to_string(i) + " did not converge");
  }
  if (q) fit.phi = lift(data, true, fit.sigma2, *q, w.w, u);
  timer.end();
  fit.timings_ms = timer.stages();
  return fit;
}

IbpFit fit_isfa(const SampleSet& x, IsfaPrior prior, const PipelineConfig& config) {
  return fit_isfa(SampleMoments(x, config.decomposition.threads), prior, config);
}

IbpFit fit_isfa(const MomentSource& data, IsfaPrior prior, const PipelineConfig& config) {
  config.decomposition.validate();
  StageTimer timer;
  IbpFit fit;

  timer.begin("projection");
  const std::optional<Matrix> q = projection_basis(data, config);
  std::optional<ProjectedMoments> projected;
  if (q) projected.emplace(data, *q);
  const MomentSource& source = projected ? static_cast<const MomentSource&>(*projected) : data;

  timer.begin("second_order");
  const Eigen::Index d = source.dim();
  const Matrix m2 = source.second();
  const NoiseEstimate noise = estimate_sigma2(Vector::Zero(d), m2, 0);
  fit.sigma2 = noise.sigma2;
  const Matrix s2 = m2 - fit.sigma2 * Matrix::Identity(d, d);
  fit.k = choose_rank(s2, config, true);
  const Whitener w = whiten(s2, fit.k, config.whiten_eps);

  timer.begin("higher_order");
  const AuxStats aux = source.aux(noise.noise_basis.col(0));
  const SymmetricTensorSet s = isfa_s_tensors(DenseTensor::from_matrix(w.w.transpose() * m2 * w.w),
                                              source.whitened(w.w, 4), fit.sigma2, aux.m4, prior,
                                              Matrix(w.w.transpose() * w.w));

  timer.begin("decompose_order4");
  const std::vector<EigenPair> pairs = decompose(*s.s4, fit.k, config.decomposition);

  timer.begin("reconstruct");
  const double c = isfa_c(prior);
  // λ = f(π)/(cπ)²: 3(1 - π)/π for the Gaussian prior, 6/π - 3 for the Laplace prior
  const double numerator = prior == IsfaPrior::Gaussian ? 3.0 : 6.0;
  fit.phi.resize(d, fit.k);
  fit.pi.resize(fit.k);
  fit.eigenvalues.resize(fit.k);
  Matrix u(fit.k, fit.k);
  for (int i = 0; i < fit.k; ++i) {
    const auto& pair = pairs[static_cast<std::size_t>(i)];
    double p = pair.value + 3.0 > 0.0 ? numerator / (pair.value + 3.0) : 1.0;
    if (!(p > 0.0 && p < 1.0)) {
      fit.flags.push_back("eigenvalue " + std::to_string(pair.value) + " implies π outside (0, 1); clamped");
      p = std::clamp(p, 1e-6, 1.0 - 1e-6);
    }
    fit.pi(i) = p;
    fit.eigenvalues(i) = pair.value;
    fit.phi.col(i) = w.w_pinv.transpose() * pair.vector / std::sqrt(c * p);
    u.col(i) = pair.vector / std::sqrt(c * p);
    fit.branches.push_back(pair.branch);
    fit.converged.push_back(pair.converged);
    if (!pair.converged) fit.flags.push_back("component " + std::to_string(i) + " did not converge");
  }
  if (q) fit.phi = lift(data, false, fit.sigma2, *q, w.w, u);
  timer.end();
  fit.timings_ms = timer.stages();
  return fit;
}

Matrix leaf_first_moments(const HdpTree& tree, const AveragingPolicy& policy) {
  std::vector<Vector> cols;
  for (int leaf : tree.leaves()) {
    const HdpNode& n = tree.node(leaf);
    if (!n.document || n.document->length() == 0) {
      if (!policy.skip_short_documents) throw InputError("leaf " + std::to_string(leaf) + " has an empty document");
      continue;
    }
    cols.push_back(word_moment(*n.document, 1, tree.vocab_size()).to_vector());
  }
  Matrix m(static_cast<Eigen::Index>(tree.vocab_size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = cols[j];
  return m;
}

HdpTree flatten(const HdpTree& tree) {
  std::vector<HdpNode> nodes(1);
  nodes[0].id = 0;
  int next = 1;
  for (int leaf : tree.leaves()) {
    HdpNode n;
    n.id = next++;
    n.parent = 0;
    n.level = 1;
    n.document = tree.node(leaf).document;
    nodes.push_back(std::move(n));
  }
  const auto& g = tree.gammas();
  return HdpTree(std::move(nodes), {g.front(), g.back()}, tree.vocab_size());
}

namespace {

// Whitening, decomposition and reconstruction shared by the tree and moment entry points.
void hdp_from_root_moments(HdpFit& fit, const Vector& m1, const Matrix& m2,
                           const std::function<DenseTensor(const Matrix&)>& whitened_m3, const PipelineConfig& config,
                           StageTimer& timer) {
  const HdpLevelCoefficients& c = fit.coefficients;
  const Matrix s2 = m2 - c.c2 * m1 * m1.transpose();
  const Whitener w = whiten(s2, fit.k, config.whiten_eps);

  timer.begin("third_order");
  const DenseTensor w3 = whitened_hdp_s3(whitened_m3(w.w), m1, s2, w.w, c);

  timer.begin("decompose_order3");
  const std::vector<EigenPair> pairs = decompose(w3, fit.k, config.decomposition);

  timer.begin("reconstruct");
  const Eigen::Index v = m1.size();
  fit.phi_raw.resize(v, fit.k);
  fit.pi0.resize(fit.k);
  fit.eigenvalues.resize(fit.k);
  for (int i = 0; i < fit.k; ++i) {
    const auto& p = pairs[static_cast<std::size_t>(i)];
    fit.eigenvalues(i) = p.value;
    fit.converged.push_back(p.converged);
    fit.phi_raw.col(i) = p.value * (c.c3 / c.c6) * (w.w_pinv.transpose() * p.vector);
    // λ = C6 / (C3^{3/2} √π)
    fit.pi0(i) = c.c6 * c.c6 / (c.c3 * c.c3 * c.c3 * p.value * p.value);
  }
  fit.phi = fit.phi_raw.cwiseMax(0.0);
  for (int i = 0; i < fit.k; ++i) {
    const double total = fit.phi.col(i).sum();
    if (total > 0.0) {
      fit.phi.col(i) /= total;
    } else {
      warn("topic " + std::to_string(i) + " has no positive mass; using the uniform distribution");
      fit.phi.col(i).setConstant(1.0 / static_cast<double>(v));
    }
  }
  timer.end();
  fit.timings_ms = timer.stages();
}

}  // namespace

HdpFit fit_hdp(const HdpTree& tree, const PipelineConfig& config) {
  config.decomposition.validate();
  StageTimer timer;
  HdpFit fit;
  const AveragingPolicy policy{config.skip_short_documents};

  timer.begin("rank");
  if (config.k) {
    fit.k = *config.k;
    if (fit.k < 1) throw InputError("k must be positive");
  } else {
    const Matrix leaves = leaf_first_moments(tree, policy);
    if (std::min(leaves.rows(), leaves.cols()) < 3)
      throw InputError("topic count estimation needs at least 3 leaves and 3 words; pass k explicitly");
    fit.k = estimate_rank_slope(leaves, default_kprime(leaves, config.kprime_guess), config.decomposition.seed,
                                config.rank_gap)
                .k;
    if (fit.k == 0) throw NumericalError("no topics: leaf moments are all zero");
  }

  timer.begin("second_order");
  fit.coefficients = hdp_coefficients(tree.gammas(), tree.depth()).at(0);
  const Vector m1 = node_moment(tree, tree.root(), 1, policy).to_vector();
  const Matrix m2 = node_moment(tree, tree.root(), 2, policy).to_matrix();
  hdp_from_root_moments(
      fit, m1, m2, [&](const Matrix& w) { return whitened_node_moment(tree, tree.root(), 3, w, policy); }, config,
      timer);
  return fit;
}

HdpFit fit_hdp(const Vector& m1, const Matrix& m2, const DenseTensor& m3, const HdpLevelCoefficients& root,
               int k, const PipelineConfig& config) {
  config.decomposition.validate();
  if (k < 1 || k > m1.size()) throw InputError("k must lie in 1..vocabulary size");
  if (m2.rows() != m1.size() || m2.cols() != m1.size()) throw DimensionError("M2 shape vs M1", 0);
  if (m3.order() != 3 || !m3.is_cubic() || static_cast<Eigen::Index>(m3.dim(0)) != m1.size())
    throw DimensionError("M3 shape vs M1", 0);
  StageTimer timer;
  HdpFit fit;
  fit.k = k;
  fit.coefficients = root;
  timer.begin("second_order");
  hdp_from_root_moments(
      fit, m1, m2, [&](const Matrix& w) { return contract_all(m3, w.transpose()); }, config, timer);
  return fit;
}

namespace {

std::string branch_name(Branch b) { return b == Branch::Order3 ? "S3" : "S4"; }

}  // namespace

ModelRecord to_record(const IbpFit& fit, const std::string& model, const DecompositionConfig& config) {
  ModelRecord r;
  r.model = model;
  r.k = fit.k;
  r.k1 = fit.k1;
  r.sigma2 = fit.sigma2;
  r.pi = fit.pi;
  r.phi = fit.phi;
  for (Branch b : fit.branches) r.branches.push_back(branch_name(b));
  r.solver = to_string(config.backend);
  r.seed = config.seed;
  r.timings_ms = fit.timings_ms;
  return r;
}

ModelRecord to_record(const HdpFit& fit, const DecompositionConfig& config) {
  ModelRecord r;
  r.model = "hdp";
  r.k = fit.k;
  r.k1 = fit.k;
  r.pi = fit.pi0;
  r.phi = fit.phi;
  r.branches.assign(static_cast<std::size_t>(fit.k), "S3");
  r.solver = to_string(config.backend);
  r.seed = config.seed;
  r.timings_ms = fit.timings_ms;
  return r;
}

void save_model(const std::filesystem::path& json_path, const ModelRecord& r) {
  if (json_path.has_parent_path()) std::filesystem::create_directories(json_path.parent_path());
  std::filesystem::path phi_file = json_path.filename();
  phi_file.replace_extension(".phi.txt");
  save_matrix(json_path.parent_path() / phi_file, r.phi);
  nlohmann::json timings = nlohmann::json::object();
  for (const auto& [stage, ms] : r.timings_ms) timings[stage] = ms;
  const nlohmann::json j = {{"model", r.model},
                            {"K", r.k},
                            {"K1", r.k1},
                            {"sigma2", r.sigma2},
                            {"pi", std::vector<double>(r.pi.data(), r.pi.data() + r.pi.size())},
                            {"phi_file", phi_file.string()},
                            {"branches", r.branches},
                            {"solver", r.solver},
                            {"seed", r.seed},
                            {"timings_ms", timings}};
  std::ofstream f(json_path);
  if (!f) throw InputError("cannot write " + json_path.string());
  f << j.dump(2) << '\n';
}

ModelRecord load_model(const std::filesystem::path& json_path) {
  std::ifstream f(json_path);
  if (!f) throw InputError("cannot read " + json_path.string());
  ModelRecord r;
  try {
    const nlohmann::json j = nlohmann::json::parse(f);
    r.model = j.value("model", std::string("ibp-lg"));
    r.k = j.at("K").get<int>();
    r.k1 = j.value("K1", 0);
    r.sigma2 = j.value("sigma2", 0.0);
    const auto pi = j.at("pi").get<std::vector<double>>();
    r.pi = Eigen::Map<const Vector>(pi.data(), static_cast<Eigen::Index>(pi.size()));
    r.branches = j.value("branches", std::vector<std::string>{});
    r.solver = j.value("solver", std::string("rtpm"));
    r.seed = j.value("seed", std::uint64_t{0});
    r.phi = load_matrix(json_path.parent_path() / j.at("phi_file").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed model file " + json_path.string() + ": " + e.what());
  }
  if (r.phi.cols() != r.k) throw InputError("model file: Φ has " + std::to_string(r.phi.cols()) + " columns, K = " + std::to_string(r.k));
  return r;
}

}  // namespace specbnp
