#include "specbnp/synthesis.hpp"

#include "specbnp/corpus_io.hpp"
#include "specbnp/error.hpp"
#include "specbnp/tensor_io.hpp"
#include "random_streams.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <random>

namespace specbnp {
namespace {

using nlohmann::json;

void check_params(const Matrix& phi, const Vector& pi) {
  if (phi.cols() != pi.size()) throw DimensionError("Φ columns vs π length", 1);
  for (Eigen::Index i = 0; i < pi.size(); ++i)
    if (!(pi(i) >= 0.0 && pi(i) <= 1.0)) throw InputError("π entries must lie in [0, 1]");
}

// Dirichlet(α) through log-gamma draws, stable for tiny α: Gamma(α) = Gamma(α + 1) U^{1/α}.
Vector dirichlet(std::mt19937_64& rng, const Vector& alpha) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector logs(alpha.size());
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    if (!(alpha(i) > 0.0)) {
      logs(i) = -std::numeric_limits<double>::infinity();
      continue;
    }
    std::gamma_distribution<double> gamma(alpha(i) + 1.0, 1.0);
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng);
    logs(i) = std::log(gamma(rng)) + std::log(u) / alpha(i);
  }
  const double top = logs.maxCoeff();
  Vector p = (logs.array() - top).exp();
  return p / p.sum();
}

// E[u^{⊗r}] entries for a latent vector with independent coordinates, given the moment of
// a single coordinate raised to each power.
DenseTensor independent_latent_moment(Eigen::Index k, int r, const std::function<double(Eigen::Index, int)>& power) {
  DenseTensor t = DenseTensor::cube(static_cast<std::size_t>(k), r);
  std::vector<std::size_t> idx(static_cast<std::size_t>(r), 0);
  auto data = t.data();
  for (std::size_t flat = 0; flat < data.size(); ++flat) {
    std::size_t rem = flat;
    for (int m = r - 1; m >= 0; --m) {
      idx[static_cast<std::size_t>(m)] = rem % static_cast<std::size_t>(k);
      rem /= static_cast<std::size_t>(k);
    }
    double p = 1.0;
    std::vector<std::size_t> seen;
    for (std::size_t i : idx) {
      if (std::find(seen.begin(), seen.end(), i) != seen.end()) continue;
      seen.push_back(i);
      const int count = static_cast<int>(std::count(idx.begin(), idx.end(), i));
      p *= power(static_cast<Eigen::Index>(i), count);
    }
    data[flat] = p;
  }
  return t;
}

// Moments of x = Φu + ε, ε ~ N(0, σ² I), from the latent moments.
RawMoments add_gaussian_noise(const Matrix& phi, const std::vector<DenseTensor>& latent, double sigma2) {
  const Eigen::Index d = phi.rows();
  const DenseTensor id = DenseTensor::from_matrix(Matrix::Identity(d, d));
  std::vector<DenseTensor> y;
  for (int r = 1; r <= 4; ++r) y.push_back(contract_all(latent[static_cast<std::size_t>(r - 1)], phi));
  RawMoments m;
  m.m1 = y[0].to_vector();
  m.m2 = y[1].to_matrix() + sigma2 * Matrix::Identity(d, d);
  m.m3 = y[2];
  m.m3.axpy(sigma2, symmetrize(outer(y[0], id), 3));
  m.m4 = y[3];
  m.m4.axpy(sigma2, symmetrize(outer(y[1], id), 6));
  m.m4.axpy(sigma2 * sigma2, symmetrize(outer(id, id), 3));
  return m;
}

void shape_depth_check(const TreeShape& s, int& depth, int level) {
  if (s.children.empty()) {
    if (s.documents < 1) throw InputError("a document group needs at least one document");
    const int d = level + 2;
    if (depth == 0) depth = d;
    if (d != depth) throw InputError("every document group must sit at the same depth");
    return;
  }
  for (const auto& c : s.children) shape_depth_check(c, depth, level + 1);
}

TreeShape shape_from_json(const json& j) {
  TreeShape s;
  if (j.is_number_integer()) {
    s.documents = j.get<int>();
    if (s.documents < 1) throw InputError("document counts must be positive");
  } else if (j.is_array() && !j.empty()) {
    for (const auto& c : j) s.children.push_back(shape_from_json(c));
  } else {
    throw InputError("tree shape entries must be positive integers or non-empty arrays");
  }
  return s;
}

Matrix matrix_from_rows(const json& rows) {
  if (!rows.is_array() || rows.empty() || !rows[0].is_array()) throw InputError("\"phi\" must be an array of rows");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size()) throw InputError("\"phi\" rows differ in length");
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j].get<double>();
  }
  return m;
}

Vector vector_from(const json& j, const char* what) {
  if (!j.is_array()) throw InputError(std::string("\"") + what + "\" must be an array");
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

Matrix gen_ibp_z(Eigen::Index n, const Vector& pi, std::uint64_t seed) {
  if (n < 0) throw InputError("sample count must be non-negative");
  check_params(Matrix::Zero(1, pi.size()), pi);
  auto rng = detail::stream(seed, 0x1b, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix z(n, pi.size());
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < pi.size(); ++j) z(i, j) = unif(rng) < pi(j) ? 1.0 : 0.0;
  return z;
}

Matrix gen_ibp_z_buffet(Eigen::Index n, double alpha, std::uint64_t seed) {
  if (!(alpha > 0.0)) throw InputError("buffet concentration must be positive");
  auto rng = detail::stream(seed, 0x1b, 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::vector<char>> rows;
  std::vector<int> taken;  // m_k
  for (Eigen::Index i = 1; i <= n; ++i) {
    std::vector<char> row(taken.size(), 0);
    for (std::size_t k = 0; k < taken.size(); ++k) {
      if (unif(rng) < static_cast<double>(taken[k]) / static_cast<double>(i)) {
        row[k] = 1;
        ++taken[k];
      }
    }
    std::poisson_distribution<int> fresh(alpha / static_cast<double>(i));
    for (int f = fresh(rng); f > 0; --f) {
      row.push_back(1);
      taken.push_back(1);
    }
    rows.push_back(std::move(row));
  }
  Matrix z = Matrix::Zero(n, static_cast<Eigen::Index>(taken.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].size(); ++k) z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  return z;
}

SampleSet gen_linear_gaussian(Eigen::Index n, const Matrix& phi, const Vector& pi, double sigma, std::uint64_t seed) {
  check_params(phi, pi);
  if (!(sigma >= 0.0)) throw InputError("noise standard deviation must be non-negative");
  const Matrix z = gen_ibp_z(n, pi, seed);
  auto rng = detail::stream(seed, 0x1b, 2);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x = z * phi.transpose();
  if (sigma > 0.0)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) += sigma * normal(rng);
  return SampleSet(std::move(x));
}

SampleSet gen_isfa(Eigen::Index n, const Matrix& phi, const Vector& pi, IsfaPrior prior, double sigma,
                   std::uint64_t seed) {
  check_params(phi, pi);
  if (!(sigma >= 0.0)) throw InputError("noise standard deviation must be non-negative");
  Matrix u = gen_ibp_z(n, pi, seed);
  auto rng = detail::stream(seed, 0x1b, 3);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  std::bernoulli_distribution coin(0.5);
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      const double y = prior == IsfaPrior::Gaussian ? normal(rng) : (coin(rng) ? 1.0 : -1.0) * expo(rng);
      u(i, j) *= y;
    }
  }
  Matrix x = u * phi.transpose();
  if (sigma > 0.0)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) += sigma * normal(rng);
  return SampleSet(std::move(x));
}

Matrix templates_6x6() {
  const std::vector<std::vector<std::pair<int, int>>> on = {
      {{0, 0}, {0, 1}, {0, 2}, {1, 0}, {2, 0}, {1, 1}},
      {{0, 5}, {0, 4}, {0, 3}, {1, 5}, {2, 5}, {1, 4}},
      {{5, 0}, {5, 1}, {5, 2}, {4, 0}, {3, 0}, {4, 1}},
      {{2, 1}, {2, 2}, {2, 3}, {2, 4}, {3, 1}, {3, 2}, {3, 3}, {3, 4}, {1, 2}, {1, 3}, {4, 2}, {4, 3}},
  };
  Matrix t = Matrix::Zero(36, 4);
  for (std::size_t k = 0; k < on.size(); ++k)
    for (const auto& [r, c] : on[k]) t(r * 6 + c, static_cast<Eigen::Index>(k)) = 1.0;
  return t;
}

RawMoments population_moments_lg(const Matrix& phi, const Vector& pi, double sigma2) {
  check_params(phi, pi);
  std::vector<DenseTensor> latent;
  for (int r = 1; r <= 4; ++r)
    latent.push_back(independent_latent_moment(pi.size(), r, [&](Eigen::Index i, int) { return pi(i); }));
  return add_gaussian_noise(phi, latent, sigma2);
}

RawMoments population_moments_isfa(const Matrix& phi, const Vector& pi, IsfaPrior prior, double sigma2) {
  check_params(phi, pi);
  const double c = isfa_c(prior);
  const double y4 = prior == IsfaPrior::Gaussian ? 3.0 : 24.0;
  std::vector<DenseTensor> latent;
  for (int r = 1; r <= 4; ++r) {
    latent.push_back(independent_latent_moment(pi.size(), r, [&](Eigen::Index i, int count) {
      switch (count) {
        case 2: return c * pi(i);
        case 4: return y4 * pi(i);
        default: return 0.0;
      }
    }));
  }
  return add_gaussian_noise(phi, latent, sigma2);
}

int TreeShape::depth() const {
  int depth = 0;
  shape_depth_check(*this, depth, 0);
  return depth;
}

TreeShape parse_tree_shape(const std::string& json_text) {
  try {
    TreeShape s = shape_from_json(json::parse(json_text));
    s.depth();
    return s;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed tree shape: ") + e.what());
  }
}

HdpCorpus gen_hdp_corpus(const TreeShape& shape, const std::vector<double>& gammas, const Matrix& phi,
                         const Vector& pi0, int words_per_doc, std::uint64_t seed, int heldout_per_group) {
  const int depth = shape.depth();
  if (gammas.size() != static_cast<std::size_t>(depth))
    throw InputError("expected " + std::to_string(depth) + " gammas for this tree shape, got " +
                     std::to_string(gammas.size()));
  if (phi.cols() != pi0.size()) throw DimensionError("Φ columns vs π0 length", 1);
  if (words_per_doc < 1) throw InputError("words per document must be positive");
  if (heldout_per_group < 0) throw InputError("held-out document count must be non-negative");
  for (Eigen::Index j = 0; j < phi.cols(); ++j)
    if (phi.col(j).minCoeff() < 0.0 || std::abs(phi.col(j).sum() - 1.0) > 1e-9)
      throw InputError("Φ columns must be probability vectors");
  if (pi0.minCoeff() < 0.0 || std::abs(pi0.sum() - 1.0) > 1e-9) throw InputError("π0 must lie on the simplex");

  auto rng = detail::stream(seed, 0x4d, 0);
  std::vector<std::discrete_distribution<std::uint32_t>> word_given_topic;
  for (Eigen::Index j = 0; j < phi.cols(); ++j)
    word_given_topic.emplace_back(phi.col(j).data(), phi.col(j).data() + phi.rows());

  auto draw_document = [&](const Vector& rho) {
    std::discrete_distribution<int> topic(rho.data(), rho.data() + rho.size());
    std::vector<std::uint32_t> tokens(static_cast<std::size_t>(words_per_doc));
    for (auto& t : tokens) t = word_given_topic[static_cast<std::size_t>(topic(rng))](rng);
    return Document::from_tokens(tokens);
  };

  std::vector<HdpNode> nodes;
  std::vector<Document> heldout;
  std::function<void(const TreeShape&, std::optional<int>, int, const Vector&)> grow =
      [&](const TreeShape& s, std::optional<int> parent, int level, const Vector& pi) {
        HdpNode n;
        n.id = static_cast<int>(nodes.size());
        n.parent = parent;
        n.level = level;
        nodes.push_back(n);
        const int id = n.id;
        const double g = gammas[static_cast<std::size_t>(level + 1)];
        if (s.children.empty()) {
          for (int d = 0; d < s.documents; ++d) {
            HdpNode leaf;
            leaf.id = static_cast<int>(nodes.size());
            leaf.parent = id;
            leaf.level = level + 1;
            leaf.document = draw_document(dirichlet(rng, g * pi));
            nodes.push_back(std::move(leaf));
          }
          for (int d = 0; d < heldout_per_group; ++d) heldout.push_back(draw_document(dirichlet(rng, g * pi)));
          return;
        }
        for (const auto& c : s.children) grow(c, id, level + 1, dirichlet(rng, g * pi));
      };
  grow(shape, std::nullopt, 0, pi0);
  return {HdpTree(std::move(nodes), gammas, static_cast<std::size_t>(phi.rows())), std::move(heldout)};
}

HdpPopulation hdp_population_moments(const Matrix& phi, const Vector& pi0, const std::vector<double>& chain) {
  if (phi.cols() != pi0.size()) throw DimensionError("Φ columns vs π0 length", 1);
  const Eigen::Index k = pi0.size();
  const auto ks = static_cast<std::size_t>(k);
  // E[p], E[p ⊗ p], E[p ⊗ p ⊗ p] propagated through π ~ Dirichlet(γ p)
  Vector e1 = pi0;
  Matrix e2 = pi0 * pi0.transpose();
  DenseTensor e3 = DenseTensor::outer_power(pi0, 3);
  for (double g : chain) {
    if (!(g > 0.0)) throw InputError("gammas must be positive");
    DenseTensor next = DenseTensor::cube(ks, 3);
    for (std::size_t i = 0; i < ks; ++i) {
      for (std::size_t j = 0; j < ks; ++j) {
        for (std::size_t l = 0; l < ks; ++l) {
          const auto I = static_cast<Eigen::Index>(i), J = static_cast<Eigen::Index>(j), L = static_cast<Eigen::Index>(l);
          double v = g * g * e3(i, j, l);
          if (i == j) v += g * e2(I, L);
          if (i == l) v += g * e2(I, J);
          if (j == l) v += g * e2(I, J);
          if (i == j && j == l) v += 2 * e1(I);
          next(i, j, l) = v / ((g + 1) * (g + 2));
        }
      }
    }
    e3 = std::move(next);
    e2 = (g * e2 + Matrix(e1.asDiagonal())) / (g + 1);
  }
  HdpPopulation p;
  p.m1 = phi * e1;
  p.m2 = phi * e2 * phi.transpose();
  p.m3 = contract_all(e3, phi);
  return p;
}

GeneratorSpec parse_generator_spec(const std::string& json_text) {
  GeneratorSpec s;
  try {
    const json j = json::parse(json_text);
    s.model = j.at("model").get<std::string>();
    s.seed = j.value("seed", std::uint64_t{0});
    s.exact = j.value("exact", false);
    if (s.model != "ibp-lg" && s.model != "isfa-gauss" && s.model != "isfa-laplace" && s.model != "hdp")
      throw InputError("unknown model \"" + s.model + "\"");

    const json& phi = j.at("phi");
    if (phi.is_string()) {
      if (phi.get<std::string>() != "templates") throw InputError("unknown Φ preset \"" + phi.get<std::string>() + "\"");
      s.phi = templates_6x6();
    } else if (phi.is_object()) {
      const json& r = phi.at("random");
      const int d = r.at("d").get<int>(), k = r.at("k").get<int>();
      if (d < 1 || k < 1) throw InputError("random Φ needs positive d and k");
      auto rng = detail::stream(s.seed, 0x7a, 0);
      s.phi.resize(d, k);
      if (s.model == "hdp") {
        std::exponential_distribution<double> expo(1.0);
        for (int c = 0; c < k; ++c) {
          for (int w = 0; w < d; ++w) s.phi(w, c) = expo(rng);
          s.phi.col(c) /= s.phi.col(c).sum();
        }
      } else {
        for (int c = 0; c < k; ++c) s.phi.col(c) = detail::random_gaussian(rng, d);
      }
    } else {
      s.phi = matrix_from_rows(phi);
    }

    if (s.model == "hdp") {
      s.pi0 = vector_from(j.at("pi0"), "pi0");
      s.gammas = j.at("gammas").get<std::vector<double>>();
      s.shape = shape_from_json(j.at("shape"));
      s.words_per_doc = j.at("words_per_doc").get<int>();
      s.heldout_docs_per_group = j.value("heldout_docs_per_group", 0);
      if (s.phi.cols() != s.pi0.size()) throw InputError("Φ has " + std::to_string(s.phi.cols()) + " columns but π0 has " + std::to_string(s.pi0.size()) + " entries");
      if (static_cast<int>(s.gammas.size()) != s.shape.depth())
        throw InputError("\"gammas\" needs one entry per tree level (" + std::to_string(s.shape.depth()) + ")");
    } else {
      s.pi = vector_from(j.at("pi"), "pi");
      s.sigma2 = j.value("sigma2", 0.0);
      s.n = j.value("n", Eigen::Index{0});
      if (!s.exact && s.n < 1) throw InputError("\"n\" must be positive");
      if (!(s.sigma2 >= 0.0)) throw InputError("\"sigma2\" must be non-negative");
      if (s.phi.cols() != s.pi.size()) throw InputError("Φ has " + std::to_string(s.phi.cols()) + " columns but π has " + std::to_string(s.pi.size()) + " entries");
      IbpParams{s.pi}.validate();
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed generator spec: ") + e.what());
  }
  return s;
}

void run_generator(const GeneratorSpec& spec, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  json truth = {{"model", spec.model}, {"seed", spec.seed}, {"phi_file", "truth_phi.txt"}, {"K", spec.phi.cols()}};
  save_matrix(out_dir / "truth_phi.txt", spec.phi);

  if (spec.model == "hdp") {
    const HdpCorpus c = gen_hdp_corpus(spec.shape, spec.gammas, spec.phi, spec.pi0, spec.words_per_doc, spec.seed,
                                       spec.heldout_docs_per_group);
    save_corpus(out_dir / "corpus.json", c.tree);
    truth["pi"] = to_std(spec.pi0);
    truth["gammas"] = spec.gammas;
    truth["data"] = "corpus.json";
    if (!c.heldout.empty()) {
      std::vector<HdpNode> nodes(1);
      for (std::size_t i = 0; i < c.heldout.size(); ++i) {
        HdpNode n;
        n.id = static_cast<int>(i) + 1;
        n.parent = 0;
        n.level = 1;
        n.document = c.heldout[i];
        nodes.push_back(std::move(n));
      }
      save_corpus(out_dir / "heldout.json", HdpTree(std::move(nodes), {1.0, 1.0}, c.tree.vocab_size()));
      truth["heldout"] = "heldout.json";
    }
  } else {
    truth["pi"] = to_std(spec.pi);
    truth["sigma2"] = spec.sigma2;
    if (spec.exact) {
      const RawMoments m = spec.model == "ibp-lg"
                               ? population_moments_lg(spec.phi, spec.pi, spec.sigma2)
                               : population_moments_isfa(spec.phi, spec.pi, parse_isfa_prior(spec.model.substr(5)),
                                                         spec.sigma2);
      save_raw_moments(out_dir / "moments", m);
      truth["data"] = "moments";
    } else {
      const double sigma = std::sqrt(spec.sigma2);
      const SampleSet x = spec.model == "ibp-lg"
                              ? gen_linear_gaussian(spec.n, spec.phi, spec.pi, sigma, spec.seed)
                              : gen_isfa(spec.n, spec.phi, spec.pi, parse_isfa_prior(spec.model.substr(5)), sigma,
                                         spec.seed);
      save_matrix(out_dir / "samples.txt", x.rows());
      truth["data"] = "samples.txt";
    }
  }
  std::ofstream f(out_dir / "truth.json");
  if (!f) throw InputError("cannot write " + (out_dir / "truth.json").string());
  f << truth.dump(2) << '\n';
}

}  // namespace specbnp
