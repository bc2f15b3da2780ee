#include "specbnp/hdp_tensors.hpp"

#include "specbnp/error.hpp"
#include "specbnp/tensor_io.hpp"

#include "json.hpp"

#include <fstream>

namespace specbnp {

const HdpLevelCoefficients& HdpCoefficients::at(int level) const {
  if (level < 0 || static_cast<std::size_t>(level) >= levels.size())
    throw InputError("no HDP coefficients for level " + std::to_string(level));
  return levels[static_cast<std::size_t>(level)];
}

HdpCoefficients hdp_coefficients(std::span<const double> gammas, int depth) {
  if (depth < 2) throw InputError("HDP needs at least two levels, got " + std::to_string(depth));
  if (gammas.size() < static_cast<std::size_t>(depth))
    throw InputError("expected " + std::to_string(depth) + " gammas, got " + std::to_string(gammas.size()));
  for (int l = 1; l < depth; ++l)
    if (!(gammas[static_cast<std::size_t>(l)] > 0.0))
      throw InputError("gamma at level " + std::to_string(l) + " must be positive");

  HdpCoefficients out;
  out.levels.resize(static_cast<std::size_t>(depth));
  for (int l = depth - 2; l >= 0; --l) {
    const auto& below = out.levels[static_cast<std::size_t>(l + 1)];
    auto& c = out.levels[static_cast<std::size_t>(l)];
    const double g = gammas[static_cast<std::size_t>(l + 1)];
    c.c2 = g / (g + 1) * below.c2;
    c.c3 = below.c3 + c.c2 / g;
    c.c4 = g * g / ((g + 1) * (g + 2)) * below.c4;
    c.c5 = g / (g + 1) * (below.c3 / c.c3) * below.c5 + c.c4 / (g * c.c3);
    c.c6 = below.c6 + 3 * c.c5 * c.c3 / g - c.c4 / (g * g);
  }
  return out;
}

HdpLevelCoefficients hdp_coefficients_3layer(double g1, double g2) {
  if (!(g1 > 0.0 && g2 > 0.0)) throw InputError("gammas must be positive");
  HdpLevelCoefficients c;
  const double d1 = (g1 + 1) * (g2 + 1);
  const double d2 = (g1 + 1) * (g1 + 2) * (g2 + 1) * (g2 + 2);
  c.c2 = g1 * g2 / d1;
  c.c3 = (g1 + g2 + 1) / d1;
  c.c4 = g1 * g1 * g2 * g2 / d2;
  c.c5 = g1 * g2 * (g1 + g2 + 2) / ((g1 + 2) * (g2 + 2) * (g1 + g2 + 1));
  c.c6 = (6 * g1 + 6 * g2 + 2 * g1 * g1 + 2 * g2 * g2 + 3 * g1 * g2 + 4) / d2;
  return c;
}

HdpTensorSet hdp_tensors_from_moments(const Vector& m1, const Matrix& m2, const std::optional<DenseTensor>& m3,
                                      const HdpLevelCoefficients& c) {
  const Eigen::Index v = m1.size();
  if (m2.rows() != v || m2.cols() != v) throw DimensionError("HDP M2 shape vs M1 length", 0);
  HdpTensorSet s;
  s.s1 = m1;
  s.s2 = m2 - c.c2 * m1 * m1.transpose();
  if (m3) {
    const auto d = static_cast<std::size_t>(v);
    if (m3->order() != 3 || !m3->is_cubic() || m3->dim(0) != d) throw DimensionError("HDP M3 shape", 0);
    const DenseTensor t1 = DenseTensor::from_vector(m1);
    DenseTensor s3 = *m3;
    s3.axpy(-c.c4, DenseTensor::outer_power(m1, 3));
    s3.axpy(-c.c5, symmetrize(outer(DenseTensor::from_matrix(s.s2), t1), 3));
    s.s3 = std::move(s3);
  }
  return s;
}

HdpTensorSet node_tensors(const HdpTree& tree, int id, const HdpCoefficients& coeffs, const AveragingPolicy& policy,
                          bool with_s3) {
  const HdpNode& n = tree.node(id);
  const Vector m1 = node_moment(tree, id, 1, policy).to_vector();
  const Matrix m2 = node_moment(tree, id, 2, policy).to_matrix();
  std::optional<DenseTensor> m3;
  if (with_s3) m3 = node_moment(tree, id, 3, policy);
  HdpTensorSet s = hdp_tensors_from_moments(m1, m2, m3, coeffs.at(n.level));
  s.node_id = id;
  s.level = n.level;
  return s;
}

DenseTensor whitened_hdp_s3(const DenseTensor& whitened_m3, const Vector& m1, const Matrix& s2, const Matrix& w,
                            const HdpLevelCoefficients& c) {
  if (w.rows() != m1.size()) throw DimensionError("whitener rows vs vocabulary", 0);
  const auto k = static_cast<std::size_t>(w.cols());
  if (whitened_m3.order() != 3 || !whitened_m3.is_cubic() || whitened_m3.dim(0) != k)
    throw DimensionError("whitened M3 shape", 0);
  const Vector m1w = w.transpose() * m1;
  const Matrix s2w = w.transpose() * s2 * w;
  DenseTensor out = whitened_m3;
  out.axpy(-c.c4, DenseTensor::outer_power(m1w, 3));
  out.axpy(-c.c5, symmetrize(outer(DenseTensor::from_matrix(s2w), DenseTensor::from_vector(m1w)), 3));
  return out;
}

void save_hdp_tensor_set(const std::filesystem::path& dir, const HdpTensorSet& set) {
  std::filesystem::create_directories(dir);
  nlohmann::json files = {{"s1", "s1.txt"}, {"s2", "s2.txt"}};
  save_tensor(dir / "s1.txt", DenseTensor::from_vector(set.s1));
  save_matrix(dir / "s2.txt", set.s2);
  if (set.s3) {
    save_tensor(dir / "s3.txt", *set.s3);
    files["s3"] = "s3.txt";
  }
  nlohmann::json manifest = {{"node", set.node_id}, {"level", set.level}, {"files", files}};
  std::ofstream f(dir / "manifest.json");
  if (!f) throw InputError("cannot write " + (dir / "manifest.json").string());
  f << manifest.dump(2) << '\n';
}

}  // namespace specbnp
