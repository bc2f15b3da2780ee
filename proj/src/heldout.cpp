#include "specbnp/error.hpp"
#include "specbnp/log.hpp"
#include "specbnp/pipelines.hpp"

#include <cmath>

namespace specbnp {

double heldout_perword_nll(const Matrix& phi, const std::vector<Document>& docs, const HeldoutConfig& config) {
  if (phi.cols() < 1 || phi.rows() < 1) throw InputError("held-out likelihood needs a non-empty Φ");
  if (!(config.smoothing >= 0.0 && config.smoothing <= 1.0)) throw InputError("smoothing must lie in [0, 1]");
  if (config.em_iterations < 0 || !(config.pseudocount >= 0.0)) throw InputError("bad fold-in settings");
  const Eigen::Index v = phi.rows();
  const Eigen::Index k = phi.cols();
  const Matrix topics = (1.0 - config.smoothing) * phi.array() + config.smoothing / static_cast<double>(v);

  double nll = 0.0;
  double words = 0.0;
  std::size_t skipped = 0;
  for (const Document& doc : docs) {
    if (doc.length() == 0) {
      ++skipped;
      continue;
    }
    const auto& counts = doc.counts();
    Matrix rows(static_cast<Eigen::Index>(counts.size()), k);  // p(w | topic) for the words present
    Vector n(static_cast<Eigen::Index>(counts.size()));
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (counts[i].first >= v) throw InputError("held-out word id " + std::to_string(counts[i].first) + " outside vocabulary");
      rows.row(static_cast<Eigen::Index>(i)) = topics.row(counts[i].first);
      n(static_cast<Eigen::Index>(i)) = counts[i].second;
    }
    const double total = n.sum();
    Vector theta = Vector::Constant(k, 1.0 / static_cast<double>(k));
    for (int it = 0; it < config.em_iterations; ++it) {
      const Vector mix = rows * theta;
      const Vector weight = n.cwiseQuotient(mix);
      const Vector expected = theta.cwiseProduct(rows.transpose() * weight);
      theta = (expected.array() + config.pseudocount) / (total + static_cast<double>(k) * config.pseudocount);
    }
    const Vector mix = rows * theta;
    nll -= n.dot(mix.array().log().matrix());
    words += total;
  }
  if (skipped > 0) warn("skipped " + std::to_string(skipped) + " empty held-out document(s)");
  if (words == 0.0) throw InputError("no held-out words");
  return nll / words;
}

double heldout_perword_nll(const HdpFit& fit, const std::vector<Document>& docs, const HeldoutConfig& config) {
  return heldout_perword_nll(fit.phi, docs, config);
}

}  // namespace specbnp
