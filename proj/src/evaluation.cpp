#include "specbnp/evaluation.hpp"

#include "specbnp/error.hpp"

#include <limits>

namespace specbnp {

std::vector<int> hungarian(const Matrix& cost) {
  const auto n = static_cast<int>(cost.rows());
  if (cost.cols() != cost.rows()) throw DimensionError("hungarian: cost matrix must be square", 1);
  // potentials formulation, 1-based with a virtual column 0
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  auto at = [](auto& vec, int i) -> auto& { return vec[static_cast<std::size_t>(i)]; };
  for (int i = 1; i <= n; ++i) {
    at(p, 0) = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      at(used, j0) = 1;
      const int i0 = at(p, j0);
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (at(used, j)) continue;
        const double cur = cost(i0 - 1, j - 1) - at(u, i0) - at(v, j);
        if (cur < at(minv, j)) {
          at(minv, j) = cur;
          at(way, j) = j0;
        }
        if (at(minv, j) < delta) {
          delta = at(minv, j);
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (at(used, j)) {
          at(u, at(p, j)) += delta;
          at(v, j) -= delta;
        } else {
          at(minv, j) -= delta;
        }
      }
      j0 = j1;
    } while (at(p, j0) != 0);
    do {
      const int j1 = at(way, j0);
      at(p, j0) = at(p, j1);
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j) out[static_cast<std::size_t>(at(p, j) - 1)] = j - 1;
  return out;
}

MatchResult match_columns(const Matrix& phi, const Matrix& phi_hat, bool allow_sign) {
  if (phi.rows() != phi_hat.rows()) throw DimensionError("match_columns: row count", 0);
  if (phi.cols() != phi_hat.cols()) throw DimensionError("match_columns: column count", 1);
  const Eigen::Index k = phi.cols();
  Matrix cost(k, k);
  Matrix sign(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      const double plus = (phi.col(i) - phi_hat.col(j)).squaredNorm();
      const double minus = (phi.col(i) + phi_hat.col(j)).squaredNorm();
      const bool flip = allow_sign && minus < plus;
      cost(i, j) = flip ? minus : plus;
      sign(i, j) = flip ? -1.0 : 1.0;
    }
  }
  MatchResult m;
  m.permutation = k > 0 ? hungarian(cost) : std::vector<int>{};
  m.column_errors.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Eigen::Index j = m.permutation[static_cast<std::size_t>(i)];
    m.signs.push_back(static_cast<int>(sign(i, j)));
    m.column_errors(i) = (phi.col(i) - sign(i, j) * phi_hat.col(j)).norm();
  }
  m.total = m.column_errors.norm();
  return m;
}

double frobenius_error(const MatchResult& match) { return match.column_errors.norm(); }

StageTimer::StageTimer() : created_(Clock::now()) {}

void StageTimer::begin(const std::string& stage) {
  end();
  std::size_t slot = stages_.size();
  for (std::size_t i = 0; i < stages_.size(); ++i)
    if (stages_[i].first == stage) slot = i;
  if (slot == stages_.size()) stages_.emplace_back(stage, 0.0);
  running_ = std::make_pair(slot, Clock::now());
}

void StageTimer::end() {
  if (!running_) return;
  const std::chrono::duration<double, std::milli> d = Clock::now() - running_->second;
  stages_[running_->first].second += d.count();
  running_.reset();
}

double StageTimer::stage_ms(const std::string& stage) const {
  for (const auto& [name, ms] : stages_)
    if (name == stage) return ms;
  return 0.0;
}

double StageTimer::sum_ms() const {
  double s = 0.0;
  for (const auto& st : stages_) s += st.second;
  return s;
}

double StageTimer::elapsed_ms() const {
  const std::chrono::duration<double, std::milli> d = Clock::now() - created_;
  return d.count();
}

}  // namespace specbnp
