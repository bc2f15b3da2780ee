#pragma once

// Recovery error up to column permutation and sign, and per-stage wall-clock timing.

#include "specbnp/tensor.hpp"

#include <chrono>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace specbnp {

struct MatchResult {
  std::vector<int> permutation;  // truth column i is matched to estimate column permutation[i]
  std::vector<int> signs;        // ±1, applied to the estimate column
  Vector column_errors;          // ‖Φ_i - s_i Φ̂_{τ(i)}‖
  double total = 0.0;            // √(Σ column_errors²)
};

/// Minimum-cost assignment (Hungarian algorithm) over pairwise column distances, each
/// minimized over sign when `allow_sign` is set.
MatchResult match_columns(const Matrix& phi, const Matrix& phi_hat, bool allow_sign);

double frobenius_error(const MatchResult& match);

/// Minimum-cost perfect assignment for a square cost matrix; result[row] = column.
std::vector<int> hungarian(const Matrix& cost);

/// Accumulates named wall-clock stages. begin() closes the running stage, if any.
class StageTimer {
 public:
  using Clock = std::chrono::steady_clock;

  StageTimer();
  void begin(const std::string& stage);
  void end();
  /// Milliseconds per stage, in the order the stages first started.
  const std::vector<std::pair<std::string, double>>& stages() const { return stages_; }
  double stage_ms(const std::string& stage) const;
  double sum_ms() const;
  /// Wall time since construction.
  double elapsed_ms() const;

 private:
  Clock::time_point created_;
  std::optional<std::pair<std::size_t, Clock::time_point>> running_;
  std::vector<std::pair<std::string, double>> stages_;
};

}  // namespace specbnp
