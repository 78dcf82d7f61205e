#pragma once

#include <optional>
#include <vector>

#include "cpdkit/tensor.hpp"

namespace cpdkit {

/// Result of comparing an estimated CPD against a reference one.
struct CpdErrReport {
  std::vector<double> per_mode_relative_error;
  /// For every truth column, the matched estimate column, or nullopt when
  /// the estimate had too few columns and the truth column was matched
  /// against a zero (padding) column.
  std::vector<std::optional<std::size_t>> permutation;
  /// Estimate columns left unmatched because the estimate had extra columns.
  std::vector<std::size_t> dropped_estimate_columns;
  /// Per mode, the complex scale applied to each matched estimate column
  /// (0 for padded columns).
  std::vector<Vector> per_mode_scaling;
  /// Estimate after permutation and scaling; same column count as the truth.
  CpdModel aligned_estimate;
};

/// Relative factor error after optimal column matching and per-mode
/// least-squares scaling:
///   err_n = ||U_n - Uest_n P D_n||_F / ||U_n||_F.
/// One permutation P is chosen for all modes by maximizing the summed log
/// congruence (Hungarian algorithm); the scalings D_n are independent per
/// mode. Not symmetric in its arguments.
CpdErrReport cpderr(const CpdModel& truth, const CpdModel& estimate);

/// Optimal assignment for a rows x cols cost matrix with rows <= cols.
/// Returns, per row, the assigned column.
std::vector<std::size_t> hungarian(const Eigen::MatrixXd& cost);

/// Applies the report's permutation and last-mode scaling to the last-mode
/// estimate and returns the real part (K x R_truth).
Eigen::MatrixXd align_sources(const Eigen::MatrixXd& truth_sources, const Matrix& estimate_last_mode,
                              const CpdErrReport& report);

struct PearsonResult {
  double r = 0.0;
  /// Two-sided p-value of the t test with K - 2 degrees of freedom.
  double p = 1.0;
};

PearsonResult pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct CorrelationReport {
  std::vector<double> per_source_r;
  std::vector<double> per_source_p;
  std::size_t sample_count = 0;
};

/// Column-by-column pearson().
CorrelationReport correlate_sources(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& aligned);

}  // namespace cpdkit
