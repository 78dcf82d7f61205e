#pragma once

// Helpers shared by the ALS and Gauss-Newton drivers.

#include "cpdkit/cpd.hpp"

namespace cpdkit::detail {

/// Throws on rank 0, non-finite entries or an all-zero observed tensor.
void check_problem(const IncompleteTensor& t, const CpdOptions& opts);

CpdModel starting_model(const Shape& shape, const CpdOptions& opts);

/// Pseudo-inverse of a Hermitian PSD matrix, singular values below
/// 1e-12 * largest truncated.
Matrix pinv_psd(const Matrix& w);

/// ||mask o (T - [[U]])||_F / ||mask o T||_F.
double relative_residual(const IncompleteTensor& t, const CpdModel& m, double t_norm);

/// Like normalize_model but leaves exactly-zero columns alone.
CpdModel normalize_lenient(const CpdModel& m);

struct AlsRun {
  CpdModel model;
  CpdDiagnostics diagnostics;
};

/// Up to `sweeps` ALS sweeps from `model`; stops early on the objective
/// tolerance. The returned model is not normalized.
AlsRun run_als(const IncompleteTensor& t, CpdModel model, const CpdOptions& opts, std::size_t sweeps);

}  // namespace cpdkit::detail
