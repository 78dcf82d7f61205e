#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpdkit/tensor.hpp"

namespace cpdkit {

enum class CpdAlgorithm {
  Als,
  GaussNewton,
  GaussNewtonWithAlsWarmstart,
};

enum class MissingDataStrategy {
  /// Missing entries are refilled from the current model before each
  /// iteration; the dense kernels are then used as-is.
  ExpectationImputation,
  /// Only observed entries enter the objective (row-wise least squares in
  /// ALS, masked Jacobian products in Gauss-Newton).
  MaskedResiduals,
};

std::string to_string(CpdAlgorithm a);
std::string to_string(MissingDataStrategy s);
/// Accepts "als", "gn", "gn_als".
CpdAlgorithm parse_algorithm(const std::string& name);
/// Accepts "imputation", "masked".
MissingDataStrategy parse_missing_strategy(const std::string& name);

struct CpdOptions {
  std::size_t rank = 1;
  CpdAlgorithm algorithm = CpdAlgorithm::GaussNewtonWithAlsWarmstart;
  std::size_t max_iterations = 500;
  double rel_objective_tol = 1e-10;
  double rel_step_tol = 1e-12;
  /// Seed for the random initial model; ignored when `initial` is set.
  std::uint64_t seed = 0;
  std::optional<CpdModel> initial;
  MissingDataStrategy missing_data_strategy = MissingDataStrategy::ExpectationImputation;
  /// ALS sweeps run before Gauss-Newton by GaussNewtonWithAlsWarmstart.
  std::size_t warmstart_sweeps = 3;

  void validate() const;
};

struct CpdDiagnostics {
  std::size_t iterations = 0;
  bool converged = false;
  /// ||T - X||_F / ||T||_F over observed entries.
  double final_relative_residual = 0.0;
  std::vector<double> objective_trace;
};

struct CpdResult {
  CpdModel model;
  CpdDiagnostics diagnostics;
};

CpdResult cpd_als(const DenseTensor& t, const CpdOptions& opts);
CpdResult cpd_als(const IncompleteTensor& t, const CpdOptions& opts);

CpdResult cpd_nls(const DenseTensor& t, const CpdOptions& opts);
CpdResult cpd_nls(const IncompleteTensor& t, const CpdOptions& opts);

/// Dispatches on opts.algorithm.
CpdResult cpd(const IncompleteTensor& t, const CpdOptions& opts);

/// Unit-norm columns in modes 0..N-2, with the largest-magnitude entry of
/// each such column rotated onto the positive real axis. Scale and phase go
/// into the last mode.
CpdModel normalize_model(const CpdModel& m);

/// Entries are circular complex normals drawn from Rng(seed), mode by mode,
/// each factor in column-major order.
CpdModel init_model(const Shape& shape, std::size_t rank, std::uint64_t seed);

/// Gradient of f(U) = 1/2 ||T - [[U]]||^2 (observed entries only), for
/// every mode: g_n = U_n W_n - mttkrp, twice the Wirtinger derivative with
/// respect to conj(U_n). For a real perturbation h of Re U_n(i,r),
/// df/dh = Re g_n(i,r); for Im, Im g_n(i,r).
std::vector<Matrix> cpd_gradient(const IncompleteTensor& t, const CpdModel& m);

/// 1/2 ||T - [[U]]||^2 over observed entries.
double cpd_objective(const IncompleteTensor& t, const CpdModel& m);

}  // namespace cpdkit
