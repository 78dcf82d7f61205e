#include <cmath>

#include "cpd_internal.hpp"

namespace cpdkit {

namespace {

// Row-wise least squares over observed entries only:
// U_n(i,:) = t_i^T conj(K_obs) (K_obs^T conj(K_obs))^+.
void masked_update(const Matrix& unfolded, const Eigen::MatrixXd& mask_unfolded, std::vector<Matrix>& factors,
                   std::size_t mode) {
  const Matrix kr = khatri_rao_except(factors, mode);
  const Matrix kr_conj = kr.conjugate();
  auto& u = factors[mode];
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    Matrix gram = Matrix::Zero(u.cols(), u.cols());
    Eigen::RowVectorXcd rhs = Eigen::RowVectorXcd::Zero(u.cols());
    bool any = false;
    for (Eigen::Index j = 0; j < kr.rows(); ++j) {
      if (mask_unfolded(i, j) == 0.0) continue;
      any = true;
      gram += kr.row(j).transpose() * kr_conj.row(j);
      rhs += unfolded(i, j) * kr_conj.row(j);
    }
    if (any) u.row(i) = rhs * detail::pinv_psd(gram);
  }
}

}  // namespace

namespace detail {

AlsRun run_als(const IncompleteTensor& t, CpdModel model, const CpdOptions& opts, std::size_t sweeps) {
  const double t_norm = frobenius_norm(t);
  const bool complete = t.complete();
  const bool masked = !complete && opts.missing_data_strategy == MissingDataStrategy::MaskedResiduals;

  DenseTensor work = t.tensor;
  std::vector<Matrix> unfolded;
  std::vector<Eigen::MatrixXd> mask_unfolded;
  if (masked) {
    DenseTensor mask_t(t.shape());
    for (std::size_t k = 0; k < mask_t.size(); ++k) mask_t[k] = t.mask[k] ? 1.0 : 0.0;
    for (std::size_t n = 0; n < t.shape().order(); ++n) {
      unfolded.push_back(unfold(t.tensor, n));
      mask_unfolded.push_back(unfold(mask_t, n).real());
    }
  }

  AlsRun run{std::move(model), {}};
  auto& diag = run.diagnostics;
  double previous = relative_residual(t, run.model, t_norm);
  for (std::size_t it = 0; it < sweeps; ++it) {
    if (!complete && !masked) {
      const auto x = reconstruct(run.model);
      for (std::size_t k = 0; k < work.size(); ++k)
        if (!t.mask[k]) work[k] = x[k];
    }
    auto& factors = run.model.factors;
    for (std::size_t n = 0; n < factors.size(); ++n) {
      if (masked)
        masked_update(unfolded[n], mask_unfolded[n], factors, n);
      else
        factors[n] = mttkrp(work, factors, n) * pinv_psd(gramian_product_except(factors, n));
    }
    const double rr = relative_residual(t, run.model, t_norm);
    diag.objective_trace.push_back(rr);
    diag.iterations = it + 1;
    if (!std::isfinite(rr)) break;
    if (std::abs(previous - rr) < opts.rel_objective_tol) {
      diag.converged = true;
      break;
    }
    previous = rr;
  }
  diag.final_relative_residual = diag.objective_trace.empty() ? previous : diag.objective_trace.back();
  return run;
}

}  // namespace detail

CpdResult cpd_als(const IncompleteTensor& t, const CpdOptions& opts) {
  detail::check_problem(t, opts);
  auto run = detail::run_als(t, detail::starting_model(t.shape(), opts), opts, opts.max_iterations);
  return {detail::normalize_lenient(run.model), std::move(run.diagnostics)};
}

CpdResult cpd_als(const DenseTensor& t, const CpdOptions& opts) { return cpd_als(IncompleteTensor(t), opts); }

}  // namespace cpdkit
