#include <algorithm>
#include <cmath>

#include "cpd_internal.hpp"
#include "cpdkit/kernels.hpp"

namespace cpdkit {

namespace {

using Params = std::vector<Matrix>;

cplx dot(const Params& a, const Params& b) {
  cplx s{0.0, 0.0};
  for (std::size_t n = 0; n < a.size(); ++n) s += (a[n].conjugate().cwiseProduct(b[n])).sum();
  return s;
}

double norm(const Params& a) { return std::sqrt(std::max(0.0, dot(a, a).real())); }

Params combine(const Params& a, cplx alpha, const Params& b) {
  Params out(a.size());
  for (std::size_t n = 0; n < a.size(); ++n) out[n] = a[n] + alpha * b[n];
  return out;
}

Params scaled(const Params& a, cplx alpha) {
  Params out(a.size());
  for (std::size_t n = 0; n < a.size(); ++n) out[n] = alpha * a[n];
  return out;
}

// Gauss-Newton normal-equation operator J^H J at fixed factors U.
class GaussNewtonOperator {
 public:
  GaussNewtonOperator(const IncompleteTensor& t, const Params& factors, bool masked)
      : t_(t), factors_(factors), masked_(masked) {
    const std::size_t order = factors.size();
    grams_.reserve(order);
    for (const auto& u : factors) grams_.push_back(gramian(u));
    const double observed = masked ? static_cast<double>(t.observed_count()) / static_cast<double>(t.tensor.size()) : 1.0;
    precond_.reserve(order);
    for (std::size_t n = 0; n < order; ++n) precond_.push_back(detail::pinv_psd(observed * product_except(n, n)));
  }

  Params apply(const Params& p) const { return masked_ ? apply_masked(p) : apply_dense(p); }

  // Block-Jacobi: each mode block of J^H J is W_n (x) I.
  Params precondition(const Params& y) const {
    Params out(y.size());
    for (std::size_t n = 0; n < y.size(); ++n) out[n] = y[n] * precond_[n];
    return out;
  }

 private:
  Matrix product_except(std::size_t a, std::size_t b) const {
    const auto r = factors_.front().cols();
    Matrix w = Matrix::Ones(r, r);
    for (std::size_t k = 0; k < grams_.size(); ++k)
      if (k != a && k != b) w = w.cwiseProduct(grams_[k]);
    return w;
  }

  // (J^H J p)_n = P_n W_n + U_n sum_{m != n} (P_m^T conj U_m) o prod_{k != n,m} G_k
  Params apply_dense(const Params& p) const {
    const std::size_t order = factors_.size();
    std::vector<Matrix> cross(order);
    for (std::size_t m = 0; m < order; ++m) cross[m] = p[m].transpose() * factors_[m].conjugate();
    Params out(order);
    for (std::size_t n = 0; n < order; ++n) {
      out[n] = p[n] * product_except(n, n);
      Matrix acc = Matrix::Zero(cross[0].rows(), cross[0].cols());
      for (std::size_t m = 0; m < order; ++m)
        if (m != n) acc += cross[m].cwiseProduct(product_except(n, m));
      out[n] += factors_[n] * acc;
    }
    return out;
  }

  Params apply_masked(const Params& p) const {
    const std::size_t order = factors_.size();
    const auto& shape = t_.shape();
    DenseTensor jp(shape);
    Params swapped = factors_;
    for (std::size_t m = 0; m < order; ++m) {
      swapped[m] = p[m];
      const auto part = kernels::omp::reconstruct(swapped, shape);
      for (std::size_t k = 0; k < jp.size(); ++k) jp[k] += part[k];
      swapped[m] = factors_[m];
    }
    for (std::size_t k = 0; k < jp.size(); ++k)
      if (!t_.mask[k]) jp[k] = cplx{};
    Params out(order);
    for (std::size_t n = 0; n < order; ++n) out[n] = mttkrp(jp, factors_, n);
    return out;
  }

  const IncompleteTensor& t_;
  const Params& factors_;
  bool masked_;
  std::vector<Matrix> grams_;
  std::vector<Matrix> precond_;
};

// Preconditioned conjugate gradient on the Hermitian PSD system A x = b.
Params solve_cg(const GaussNewtonOperator& op, const Params& b, std::size_t max_iterations, double tol) {
  Params x(b.size());
  for (std::size_t n = 0; n < b.size(); ++n) x[n] = Matrix::Zero(b[n].rows(), b[n].cols());
  const double b_norm = norm(b);
  if (b_norm == 0.0) return x;
  Params r = b;
  Params z = op.precondition(r);
  Params p = z;
  double rz = dot(r, z).real();
  for (std::size_t k = 0; k < max_iterations; ++k) {
    const Params ap = op.apply(p);
    const double pap = dot(p, ap).real();
    if (!(pap > 0.0)) break;
    const double alpha = rz / pap;
    x = combine(x, alpha, p);
    r = combine(r, -alpha, ap);
    if (norm(r) <= tol * b_norm) break;
    z = op.precondition(r);
    const double rz_next = dot(r, z).real();
    if (!(rz_next > 0.0)) break;
    p = combine(z, rz_next / rz, p);
    rz = rz_next;
  }
  return x;
}

constexpr std::size_t kMaxCgIterations = 25;
constexpr double kCgTolerance = 1e-8;
constexpr double kMinTrustRadius = 1e-15;

struct GnRun {
  CpdModel model;
  CpdDiagnostics diagnostics;
};

GnRun run_gauss_newton(const IncompleteTensor& t, CpdModel model, const CpdOptions& opts) {
  const double t_norm = frobenius_norm(t);
  const bool complete = t.complete();
  const bool masked_operator = !complete && opts.missing_data_strategy == MissingDataStrategy::MaskedResiduals;

  GnRun run{std::move(model), {}};
  auto& diag = run.diagnostics;
  Params& x = run.model.factors;

  double f = cpd_objective(t, run.model);
  double rr = std::sqrt(2.0 * f) / t_norm;
  double radius = 0.3 * std::max(1.0, norm(x));

  for (std::size_t it = 0; it < opts.max_iterations; ++it) {
    diag.iterations = it + 1;
    const Params g = cpd_gradient(t, run.model);
    const double g_norm = norm(g);
    if (g_norm == 0.0) {
      diag.objective_trace.push_back(rr);
      diag.converged = true;
      break;
    }
    const GaussNewtonOperator op(t, x, masked_operator);
    const Params gn_step = solve_cg(op, scaled(g, -1.0), kMaxCgIterations, kCgTolerance);

    // Dogleg between the Cauchy point and the Gauss-Newton step.
    Params step;
    const double gn_norm = norm(gn_step);
    if (gn_norm <= radius) {
      step = gn_step;
    } else {
      const double curvature = dot(g, op.apply(g)).real();
      const double alpha = curvature > 0.0 ? g_norm * g_norm / curvature : radius / g_norm;
      const Params sd = scaled(g, -alpha);
      const double sd_norm = alpha * g_norm;
      if (sd_norm >= radius) {
        step = scaled(g, -radius / g_norm);
      } else {
        const Params d = combine(gn_step, -1.0, sd);
        const double a = dot(d, d).real();
        const double b = 2.0 * dot(sd, d).real();
        const double c = sd_norm * sd_norm - radius * radius;
        const double tau = (-b + std::sqrt(std::max(0.0, b * b - 4.0 * a * c))) / (2.0 * a);
        step = combine(sd, tau, d);
      }
    }
    const double step_norm = norm(step);
    const double predicted = -(dot(step, g).real() + 0.5 * dot(step, op.apply(step)).real());

    CpdModel trial{combine(x, 1.0, step)};
    const double f_trial = cpd_objective(t, trial);
    const double rho = predicted > 0.0 ? (f - f_trial) / predicted : -1.0;
    const bool accepted = std::isfinite(f_trial) && f_trial < f;

    if (rho < 0.25 || !accepted)
      radius = 0.25 * step_norm;
    else if (rho > 0.75)
      radius = std::max(radius, 2.0 * step_norm);

    const double step_limit = opts.rel_step_tol * norm(x);
    if (accepted) {
      const double rr_next = std::sqrt(2.0 * f_trial) / t_norm;
      const double improvement = rr - rr_next;
      run.model = std::move(trial);
      f = f_trial;
      rr = rr_next;
      diag.objective_trace.push_back(rr);
      if (improvement < opts.rel_objective_tol || step_norm <= step_limit) {
        diag.converged = true;
        break;
      }
    } else {
      diag.objective_trace.push_back(rr);
      if (step_norm <= step_limit) {
        diag.converged = true;
        break;
      }
    }
    if (radius < kMinTrustRadius) break;
  }
  diag.final_relative_residual = diag.objective_trace.empty() ? rr : diag.objective_trace.back();
  return run;
}

}  // namespace

CpdResult cpd_nls(const IncompleteTensor& t, const CpdOptions& opts) {
  detail::check_problem(t, opts);
  CpdModel start = detail::starting_model(t.shape(), opts);
  std::vector<double> warm_trace;
  std::size_t warm_iterations = 0;
  if (opts.algorithm == CpdAlgorithm::GaussNewtonWithAlsWarmstart && opts.warmstart_sweeps > 0) {
    auto warm = detail::run_als(t, std::move(start), opts, opts.warmstart_sweeps);
    start = std::move(warm.model);
    warm_trace = std::move(warm.diagnostics.objective_trace);
    warm_iterations = warm.diagnostics.iterations;
  }
  auto run = run_gauss_newton(t, std::move(start), opts);
  auto& diag = run.diagnostics;
  diag.iterations += warm_iterations;
  diag.objective_trace.insert(diag.objective_trace.begin(), warm_trace.begin(), warm_trace.end());
  return {detail::normalize_lenient(run.model), std::move(diag)};
}

CpdResult cpd_nls(const DenseTensor& t, const CpdOptions& opts) { return cpd_nls(IncompleteTensor(t), opts); }

}  // namespace cpdkit
