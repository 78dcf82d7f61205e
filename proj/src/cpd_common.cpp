#include <cmath>

#include "cpd_internal.hpp"
#include "cpdkit/kernels.hpp"
#include "cpdkit/random.hpp"

namespace cpdkit {

std::string to_string(CpdAlgorithm a) {
  switch (a) {
    case CpdAlgorithm::Als: return "als";
    case CpdAlgorithm::GaussNewton: return "gn";
    case CpdAlgorithm::GaussNewtonWithAlsWarmstart: return "gn_als";
  }
  return "?";
}

std::string to_string(MissingDataStrategy s) {
  return s == MissingDataStrategy::ExpectationImputation ? "imputation" : "masked";
}

CpdAlgorithm parse_algorithm(const std::string& name) {
  if (name == "als") return CpdAlgorithm::Als;
  if (name == "gn") return CpdAlgorithm::GaussNewton;
  if (name == "gn_als") return CpdAlgorithm::GaussNewtonWithAlsWarmstart;
  throw Error("unknown algorithm '" + name + "' (expected als, gn or gn_als)");
}

MissingDataStrategy parse_missing_strategy(const std::string& name) {
  if (name == "imputation") return MissingDataStrategy::ExpectationImputation;
  if (name == "masked") return MissingDataStrategy::MaskedResiduals;
  throw Error("unknown missing-data strategy '" + name + "' (expected imputation or masked)");
}

void CpdOptions::validate() const {
  if (rank < 1) throw DomainError("rank must be >= 1");
  if (max_iterations < 1) throw DomainError("max_iterations must be >= 1");
  if (!(rel_objective_tol > 0.0)) throw DomainError("rel_objective_tol must be > 0");
  if (!(rel_step_tol > 0.0)) throw DomainError("rel_step_tol must be > 0");
}

CpdResult cpd(const IncompleteTensor& t, const CpdOptions& opts) {
  return opts.algorithm == CpdAlgorithm::Als ? cpd_als(t, opts) : cpd_nls(t, opts);
}

CpdModel normalize_model(const CpdModel& m) {
  for (std::size_t n = 0; n + 1 < m.order(); ++n)
    for (Eigen::Index r = 0; r < m.factors[n].cols(); ++r)
      if (m.factors[n].col(r).norm() == 0.0)
        throw DomainError("normalize_model: zero column " + std::to_string(r + 1) + " in mode " +
                          std::to_string(n + 1));
  return detail::normalize_lenient(m);
}

CpdModel init_model(const Shape& shape, std::size_t rank, std::uint64_t seed) {
  if (rank < 1) throw DomainError("rank must be >= 1");
  Rng rng(seed);
  std::vector<Matrix> factors;
  factors.reserve(shape.order());
  for (std::size_t n = 0; n < shape.order(); ++n) {
    Matrix u(shape[n], rank);
    for (Eigen::Index r = 0; r < u.cols(); ++r)
      for (Eigen::Index i = 0; i < u.rows(); ++i) u(i, r) = rng.complex_normal();
    factors.push_back(std::move(u));
  }
  return CpdModel(std::move(factors));
}

double cpd_objective(const IncompleteTensor& t, const CpdModel& m) {
  const auto x = reconstruct(m);
  if (x.shape() != t.shape()) throw DimensionError("model shape does not match tensor");
  return 0.5 * kernels::omp::residual_sq(t.tensor, x, t.mask);
}

std::vector<Matrix> cpd_gradient(const IncompleteTensor& t, const CpdModel& m) {
  if (m.shape() != t.shape()) throw DimensionError("model shape does not match tensor");
  std::vector<Matrix> g(m.order());
  if (t.complete()) {
    for (std::size_t n = 0; n < m.order(); ++n)
      g[n] = m.factors[n] * gramian_product_except(m.factors, n) - mttkrp(t.tensor, m.factors, n);
    return g;
  }
  auto residual = reconstruct(m);
  for (std::size_t k = 0; k < residual.size(); ++k)
    residual[k] = t.mask[k] ? residual[k] - t.tensor[k] : cplx{};
  for (std::size_t n = 0; n < m.order(); ++n) g[n] = mttkrp(residual, m.factors, n);
  return g;
}

namespace detail {

void check_problem(const IncompleteTensor& t, const CpdOptions& opts) {
  opts.validate();
  for (std::size_t k = 0; k < t.tensor.size(); ++k) {
    if (!t.mask[k]) continue;
    const auto v = t.tensor[k];
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
      throw DomainError("tensor contains non-finite values");
  }
  if (frobenius_norm(t) == 0.0) throw DomainError("tensor is zero on its observed entries");
}

CpdModel starting_model(const Shape& shape, const CpdOptions& opts) {
  if (!opts.initial) return init_model(shape, opts.rank, opts.seed);
  const auto& m = *opts.initial;
  if (m.shape() != shape) throw DimensionError("initial model shape does not match tensor");
  if (m.rank() != opts.rank) throw DimensionError("initial model rank does not match options");
  return m;
}

Matrix pinv_psd(const Matrix& w) {
  Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cutoff = s.size() ? 1e-12 * s(0) : 0.0;
  Eigen::VectorXd inv(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) inv(i) = s(i) > cutoff && s(i) > 0.0 ? 1.0 / s(i) : 0.0;
  return svd.matrixV() * inv.cast<cplx>().asDiagonal() * svd.matrixU().adjoint();
}

double relative_residual(const IncompleteTensor& t, const CpdModel& m, double t_norm) {
  const auto x = reconstruct(m);
  return std::sqrt(kernels::omp::residual_sq(t.tensor, x, t.mask)) / t_norm;
}

CpdModel normalize_lenient(const CpdModel& m) {
  CpdModel out = m;
  const std::size_t last = m.order() - 1;
  for (std::size_t n = 0; n < last; ++n) {
    auto& u = out.factors[n];
    for (Eigen::Index r = 0; r < u.cols(); ++r) {
      const double norm = u.col(r).norm();
      if (norm == 0.0) continue;
      Eigen::Index imax = 0;
      double best = -1.0;
      for (Eigen::Index i = 0; i < u.rows(); ++i) {
        const double a = std::abs(u(i, r));
        if (a > best) {
          best = a;
          imax = i;
        }
      }
      const cplx scale = norm * std::polar(1.0, std::arg(u(imax, r)));
      u.col(r) /= scale;
      u(imax, r) = cplx{u(imax, r).real(), 0.0};
      out.factors[last].col(r) *= scale;
    }
  }
  return out;
}

}  // namespace detail
}  // namespace cpdkit
