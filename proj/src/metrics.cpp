#include "cpdkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

namespace cpdkit {

std::vector<std::size_t> hungarian(const Eigen::MatrixXd& cost) {
  const auto n = static_cast<std::size_t>(cost.rows());
  const auto m = static_cast<std::size_t>(cost.cols());
  if (n > m) throw DimensionError("hungarian: more rows than columns");
  constexpr double inf = std::numeric_limits<double>::infinity();
  // Potentials method, 1-based with a virtual row/column 0.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> match(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (match[j] != 0) assignment[match[j] - 1] = j - 1;
  return assignment;
}

CpdErrReport cpderr(const CpdModel& truth, const CpdModel& estimate) {
  if (truth.order() != estimate.order()) throw DimensionError("cpderr: models have different mode counts");
  for (std::size_t n = 0; n < truth.order(); ++n)
    if (truth.factors[n].rows() != estimate.factors[n].rows())
      throw DimensionError("cpderr: row count mismatch in mode " + std::to_string(n + 1));

  const auto r_truth = static_cast<Eigen::Index>(truth.rank());
  const auto r_est = static_cast<Eigen::Index>(estimate.rank());
  const auto cols = std::max(r_truth, r_est);

  // Congruence of truth column r with estimate column c, in -log form.
  // Estimate columns past r_est are zero padding.
  constexpr double floor = 1e-300;
  Eigen::MatrixXd cost = Eigen::MatrixXd::Constant(r_truth, cols, -std::log(floor));
  for (Eigen::Index r = 0; r < r_truth; ++r) {
    for (Eigen::Index c = 0; c < r_est; ++c) {
      double congruence = 1.0;
      for (std::size_t n = 0; n < truth.order(); ++n) {
        const auto& u = truth.factors[n];
        const auto& v = estimate.factors[n];
        const double denom = u.col(r).norm() * v.col(c).norm();
        congruence *= denom > 0.0 ? std::abs(u.col(r).dot(v.col(c))) / denom : 0.0;
      }
      cost(r, c) = -std::log(std::max(congruence, floor));
    }
  }
  const auto assignment = hungarian(cost);

  CpdErrReport report;
  report.permutation.resize(static_cast<std::size_t>(r_truth));
  std::vector<bool> used(static_cast<std::size_t>(r_est), false);
  for (Eigen::Index r = 0; r < r_truth; ++r) {
    const auto c = assignment[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(c) < r_est) {
      report.permutation[static_cast<std::size_t>(r)] = c;
      used[c] = true;
    }
  }
  for (Eigen::Index c = 0; c < r_est; ++c)
    if (!used[static_cast<std::size_t>(c)]) report.dropped_estimate_columns.push_back(static_cast<std::size_t>(c));

  std::vector<Matrix> aligned;
  for (std::size_t n = 0; n < truth.order(); ++n) {
    const auto& u = truth.factors[n];
    const auto& v = estimate.factors[n];
    Matrix a = Matrix::Zero(u.rows(), r_truth);
    Vector d = Vector::Zero(r_truth);
    for (Eigen::Index r = 0; r < r_truth; ++r) {
      const auto& match = report.permutation[static_cast<std::size_t>(r)];
      if (!match) continue;
      const auto est_col = v.col(static_cast<Eigen::Index>(*match));
      const double self = est_col.squaredNorm();
      d(r) = self > 0.0 ? est_col.dot(u.col(r)) / self : cplx{};
      a.col(r) = d(r) * est_col;
    }
    const double u_norm = u.norm();
    report.per_mode_relative_error.push_back(u_norm > 0.0 ? (u - a).norm() / u_norm : (a.norm() > 0.0 ? 1.0 : 0.0));
    report.per_mode_scaling.push_back(std::move(d));
    aligned.push_back(std::move(a));
  }
  report.aligned_estimate = CpdModel(std::move(aligned));
  return report;
}

Eigen::MatrixXd align_sources(const Eigen::MatrixXd& truth_sources, const Matrix& estimate_last_mode,
                              const CpdErrReport& report) {
  if (report.per_mode_scaling.empty()) throw DimensionError("align_sources: empty report");
  if (truth_sources.rows() != estimate_last_mode.rows())
    throw DimensionError("align_sources: sample counts differ");
  if (static_cast<std::size_t>(truth_sources.cols()) != report.permutation.size())
    throw DimensionError("align_sources: truth source count does not match the report");
  const auto& d = report.per_mode_scaling.back();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(truth_sources.rows(), truth_sources.cols());
  for (Eigen::Index r = 0; r < truth_sources.cols(); ++r) {
    const auto& match = report.permutation[static_cast<std::size_t>(r)];
    if (!match) continue;
    if (static_cast<Eigen::Index>(*match) >= estimate_last_mode.cols())
      throw DimensionError("align_sources: estimate has fewer columns than the report expects");
    out.col(r) = (d(r) * estimate_last_mode.col(static_cast<Eigen::Index>(*match))).real();
  }
  return out;
}

PearsonResult pearson(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size()) throw DimensionError("pearson: lengths differ");
  const auto k = x.size();
  if (k < 3) throw DomainError("pearson: need at least 3 samples");
  const Eigen::VectorXd xc = x.array() - x.mean();
  const Eigen::VectorXd yc = y.array() - y.mean();
  const double sxx = xc.squaredNorm();
  const double syy = yc.squaredNorm();
  if (sxx == 0.0 || syy == 0.0) throw DomainError("pearson: constant input, correlation undefined");
  double r = xc.dot(yc) / std::sqrt(sxx * syy);
  r = std::clamp(r, -1.0, 1.0);

  PearsonResult out;
  out.r = r;
  const double dof = static_cast<double>(k - 2);
  const double one_minus = 1.0 - r * r;
  if (one_minus <= 0.0) {
    out.p = 0.0;
  } else {
    const double t = std::abs(r) * std::sqrt(dof / one_minus);
    boost::math::students_t dist(dof);
    out.p = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, t)), 0.0, 1.0);
  }
  return out;
}

CorrelationReport correlate_sources(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& aligned) {
  if (truth.rows() != aligned.rows() || truth.cols() != aligned.cols())
    throw DimensionError("correlate_sources: shapes differ");
  CorrelationReport rep;
  rep.sample_count = static_cast<std::size_t>(truth.rows());
  for (Eigen::Index r = 0; r < truth.cols(); ++r) {
    // A padded (unmatched) source aligns to zeros; its correlation is undefined.
    PearsonResult res{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    try {
      res = pearson(truth.col(r), aligned.col(r));
    } catch (const DomainError&) {
    }
    rep.per_source_r.push_back(res.r);
    rep.per_source_p.push_back(res.p);
  }
  return rep;
}

}  // namespace cpdkit
