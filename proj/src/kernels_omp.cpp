#include <omp.h>

#include <vector>

#include "cpdkit/kernels.hpp"

namespace cpdkit::kernels::omp {

namespace {

void check_factors(std::span<const Matrix> factors, const Shape& shape) {
  if (factors.size() != shape.order()) throw DimensionError("factor count does not match tensor order");
  const auto r = factors.front().cols();
  for (std::size_t n = 0; n < factors.size(); ++n) {
    if (factors[n].cols() != r) throw DimensionError("factor matrices must share the column count");
    if (static_cast<std::size_t>(factors[n].rows()) != shape[n])
      throw DimensionError("factor rows do not match tensor extent");
  }
}

}  // namespace

DenseTensor reconstruct(std::span<const Matrix> factors, const Shape& shape) {
  check_factors(factors, shape);
  const auto order = shape.order();
  const auto rank = factors.front().cols();
  const auto count = static_cast<std::int64_t>(shape.element_count());
  const auto& dims = shape.dims();
  DenseTensor out(shape);

  // Mode 0 is the contiguous one: handle whole mode-0 fibers per task so the
  // index bookkeeping is amortized.
  const auto fibre_len = static_cast<std::int64_t>(dims[0]);
  const std::int64_t fibres = count / fibre_len;
#pragma omp parallel
  {
    std::vector<std::size_t> idx(order, 0);
    std::vector<cplx> partial(rank);
#pragma omp for schedule(static)
    for (std::int64_t f = 0; f < fibres; ++f) {
      std::size_t rem = static_cast<std::size_t>(f);
      for (std::size_t n = 1; n < order; ++n) {
        idx[n] = rem % dims[n];
        rem /= dims[n];
      }
      for (Eigen::Index r = 0; r < rank; ++r) {
        cplx p{1.0, 0.0};
        for (std::size_t n = 1; n < order; ++n) p *= factors[n](idx[n], r);
        partial[r] = p;
      }
      const auto base = static_cast<std::size_t>(f * fibre_len);
      for (std::int64_t i = 0; i < fibre_len; ++i) {
        cplx s{0.0, 0.0};
        for (Eigen::Index r = 0; r < rank; ++r) s += factors[0](i, r) * partial[r];
        out[base + static_cast<std::size_t>(i)] = s;
      }
    }
  }
  return out;
}

Matrix mttkrp(const DenseTensor& t, std::span<const Matrix> factors, std::size_t mode) {
  const auto& shape = t.shape();
  if (mode >= shape.order()) throw DimensionError("mode out of range");
  if (factors.size() != shape.order()) throw DimensionError("factor count does not match tensor order");
  const auto rank = factors.front().cols();
  for (std::size_t n = 0; n < factors.size(); ++n) {
    if (factors[n].cols() != rank) throw DimensionError("factor matrices must share the column count");
    if (n != mode && static_cast<std::size_t>(factors[n].rows()) != shape[n])
      throw DimensionError("factor rows do not match tensor extent");
  }

  const Matrix kr = khatri_rao_except(factors, mode).conjugate();
  const std::size_t rows = shape[mode];
  std::size_t stride = 1;
  for (std::size_t k = 0; k < mode; ++k) stride *= shape[k];
  const std::size_t cols = shape.complement(mode);

  // Offset of unfolding column j within the linear layout, row 0.
  std::vector<std::size_t> offset(cols);
  for (std::size_t j = 0; j < cols; ++j) offset[j] = (j % stride) + (j / stride) * stride * rows;

  Matrix out(rows, rank);
  const auto tasks = static_cast<std::int64_t>(rows * static_cast<std::size_t>(rank));
#pragma omp parallel for schedule(static)
  for (std::int64_t task = 0; task < tasks; ++task) {
    const auto i = static_cast<std::size_t>(task) % rows;
    const auto r = static_cast<Eigen::Index>(static_cast<std::size_t>(task) / rows);
    cplx s{0.0, 0.0};
    const std::size_t row_base = i * stride;
    for (std::size_t j = 0; j < cols; ++j) s += t[row_base + offset[j]] * kr(j, r);
    out(i, r) = s;
  }
  return out;
}

double residual_sq(const DenseTensor& a, const DenseTensor& b, const std::vector<bool>& mask) {
  if (a.shape() != b.shape()) throw DimensionError("residual: shapes differ");
  if (!mask.empty() && mask.size() != a.size()) throw DimensionError("residual: mask length differs");
  // Fixed-size blocks reduced in order keep the sum independent of the
  // thread count.
  constexpr std::size_t block = 4096;
  const std::size_t n = a.size();
  const std::size_t blocks = (n + block - 1) / block;
  std::vector<double> partial(blocks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t bi = 0; bi < static_cast<std::int64_t>(blocks); ++bi) {
    const std::size_t lo = static_cast<std::size_t>(bi) * block;
    const std::size_t hi = std::min(n, lo + block);
    double s = 0.0;
    for (std::size_t k = lo; k < hi; ++k)
      if (mask.empty() || mask[k]) s += std::norm(a[k] - b[k]);
    partial[static_cast<std::size_t>(bi)] = s;
  }
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

}  // namespace cpdkit::kernels::omp
