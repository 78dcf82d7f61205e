#include <vector>

#include "cpdkit/kernels.hpp"

namespace cpdkit::kernels::reference {

DenseTensor reconstruct(std::span<const Matrix> factors, const Shape& shape) {
  DenseTensor out(shape);
  std::vector<std::size_t> idx(shape.order());
  for (std::size_t lin = 0; lin < shape.element_count(); ++lin) {
    shape.unravel(lin, idx);
    cplx s{0.0, 0.0};
    for (Eigen::Index r = 0; r < factors.front().cols(); ++r) {
      cplx p{1.0, 0.0};
      for (std::size_t n = 0; n < shape.order(); ++n) p *= factors[n](idx[n], r);
      s += p;
    }
    out[lin] = s;
  }
  return out;
}

Matrix mttkrp(const DenseTensor& t, std::span<const Matrix> factors, std::size_t mode) {
  const auto& shape = t.shape();
  const auto rank = factors.front().cols();
  Matrix out = Matrix::Zero(shape[mode], rank);
  std::vector<std::size_t> idx(shape.order());
  for (std::size_t lin = 0; lin < shape.element_count(); ++lin) {
    shape.unravel(lin, idx);
    for (Eigen::Index r = 0; r < rank; ++r) {
      cplx p = t[lin];
      for (std::size_t n = 0; n < shape.order(); ++n)
        if (n != mode) p *= std::conj(factors[n](idx[n], r));
      out(idx[mode], r) += p;
    }
  }
  return out;
}

double residual_sq(const DenseTensor& a, const DenseTensor& b, const std::vector<bool>& mask) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k)
    if (mask.empty() || mask[k]) s += std::norm(a[k] - b[k]);
  return s;
}

}  // namespace cpdkit::kernels::reference
