#pragma once

// Test-only generators and brute-force oracles. Nothing here calls the
// library kernels it is used to check.

#include <cstdint>
#include <vector>

#include "cpdkit/random.hpp"
#include "cpdkit/tensor.hpp"

namespace testutil {

using cpdkit::cplx;
using cpdkit::Matrix;

inline Matrix random_matrix(cpdkit::Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.complex_normal();
  return m;
}

inline cpdkit::DenseTensor random_tensor(cpdkit::Rng& rng, const std::vector<std::size_t>& dims) {
  cpdkit::DenseTensor t{cpdkit::Shape(dims)};
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = rng.complex_normal();
  return t;
}

inline cpdkit::CpdModel random_model(cpdkit::Rng& rng, const std::vector<std::size_t>& dims, std::size_t rank) {
  std::vector<Matrix> f;
  for (auto d : dims) f.push_back(random_matrix(rng, d, rank));
  return cpdkit::CpdModel(std::move(f));
}

inline std::vector<std::size_t> random_dims(cpdkit::Rng& rng, std::size_t order, std::size_t max_extent) {
  std::vector<std::size_t> d(order);
  for (auto& x : d) x = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(max_extent));
  return d;
}

// Odometer over all multi-indices, first index fastest.
inline bool next_index(std::vector<std::size_t>& idx, const std::vector<std::size_t>& dims) {
  for (std::size_t n = 0; n < dims.size(); ++n) {
    if (++idx[n] < dims[n]) return true;
    idx[n] = 0;
  }
  return false;
}

inline std::size_t linear_of(const std::vector<std::size_t>& idx, const std::vector<std::size_t>& dims) {
  std::size_t lin = 0, stride = 1;
  for (std::size_t n = 0; n < dims.size(); ++n) {
    lin += idx[n] * stride;
    stride *= dims[n];
  }
  return lin;
}

inline std::vector<cplx> naive_reconstruct(const cpdkit::CpdModel& m) {
  std::vector<std::size_t> dims;
  for (const auto& u : m.factors) dims.push_back(static_cast<std::size_t>(u.rows()));
  std::size_t count = 1;
  for (auto d : dims) count *= d;
  std::vector<cplx> out(count);
  std::vector<std::size_t> idx(dims.size(), 0);
  do {
    cplx s = 0.0;
    for (Eigen::Index r = 0; r < m.factors[0].cols(); ++r) {
      cplx p = 1.0;
      for (std::size_t n = 0; n < dims.size(); ++n) p *= m.factors[n](idx[n], r);
      s += p;
    }
    out[linear_of(idx, dims)] = s;
  } while (next_index(idx, dims));
  return out;
}

// M(i, r) = sum over entries with i_mode = i of T * prod_{n != mode} conj(U_n(i_n, r)).
inline Matrix naive_mttkrp(const cpdkit::DenseTensor& t, const std::vector<Matrix>& factors, std::size_t mode) {
  const auto& dims = t.shape().dims();
  const auto rank = factors[0].cols();
  Matrix out = Matrix::Zero(dims[mode], rank);
  std::vector<std::size_t> idx(dims.size(), 0);
  do {
    for (Eigen::Index r = 0; r < rank; ++r) {
      cplx p = t[linear_of(idx, dims)];
      for (std::size_t n = 0; n < dims.size(); ++n)
        if (n != mode) p *= std::conj(factors[n](idx[n], r));
      out(idx[mode], r) += p;
    }
  } while (next_index(idx, dims));
  return out;
}

inline double rel_diff(std::span<const cplx> a, std::span<const cplx> b) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    num += std::norm(a[k] - b[k]);
    den += std::norm(b[k]);
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  const double den = b.norm();
  return den > 0.0 ? (a - b).norm() / den : (a - b).norm();
}

}  // namespace testutil
