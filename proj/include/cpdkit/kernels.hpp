#pragma once

// Hot loops of the toolkit. The `omp` versions are OpenMP-parallel and are
// what the rest of the library calls; every output element is produced by a
// single thread with a fixed summation order, so results are bitwise
// identical for any thread count. The `reference` versions are plain serial
// loops written straight from the definitions and exist for tests and
// benchmarks.

#include <span>

#include "cpdkit/tensor.hpp"

namespace cpdkit::kernels {

namespace omp {

DenseTensor reconstruct(std::span<const Matrix> factors, const Shape& shape);

Matrix mttkrp(const DenseTensor& t, std::span<const Matrix> factors, std::size_t mode);

/// Sum of squared magnitudes of a - b over entries where mask is set (or all
/// entries if mask is empty).
double residual_sq(const DenseTensor& a, const DenseTensor& b, const std::vector<bool>& mask);

}  // namespace omp

namespace reference {

DenseTensor reconstruct(std::span<const Matrix> factors, const Shape& shape);

Matrix mttkrp(const DenseTensor& t, std::span<const Matrix> factors, std::size_t mode);

double residual_sq(const DenseTensor& a, const DenseTensor& b, const std::vector<bool>& mask);

}  // namespace reference

}  // namespace cpdkit::kernels
