#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cpdkit {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent extents, ranks or mode indices.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input that is numerically unusable (zero tensor, NaN, zero column, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Ordered list of positive extents. Modes are 0-based in the API.
class Shape {
 public:
  Shape() = default;
  explicit Shape(std::vector<std::size_t> dims);
  Shape(std::initializer_list<std::size_t> dims)
      : Shape(std::vector<std::size_t>(dims)) {}

  std::size_t order() const { return dims_.size(); }
  std::size_t operator[](std::size_t mode) const { return dims_.at(mode); }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t element_count() const { return count_; }

  /// Linear position of a multi-index, first index fastest.
  std::size_t linear(std::span<const std::size_t> index) const;
  /// Inverse of linear().
  void unravel(std::size_t linear, std::span<std::size_t> index) const;

  /// Product of all extents except `mode`.
  std::size_t complement(std::size_t mode) const;

  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;

 private:
  std::vector<std::size_t> dims_;
  std::size_t count_ = 0;
};

/// Dense complex tensor stored first-index-fastest.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(Shape shape);
  DenseTensor(Shape shape, std::vector<cplx> values);

  const Shape& shape() const { return shape_; }
  std::size_t order() const { return shape_.order(); }
  std::size_t size() const { return values_.size(); }

  std::span<const cplx> values() const { return values_; }
  std::span<cplx> values() { return values_; }

  cplx& operator[](std::size_t linear) { return values_[linear]; }
  const cplx& operator[](std::size_t linear) const { return values_[linear]; }

  cplx& at(std::initializer_list<std::size_t> index);
  const cplx& at(std::initializer_list<std::size_t> index) const;

  friend bool operator==(const DenseTensor&, const DenseTensor&) = default;

 private:
  Shape shape_;
  std::vector<cplx> values_;
};

/// Dense tensor plus observation mask (true = observed).
struct IncompleteTensor {
  DenseTensor tensor;
  std::vector<bool> mask;

  IncompleteTensor() = default;
  IncompleteTensor(DenseTensor t, std::vector<bool> m);
  /// Fully observed view of a dense tensor.
  explicit IncompleteTensor(DenseTensor t);

  const Shape& shape() const { return tensor.shape(); }
  std::size_t observed_count() const;
  std::size_t missing_count() const { return mask.size() - observed_count(); }
  bool complete() const { return observed_count() == mask.size(); }

  friend bool operator==(const IncompleteTensor&, const IncompleteTensor&) = default;
};

/// One factor matrix per mode, all sharing the column count R.
struct CpdModel {
  std::vector<Matrix> factors;

  CpdModel() = default;
  explicit CpdModel(std::vector<Matrix> f);

  std::size_t order() const { return factors.size(); }
  std::size_t rank() const { return factors.empty() ? 0 : factors.front().cols(); }
  Shape shape() const;
};

// Mode-n matricization (Kolda-Bader ordering): column j enumerates the
// remaining indices with the lowest remaining mode fastest.
Matrix unfold(const DenseTensor& t, std::size_t mode);
DenseTensor fold(const Matrix& m, std::size_t mode, const Shape& shape);

/// Columnwise Kronecker product, rows of `b` varying fastest.
Matrix khatri_rao(const Matrix& a, const Matrix& b);

/// khatri_rao(U_{N-1}, ..., U_0) skipping `skip_mode`, so that
/// unfold(reconstruct(M), n) == U_n * khatri_rao_except(M.factors, n)^T.
Matrix khatri_rao_except(std::span<const Matrix> factors, std::size_t skip_mode);

DenseTensor outer_product(std::span<const Vector> vectors);

DenseTensor reconstruct(const CpdModel& model);

/// fold(m * unfold(t, mode), ...): replaces extent `mode` by m.rows().
DenseTensor mode_n_product(const DenseTensor& t, const Matrix& m, std::size_t mode);

DenseTensor identity_tensor(std::size_t order, std::size_t rank);

double frobenius_norm(const DenseTensor& t);
/// Norm over observed entries only.
double frobenius_norm(const IncompleteTensor& t);

/// Elementwise a - b.
DenseTensor subtract(const DenseTensor& a, const DenseTensor& b);

/// Gramian in the convention used by mttkrp: U^T * conj(U).
Matrix gramian(const Matrix& u);

/// Hadamard product of gramian(factors[m]) for all m != skip_mode.
Matrix gramian_product_except(std::span<const Matrix> factors, std::size_t skip_mode);

/// unfold(t, mode) * conj(khatri_rao_except(factors, mode)).
///
/// The conjugate makes this the adjoint of the CPD model map, so the least
/// squares update for U_n is mttkrp(t, U, n) * W_n^{-1} with
/// W_n = gramian_product_except(U, n). Real data is unaffected.
Matrix mttkrp(const DenseTensor& t, std::span<const Matrix> factors, std::size_t mode);

}  // namespace cpdkit
