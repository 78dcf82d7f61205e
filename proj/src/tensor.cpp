#include "cpdkit/tensor.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "cpdkit/kernels.hpp"

namespace cpdkit {

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw DimensionError("shape must have order >= 1");
  count_ = 1;
  for (auto d : dims_) {
    if (d == 0) throw DimensionError("shape extents must be >= 1");
    if (count_ > std::numeric_limits<std::size_t>::max() / d)
      throw DimensionError("shape element count overflows");
    count_ *= d;
  }
}

std::size_t Shape::linear(std::span<const std::size_t> index) const {
  if (index.size() != dims_.size()) throw DimensionError("index order mismatch");
  std::size_t lin = 0, stride = 1;
  for (std::size_t n = 0; n < dims_.size(); ++n) {
    if (index[n] >= dims_[n]) throw DimensionError("index out of range");
    lin += index[n] * stride;
    stride *= dims_[n];
  }
  return lin;
}

void Shape::unravel(std::size_t linear, std::span<std::size_t> index) const {
  for (std::size_t n = 0; n < dims_.size(); ++n) {
    index[n] = linear % dims_[n];
    linear /= dims_[n];
  }
}

std::size_t Shape::complement(std::size_t mode) const {
  if (mode >= dims_.size()) throw DimensionError("mode out of range");
  return count_ / dims_[mode];
}

std::string Shape::str() const {
  std::ostringstream os;
  for (std::size_t n = 0; n < dims_.size(); ++n) os << (n ? "x" : "") << dims_[n];
  return os.str();
}

DenseTensor::DenseTensor(Shape shape)
    : shape_(std::move(shape)), values_(shape_.element_count(), cplx{0.0, 0.0}) {}

DenseTensor::DenseTensor(Shape shape, std::vector<cplx> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_.element_count())
    throw DimensionError("value count does not match shape " + shape_.str());
}

cplx& DenseTensor::at(std::initializer_list<std::size_t> index) {
  return values_[shape_.linear(std::span(index.begin(), index.size()))];
}

const cplx& DenseTensor::at(std::initializer_list<std::size_t> index) const {
  return values_[shape_.linear(std::span(index.begin(), index.size()))];
}

IncompleteTensor::IncompleteTensor(DenseTensor t, std::vector<bool> m)
    : tensor(std::move(t)), mask(std::move(m)) {
  if (mask.size() != tensor.size()) throw DimensionError("mask length does not match tensor");
}

IncompleteTensor::IncompleteTensor(DenseTensor t)
    : tensor(std::move(t)), mask(tensor.size(), true) {}

std::size_t IncompleteTensor::observed_count() const {
  std::size_t n = 0;
  for (bool b : mask) n += b;
  return n;
}

CpdModel::CpdModel(std::vector<Matrix> f) : factors(std::move(f)) {
  if (factors.empty()) throw DimensionError("model needs at least one factor");
  const auto r = factors.front().cols();
  for (const auto& u : factors) {
    if (u.rows() < 1 || u.cols() < 1) throw DimensionError("factor matrices must be non-empty");
    if (u.cols() != r) throw DimensionError("factor matrices must share the column count");
  }
}

Shape CpdModel::shape() const {
  std::vector<std::size_t> dims;
  dims.reserve(factors.size());
  for (const auto& u : factors) dims.push_back(static_cast<std::size_t>(u.rows()));
  return Shape(std::move(dims));
}

namespace {

// Column index of the mode-n unfolding for every linear position.
struct UnfoldMap {
  std::size_t row_stride = 1;  // linear stride of mode n
  std::size_t rows = 0;
  std::size_t cols = 0;
};

UnfoldMap unfold_map(const Shape& shape, std::size_t mode) {
  if (mode >= shape.order()) throw DimensionError("mode out of range");
  UnfoldMap m;
  for (std::size_t k = 0; k < mode; ++k) m.row_stride *= shape[k];
  m.rows = shape[mode];
  m.cols = shape.complement(mode);
  return m;
}

}  // namespace

Matrix unfold(const DenseTensor& t, std::size_t mode) {
  const auto map = unfold_map(t.shape(), mode);
  Matrix out(map.rows, map.cols);
  // Linear index = lo + i * stride + hi * stride * rows, column = lo + hi * stride.
  const std::size_t stride = map.row_stride;
  const std::size_t outer = map.cols / stride;
  for (std::size_t hi = 0; hi < outer; ++hi)
    for (std::size_t i = 0; i < map.rows; ++i)
      for (std::size_t lo = 0; lo < stride; ++lo)
        out(i, lo + hi * stride) = t[lo + i * stride + hi * stride * map.rows];
  return out;
}

DenseTensor fold(const Matrix& m, std::size_t mode, const Shape& shape) {
  const auto map = unfold_map(shape, mode);
  if (static_cast<std::size_t>(m.rows()) != map.rows || static_cast<std::size_t>(m.cols()) != map.cols)
    throw DimensionError("matrix does not fold into shape " + shape.str());
  DenseTensor t(shape);
  const std::size_t stride = map.row_stride;
  const std::size_t outer = map.cols / stride;
  for (std::size_t hi = 0; hi < outer; ++hi)
    for (std::size_t i = 0; i < map.rows; ++i)
      for (std::size_t lo = 0; lo < stride; ++lo)
        t[lo + i * stride + hi * stride * map.rows] = m(i, lo + hi * stride);
  return t;
}

Matrix khatri_rao(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw DimensionError("khatri_rao: column counts differ");
  Matrix out(a.rows() * b.rows(), a.cols());
  for (Eigen::Index r = 0; r < a.cols(); ++r)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      out.col(r).segment(i * b.rows(), b.rows()) = a(i, r) * b.col(r);
  return out;
}

Matrix khatri_rao_except(std::span<const Matrix> factors, std::size_t skip_mode) {
  if (skip_mode >= factors.size()) throw DimensionError("mode out of range");
  Matrix acc;
  bool first = true;
  for (std::size_t m = 0; m < factors.size(); ++m) {
    if (m == skip_mode) continue;
    acc = first ? factors[m] : khatri_rao(factors[m], acc);
    first = false;
  }
  if (first) acc = Matrix::Ones(1, factors[skip_mode].cols());
  return acc;
}

DenseTensor outer_product(std::span<const Vector> vectors) {
  if (vectors.empty()) throw DimensionError("outer_product needs at least one vector");
  std::vector<Matrix> cols;
  cols.reserve(vectors.size());
  for (const auto& v : vectors) cols.emplace_back(v);
  std::vector<std::size_t> dims;
  for (const auto& v : vectors) dims.push_back(static_cast<std::size_t>(v.size()));
  return kernels::omp::reconstruct(cols, Shape(std::move(dims)));
}

DenseTensor reconstruct(const CpdModel& model) {
  return kernels::omp::reconstruct(model.factors, model.shape());
}

DenseTensor mode_n_product(const DenseTensor& t, const Matrix& m, std::size_t mode) {
  if (mode >= t.order()) throw DimensionError("mode out of range");
  if (static_cast<std::size_t>(m.cols()) != t.shape()[mode])
    throw DimensionError("mode_n_product: matrix columns must equal the mode extent");
  auto dims = t.shape().dims();
  dims[mode] = static_cast<std::size_t>(m.rows());
  return fold(m * unfold(t, mode), mode, Shape(std::move(dims)));
}

DenseTensor identity_tensor(std::size_t order, std::size_t rank) {
  DenseTensor t(Shape(std::vector<std::size_t>(order, rank)));
  std::size_t diag_stride = 0, s = 1;
  for (std::size_t n = 0; n < order; ++n, s *= rank) diag_stride += s;
  for (std::size_t r = 0; r < rank; ++r) t[r * diag_stride] = 1.0;
  return t;
}

double frobenius_norm(const DenseTensor& t) {
  double s = 0.0;
  for (const auto& v : t.values()) s += std::norm(v);
  return std::sqrt(s);
}

double frobenius_norm(const IncompleteTensor& t) {
  double s = 0.0;
  const auto values = t.tensor.values();
  for (std::size_t i = 0; i < values.size(); ++i)
    if (t.mask[i]) s += std::norm(values[i]);
  return std::sqrt(s);
}

DenseTensor subtract(const DenseTensor& a, const DenseTensor& b) {
  if (a.shape() != b.shape()) throw DimensionError("subtract: shapes differ");
  DenseTensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Matrix gramian(const Matrix& u) { return u.transpose() * u.conjugate(); }

Matrix gramian_product_except(std::span<const Matrix> factors, std::size_t skip_mode) {
  if (skip_mode >= factors.size()) throw DimensionError("mode out of range");
  const auto r = factors[skip_mode].cols();
  Matrix w = Matrix::Ones(r, r);
  for (std::size_t m = 0; m < factors.size(); ++m)
    if (m != skip_mode) w = w.cwiseProduct(gramian(factors[m]));
  return w;
}

Matrix mttkrp(const DenseTensor& t, std::span<const Matrix> factors, std::size_t mode) {
  return kernels::omp::mttkrp(t, factors, mode);
}

}  // namespace cpdkit
