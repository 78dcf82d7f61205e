#include <doctest.h>

#include <cmath>

#include "cpdkit/tensor.hpp"
#include "test_util.hpp"

using namespace cpdkit;
using testutil::rel_diff;

namespace {

DenseTensor iota_222() {
  std::vector<cplx> v;
  for (int k = 1; k <= 8; ++k) v.emplace_back(k, 0.0);
  return DenseTensor(Shape{2, 2, 2}, v);
}

}  // namespace

TEST_CASE("shape validation") {
  CHECK_THROWS_AS(Shape(std::vector<std::size_t>{}), DimensionError);
  CHECK_THROWS_AS(Shape({3, 0, 2}), DimensionError);
  CHECK_THROWS_AS(Shape({std::size_t(1) << 40, std::size_t(1) << 40}), DimensionError);
  CHECK(Shape({10, 10, 15}).element_count() == 1500);
  CHECK_THROWS_AS(DenseTensor(Shape{2, 2}, std::vector<cplx>(3)), DimensionError);
}

TEST_CASE("linear index is first-index-fastest and bijective") {
  const Shape s{3, 4, 2};
  std::vector<bool> seen(s.element_count(), false);
  std::vector<std::size_t> idx(3, 0);
  do {
    const auto lin = s.linear(idx);
    CHECK(lin == idx[0] + 3 * (idx[1] + 4 * idx[2]));
    CHECK_FALSE(seen[lin]);
    seen[lin] = true;
    std::vector<std::size_t> back(3);
    s.unravel(lin, back);
    CHECK(back == idx);
  } while (testutil::next_index(idx, s.dims()));
}

TEST_CASE("unfold of the 2x2x2 iota tensor") {
  const auto t = iota_222();
  const Matrix m1 = unfold(t, 0);
  Matrix expected(2, 4);
  expected << 1, 3, 5, 7, 2, 4, 6, 8;
  CHECK(m1 == expected);
  CHECK(fold(m1, 0, t.shape()) == t);

  // Mode 2: fibres t(i,:,k), columns ordered by (i, k) with i fastest.
  Matrix e2(2, 4);
  e2 << 1, 2, 5, 6, 3, 4, 7, 8;
  CHECK(unfold(t, 1) == e2);
  Matrix e3(2, 4);
  e3 << 1, 2, 3, 4, 5, 6, 7, 8;
  CHECK(unfold(t, 2) == e3);
}

TEST_CASE("unfold edge cases and errors") {
  const DenseTensor one(Shape{1, 1, 1}, {cplx(2.5, -1.0)});
  for (std::size_t n = 0; n < 3; ++n) {
    const auto m = unfold(one, n);
    CHECK(m.rows() == 1);
    CHECK(m.cols() == 1);
    CHECK(m(0, 0) == cplx(2.5, -1.0));
  }
  CHECK_THROWS_AS(unfold(one, 3), DimensionError);
  CHECK_THROWS_AS(fold(Matrix::Zero(2, 3), 0, Shape{2, 2, 2}), DimensionError);
  const auto zero = fold(Matrix::Zero(2, 4), 1, Shape{2, 2, 2});
  CHECK(frobenius_norm(zero) == 0.0);
}

TEST_CASE("fold inverts unfold on random shapes up to order 4") {
  Rng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t order = 1 + static_cast<std::size_t>(rng.uniform() * 4);
    const auto dims = testutil::random_dims(rng, order, 5);
    const auto t = testutil::random_tensor(rng, dims);
    for (std::size_t n = 0; n < order; ++n) CHECK(fold(unfold(t, n), n, t.shape()) == t);
  }
}

TEST_CASE("khatri_rao") {
  Matrix a(2, 1), b(2, 1);
  a << 1, 2;
  b << 3, 4;
  Matrix expected(4, 1);
  expected << 3, 4, 6, 8;
  CHECK(khatri_rao(a, b) == expected);

  Matrix e1 = Matrix::Identity(3, 3), e2 = Matrix::Identity(2, 3);
  const auto kr = khatri_rao(e1, e2);
  CHECK(kr.rows() == 6);
  // Column r is e_r (x) e_r, i.e. a single one at r * 2 + r for r < 2.
  CHECK(kr(0, 0) == 1.0);
  CHECK(kr(3, 1) == 1.0);
  CHECK(kr.col(2).norm() == 0.0);

  CHECK_THROWS_AS(khatri_rao(Matrix::Ones(2, 2), Matrix::Ones(2, 3)), DimensionError);
}

TEST_CASE("khatri_rao with R=1 is vec of the outer product b a^T") {
  Rng rng(3);
  const auto a = testutil::random_matrix(rng, 3, 1);
  const auto b = testutil::random_matrix(rng, 4, 1);
  const Vector vb = b.col(0), va = a.col(0);
  const std::vector<Vector> vs{vb, va};
  const auto outer = outer_product(vs);  // entry (i, j) = b_i a_j
  const auto kr = khatri_rao(a, b);
  for (std::size_t k = 0; k < outer.size(); ++k) CHECK(std::abs(kr(static_cast<Eigen::Index>(k), 0) - outer[k]) < 1e-15);
}

TEST_CASE("outer_product") {
  Vector x(2), y(2);
  x << 1, 2;
  y << 3, 4;
  const std::vector<Vector> xy{x, y};
  const auto t = outer_product(xy);
  CHECK(t.at({0, 0}) == 3.0);
  CHECK(t.at({0, 1}) == 4.0);
  CHECK(t.at({1, 0}) == 6.0);
  CHECK(t.at({1, 1}) == 8.0);

  Vector z = Vector::Zero(3);
  const std::vector<Vector> xz{x, z};
  CHECK(frobenius_norm(outer_product(xz)) == 0.0);

  Vector u(2), v(3), w(1);
  u << 1, 2;
  v << 1, 0, 1;
  w << 2;
  const std::vector<Vector> uvw{u, v, w};
  const auto t3 = outer_product(uvw);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(t3.at({i, j, 0}) == u(i) * v(j) * w(0));
}

TEST_CASE("reconstruct matches the brute-force sum of outer products") {
  Rng rng(5);
  const auto m = testutil::random_model(rng, {3, 4, 5}, 2);
  const auto x = reconstruct(m);
  CHECK(rel_diff(x.values(), testutil::naive_reconstruct(m)) < 1e-14);

  // Two terms: X1 + X2.
  std::vector<Vector> c1, c2;
  for (const auto& u : m.factors) {
    c1.emplace_back(u.col(0));
    c2.emplace_back(u.col(1));
  }
  const auto x1 = outer_product(c1), x2 = outer_product(c2);
  for (std::size_t k = 0; k < x.size(); ++k) CHECK(std::abs(x[k] - (x1[k] + x2[k])) < 1e-13);

  const CpdModel r1({m.factors[0].col(0), m.factors[1].col(0), m.factors[2].col(0)});
  CHECK(reconstruct(r1) == x1);
}

TEST_CASE("mode_n_product") {
  const auto t = iota_222();
  CHECK(mode_n_product(t, Matrix::Identity(2, 2), 1) == t);
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  const auto p = mode_n_product(t, m, 0);
  const double expected[] = {5, 11, 11, 25, 17, 39, 23, 53};
  for (std::size_t k = 0; k < 8; ++k) CHECK(p[k] == cplx(expected[k], 0.0));
  const auto wide = mode_n_product(t, Matrix::Ones(3, 2), 2);
  CHECK(wide.shape() == Shape{2, 2, 3});
  CHECK_THROWS_AS(mode_n_product(t, Matrix::Ones(2, 3), 0), DimensionError);
}

TEST_CASE("identity_tensor") {
  const auto i2 = identity_tensor(2, 3);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) CHECK(i2.at({a, b}) == (a == b ? 1.0 : 0.0));
  const auto i3 = identity_tensor(3, 2);
  CHECK(i3.at({0, 0, 0}) == 1.0);
  CHECK(i3.at({1, 1, 1}) == 1.0);
  double sum = 0.0;
  for (const auto& v : i3.values()) sum += v.real();
  CHECK(sum == 2.0);
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto id = identity_tensor(n, 3);
    cplx s = 0.0;
    for (const auto& v : id.values()) s += v;
    CHECK(s == 3.0);
  }
}

TEST_CASE("sum of outer products equals identity tensor times factor matrices") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t order = 2 + static_cast<std::size_t>(rng.uniform() * 3);
    const std::size_t rank = 1 + static_cast<std::size_t>(rng.uniform() * 3);
    const auto m = testutil::random_model(rng, testutil::random_dims(rng, order, 6), rank);
    auto x = identity_tensor(order, rank);
    for (std::size_t n = 0; n < order; ++n) x = mode_n_product(x, m.factors[n], n);
    CHECK(rel_diff(x.values(), reconstruct(m).values()) < 1e-12);
  }
}

TEST_CASE("unfolded reconstruction factors through the Khatri-Rao chain") {
  Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t order = 2 + static_cast<std::size_t>(rng.uniform() * 3);
    const auto m = testutil::random_model(rng, testutil::random_dims(rng, order, 5), 2);
    const auto x = reconstruct(m);
    for (std::size_t n = 0; n < order; ++n) {
      const Matrix rhs = m.factors[n] * khatri_rao_except(m.factors, n).transpose();
      CHECK(rel_diff(unfold(x, n), rhs) < 1e-10);
    }
  }
}

TEST_CASE("frobenius_norm") {
  CHECK(frobenius_norm(DenseTensor(Shape{3, 3})) == 0.0);
  DenseTensor ones(Shape{10, 10, 15}, std::vector<cplx>(1500, cplx(1.0, 0.0)));
  CHECK(frobenius_norm(ones) == doctest::Approx(std::sqrt(1500.0)).epsilon(1e-15));

  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const auto a = testutil::random_tensor(rng, {4, 3, 5});
    const auto b = testutil::random_tensor(rng, {4, 3, 5});
    double s = 0.0;
    for (const auto& v : a.values()) s += v.real() * v.real() + v.imag() * v.imag();
    CHECK(std::abs(frobenius_norm(a) - std::sqrt(s)) <= 1e-12 * std::sqrt(s));
    CHECK(frobenius_norm(subtract(a, a)) == 0.0);
    DenseTensor sum(a.shape());
    for (std::size_t k = 0; k < a.size(); ++k) sum[k] = a[k] + b[k];
    CHECK(frobenius_norm(sum) <= frobenius_norm(a) + frobenius_norm(b) + 1e-12);
  }

  IncompleteTensor partial(ones, std::vector<bool>(1500, true));
  for (std::size_t k = 0; k < 15; ++k) partial.mask[k * 100] = false;
  CHECK(frobenius_norm(partial) == doctest::Approx(std::sqrt(1485.0)));
}

TEST_CASE("mttkrp against the naive loop oracle") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t order = 2 + static_cast<std::size_t>(rng.uniform() * 3);
    const auto dims = testutil::random_dims(rng, order, 6);
    const std::size_t rank = 1 + static_cast<std::size_t>(rng.uniform() * 3);
    const auto t = testutil::random_tensor(rng, dims);
    const auto m = testutil::random_model(rng, dims, rank);
    for (std::size_t n = 0; n < order; ++n)
      CHECK(rel_diff(mttkrp(t, m.factors, n), testutil::naive_mttkrp(t, m.factors, n)) < 1e-10);
  }
}

TEST_CASE("mttkrp of a model's own reconstruction is U_n times the Gramian product") {
  Rng rng(37);
  const auto m = testutil::random_model(rng, {3, 4, 5}, 2);
  const auto x = reconstruct(m);
  for (std::size_t n = 0; n < 3; ++n)
    CHECK(rel_diff(mttkrp(x, m.factors, n), m.factors[n] * gramian_product_except(m.factors, n)) < 1e-10);

  // All-ones rank-1 model on an all-ones tensor: each entry is a fibre sum.
  DenseTensor ones(Shape{2, 3, 4}, std::vector<cplx>(24, 1.0));
  std::vector<Matrix> f{Matrix::Ones(2, 1), Matrix::Ones(3, 1), Matrix::Ones(4, 1)};
  CHECK(mttkrp(ones, f, 0) == Matrix::Constant(2, 1, 12.0));
  CHECK(mttkrp(ones, f, 2) == Matrix::Constant(4, 1, 6.0));

  std::vector<Matrix> bad{Matrix::Ones(2, 1), Matrix::Ones(2, 1), Matrix::Ones(4, 1)};
  CHECK_THROWS_AS(mttkrp(ones, bad, 0), DimensionError);
}
