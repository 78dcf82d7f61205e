#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "cpdkit/cpd.hpp"
#include "cpdkit/harmonic.hpp"
#include "cpdkit/metrics.hpp"
#include "test_util.hpp"

using namespace cpdkit;

namespace {

double max_err(const CpdModel& truth, const CpdModel& est) {
  const auto rep = cpderr(truth, est);
  double m = 0.0;
  for (double e : rep.per_mode_relative_error) m = std::max(m, e);
  return m;
}

CpdOptions options(CpdAlgorithm alg, std::size_t rank, std::uint64_t seed) {
  CpdOptions o;
  o.algorithm = alg;
  o.rank = rank;
  o.seed = seed;
  return o;
}

IncompleteTensor keep_fraction(const DenseTensor& t, double keep, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<bool> mask(t.size());
  for (std::size_t k = 0; k < mask.size(); ++k) mask[k] = rng.uniform() < keep;
  return IncompleteTensor(t, mask);
}

}  // namespace

TEST_CASE("init_model is deterministic and matches the golden first draw") {
  const auto a = init_model(Shape{3, 4, 5}, 2, 42);
  const auto b = init_model(Shape{3, 4, 5}, 2, 42);
  const auto c = init_model(Shape{3, 4, 5}, 2, 43);
  for (std::size_t n = 0; n < 3; ++n) {
    CHECK(a.factors[n] == b.factors[n]);
    CHECK(a.factors[n] != c.factors[n]);
  }

  std::ifstream in(std::string(CPDKIT_GOLDEN_DIR) + "/init_model_seed0.txt");
  REQUIRE(in);
  std::string line;
  while (std::getline(in, line) && line.starts_with("#")) {
  }
  std::istringstream ss(line);
  double re = 0, im = 0;
  ss >> re >> im;
  const auto m = init_model(Shape{2, 2}, 1, 0);
  CHECK(m.factors[0](0, 0).real() == re);
  CHECK(m.factors[0](0, 0).imag() == im);
}

TEST_CASE("normalize_model") {
  Rng rng(1);
  const auto m = testutil::random_model(rng, {3, 4, 5}, 3);
  const auto nm = normalize_model(m);
  for (std::size_t n = 0; n < 2; ++n)
    for (Eigen::Index r = 0; r < 3; ++r) {
      CHECK(std::abs(nm.factors[n].col(r).norm() - 1.0) < 1e-12);
      Eigen::Index imax = 0;
      nm.factors[n].col(r).cwiseAbs().maxCoeff(&imax);
      CHECK(nm.factors[n](imax, r).imag() == 0.0);
      CHECK(nm.factors[n](imax, r).real() > 0.0);
    }
  CHECK(testutil::rel_diff(reconstruct(nm).values(), reconstruct(m).values()) < 1e-12);

  const auto again = normalize_model(nm);
  for (std::size_t n = 0; n < 3; ++n) CHECK(testutil::rel_diff(again.factors[n], nm.factors[n]) < 1e-14);

  auto scaled = nm;
  scaled.factors[0].col(1) *= 5.0;
  const auto back = normalize_model(scaled);
  auto expected_last = nm.factors[2];
  expected_last.col(1) *= 5.0;
  CHECK(testutil::rel_diff(back.factors[0], nm.factors[0]) < 1e-14);
  CHECK(testutil::rel_diff(back.factors[2], expected_last) < 1e-14);
  CHECK(testutil::rel_diff(reconstruct(back).values(), reconstruct(scaled).values()) < 1e-14);

  auto zero = m;
  zero.factors[1].col(0).setZero();
  CHECK_THROWS_AS(normalize_model(zero), DomainError);
}

TEST_CASE("solver input validation") {
  DenseTensor zero(Shape{3, 3, 3});
  CHECK_THROWS_AS(cpd_als(zero, options(CpdAlgorithm::Als, 1, 0)), DomainError);
  CHECK_THROWS_AS(cpd_nls(zero, options(CpdAlgorithm::GaussNewton, 1, 0)), DomainError);
  Rng rng(2);
  auto t = testutil::random_tensor(rng, {3, 3, 3});
  t[4] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(cpd_als(t, options(CpdAlgorithm::Als, 1, 0)), DomainError);
  t[4] = 1.0;
  CHECK_THROWS_AS(cpd_als(t, options(CpdAlgorithm::Als, 0, 0)), DomainError);
  auto bad = options(CpdAlgorithm::Als, 1, 0);
  bad.rel_objective_tol = 0.0;
  CHECK_THROWS_AS(cpd_als(t, bad), DomainError);
  auto wrong_init = options(CpdAlgorithm::Als, 2, 0);
  wrong_init.initial = init_model(Shape{3, 3, 4}, 2, 0);
  CHECK_THROWS_AS(cpd_als(t, wrong_init), DimensionError);
}

TEST_CASE("ALS and NLS recover a noiseless random rank-2 model") {
  Rng rng(77);
  const auto truth = normalize_model(testutil::random_model(rng, {10, 10, 15}, 2));
  const auto t = reconstruct(truth);

  const auto als = cpd_als(t, options(CpdAlgorithm::Als, 2, 5));
  CHECK(max_err(truth, als.model) < 1e-6);
  CHECK(als.diagnostics.converged);

  const auto nls = cpd_nls(t, options(CpdAlgorithm::GaussNewton, 2, 5));
  CHECK(max_err(truth, nls.model) < 1e-8);
  CHECK(nls.diagnostics.converged);
  CHECK(nls.diagnostics.final_relative_residual == nls.diagnostics.objective_trace.back());
  MESSAGE("iterations: ALS " << als.diagnostics.iterations << ", GN " << nls.diagnostics.iterations);
}

TEST_CASE("rank-1 tensor is fit exactly by a collinear column") {
  Rng rng(78);
  const auto truth = testutil::random_model(rng, {4, 5, 6}, 1);
  const auto res = cpd_als(reconstruct(truth), options(CpdAlgorithm::Als, 1, 1));
  CHECK(res.diagnostics.final_relative_residual < 1e-10);
  for (std::size_t n = 0; n < 3; ++n) {
    const auto& u = truth.factors[n];
    const auto& v = res.model.factors[n];
    CHECK(std::abs(u.col(0).dot(v.col(0))) / (u.norm() * v.norm()) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("0 dB scene: residual sits at the noise floor") {
  const auto scene = reference_scene();
  const auto sources = synthetic_sources(scene.time_len, 3, 5);
  const auto built = build_scene_tensor(scene, sources);
  const auto noisy = add_noise(built.tensor, 0.0, 6);
  const double noise_floor = frobenius_norm(subtract(noisy, built.tensor)) / frobenius_norm(noisy);
  CHECK(noise_floor == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.05));

  for (auto alg : {CpdAlgorithm::Als, CpdAlgorithm::GaussNewtonWithAlsWarmstart}) {
    const auto res = cpd(IncompleteTensor(noisy), options(alg, 3, 7));
    const double rr = res.diagnostics.final_relative_residual;
    // The truth is a feasible point, so the optimum cannot be worse than the
    // noise itself; 105 free parameters per 1500 entries absorb only a
    // few percent of it.
    CHECK(rr <= noise_floor + 1e-9);
    CHECK(rr >= 0.9 * noise_floor);
  }
}

TEST_CASE("ALS residual trace is non-increasing on dense tensors") {
  Rng rng(80);
  for (int trial = 0; trial < 10; ++trial) {
    const auto dims = std::vector<std::size_t>{4 + static_cast<std::size_t>(rng.uniform() * 4), 5, 6};
    auto t = reconstruct(testutil::random_model(rng, dims, 3));
    const auto noise = testutil::random_tensor(rng, dims);
    for (std::size_t k = 0; k < t.size(); ++k) t[k] += 0.3 * noise[k];
    auto o = options(CpdAlgorithm::Als, 2 + static_cast<std::size_t>(trial % 2), 100 + trial);
    o.max_iterations = 200;
    const auto res = cpd_als(t, o);
    const auto& tr = res.diagnostics.objective_trace;
    for (std::size_t i = 1; i < tr.size(); ++i) CHECK(tr[i] <= tr[i - 1] + 1e-12);
  }
}

TEST_CASE("gradient vanishes at the true factors of a noiseless tensor") {
  Rng rng(81);
  const auto truth = testutil::random_model(rng, {5, 6, 7}, 3);
  const IncompleteTensor t(reconstruct(truth));
  const auto g = cpd_gradient(t, truth);
  double s = 0.0;
  for (const auto& gn : g) s += gn.squaredNorm();
  CHECK(std::sqrt(s) < 1e-10 * frobenius_norm(t));
}

TEST_CASE("gradient matches central finite differences") {
  Rng rng(82);
  constexpr double h = 1e-5;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t order = 3;
    const auto dims = testutil::random_dims(rng, order, 6);
    const std::size_t rank = 1 + static_cast<std::size_t>(rng.uniform() * 3);
    const auto t_dense = testutil::random_tensor(rng, dims);
    const IncompleteTensor t = trial % 2 ? keep_fraction(t_dense, 0.7, 500 + trial) : IncompleteTensor(t_dense);
    auto m = testutil::random_model(rng, dims, rank);
    const auto g = cpd_gradient(t, m);

    double num = 0.0, den = 0.0;
    for (std::size_t n = 0; n < order; ++n)
      for (Eigen::Index i = 0; i < m.factors[n].size(); ++i)
        for (int part = 0; part < 2; ++part) {
          const cplx dir = part ? cplx(0.0, 1.0) : cplx(1.0, 0.0);
          const cplx orig = m.factors[n](i);
          m.factors[n](i) = orig + h * dir;
          const double fp = cpd_objective(t, m);
          m.factors[n](i) = orig - h * dir;
          const double fm = cpd_objective(t, m);
          m.factors[n](i) = orig;
          const double fd = (fp - fm) / (2.0 * h);
          const double analytic = (part ? g[n](i).imag() : g[n](i).real());
          num += (fd - analytic) * (fd - analytic);
          den += analytic * analytic;
        }
    CHECK(std::sqrt(num / den) < 1e-6);
  }
}

TEST_CASE("exact recovery over 100 random instances") {
  Rng rng(90);
  int als_ok = 0, nls_ok = 0;
  int als_silent = 0, nls_silent = 0;
  for (int seed = 0; seed < 100; ++seed) {
    const auto dims = std::vector<std::size_t>{4 + static_cast<std::size_t>(rng.uniform() * 4),
                                               4 + static_cast<std::size_t>(rng.uniform() * 4),
                                               4 + static_cast<std::size_t>(rng.uniform() * 4)};
    const std::size_t rank = 1 + static_cast<std::size_t>(rng.uniform() * 3);
    const auto truth = normalize_model(testutil::random_model(rng, dims, rank));
    const auto t = reconstruct(truth);

    const auto als = cpd_als(t, options(CpdAlgorithm::Als, rank, 1000 + seed));
    const bool als_good = max_err(truth, als.model) < 1e-6;
    als_ok += als_good;
    als_silent += !als_good && als.diagnostics.converged;

    const auto nls = cpd_nls(t, options(CpdAlgorithm::GaussNewton, rank, 1000 + seed));
    const bool nls_good = max_err(truth, nls.model) < 1e-8;
    nls_ok += nls_good;
    nls_silent += !nls_good && nls.diagnostics.converged;
  }
  MESSAGE("ALS " << als_ok << "/100, GN " << nls_ok << "/100");
  CHECK(als_ok >= 95);
  CHECK(nls_ok >= 95);
  CHECK(als_silent == 0);
  CHECK(nls_silent == 0);
}

TEST_CASE("decomposing a re-gauged model returns the same factors") {
  Rng rng(91);
  for (int trial = 0; trial < 10; ++trial) {
    const auto truth = testutil::random_model(rng, {5, 6, 7}, 3);
    auto gauged = truth;
    // Permute columns (2, 0, 1) and rescale with compensating factors.
    for (std::size_t n = 0; n < 3; ++n) {
      Matrix p(truth.factors[n].rows(), 3);
      p.col(0) = truth.factors[n].col(2);
      p.col(1) = truth.factors[n].col(0);
      p.col(2) = truth.factors[n].col(1);
      gauged.factors[n] = p;
    }
    const cplx s1 = rng.complex_normal(), s2 = rng.complex_normal();
    gauged.factors[0].col(0) *= s1;
    gauged.factors[1].col(0) *= s2;
    gauged.factors[2].col(0) /= s1 * s2;

    const auto res = cpd_nls(reconstruct(gauged), options(CpdAlgorithm::GaussNewton, 3, 200 + trial));
    CHECK(max_err(truth, res.model) < 1e-8);
  }
}

TEST_CASE("incomplete tensors with 90% of entries observed") {
  Rng rng(92);
  for (int trial = 0; trial < 5; ++trial) {
    const auto truth = normalize_model(testutil::random_model(rng, {8, 9, 10}, 2));
    const auto t = keep_fraction(reconstruct(truth), 0.9, 300 + trial);
    for (auto strategy : {MissingDataStrategy::ExpectationImputation, MissingDataStrategy::MaskedResiduals}) {
      for (auto alg : {CpdAlgorithm::Als, CpdAlgorithm::GaussNewton}) {
        auto o = options(alg, 2, 400 + trial);
        o.missing_data_strategy = strategy;
        const auto res = cpd(t, o);
        CHECK_MESSAGE(max_err(truth, res.model) < 1e-4,
                      to_string(alg) << " " << to_string(strategy) << " trial " << trial);
      }
    }
  }
}

TEST_CASE("fully missing mode-3 fibres are tolerated") {
  Rng rng(93);
  const auto truth = normalize_model(testutil::random_model(rng, {6, 6, 8}, 2));
  IncompleteTensor t(reconstruct(truth));
  for (std::size_t k = 0; k < 8; ++k) t.mask[0 + 6 * (0 + 6 * k)] = false;
  for (auto strategy : {MissingDataStrategy::ExpectationImputation, MissingDataStrategy::MaskedResiduals}) {
    auto o = options(CpdAlgorithm::GaussNewtonWithAlsWarmstart, 2, 9);
    o.missing_data_strategy = strategy;
    const auto res = cpd_nls(t, o);
    CHECK(max_err(truth, res.model) < 1e-4);
  }
}

TEST_CASE("warm-started GN concatenates the ALS trace") {
  Rng rng(94);
  const auto t = reconstruct(testutil::random_model(rng, {5, 5, 5}, 2));
  auto o = options(CpdAlgorithm::GaussNewtonWithAlsWarmstart, 2, 3);
  const auto res = cpd_nls(t, o);
  CHECK(res.diagnostics.iterations == res.diagnostics.objective_trace.size());
  CHECK(res.diagnostics.iterations > 3);
}

TEST_CASE("iteration budget exhaustion is reported as non-convergence") {
  Rng rng(95);
  const auto t = testutil::random_tensor(rng, {6, 6, 6});
  auto o = options(CpdAlgorithm::Als, 4, 1);
  o.max_iterations = 3;
  const auto res = cpd_als(t, o);
  CHECK_FALSE(res.diagnostics.converged);
  CHECK(res.diagnostics.iterations == 3);
}
