#include "doctest.h"

#include "core/fit.hpp"
#include "support/oracles.hpp"

#include <cmath>

using namespace sbr;

namespace {

Shrinkage shrink(const Vector& l) {
  Shrinkage s;
  s.lambda = l;
  return s;
}

std::vector<Matrix> blocks_of(const MultiSourceDataset& ds) {
  std::vector<Matrix> out;
  for (const auto& s : ds.sources()) out.push_back(s.x);
  return out;
}

}  // namespace

TEST_CASE("y = 0 gives beta = 0 and b = 0") {
  oracle::Gen g(21);
  auto inst = oracle::make_instance(g, 6, {4, 3});
  const MultiSourceDataset zero(Vector::Zero(6), std::vector<Source>(inst.ds.sources()));
  const SbrFit fit = posterior_mode(inst.cache(), zero, shrink(inst.lambda));
  CHECK(fit.beta.isZero(0.0));
  CHECK(fit.sigma2_scale == 0.0);
  CHECK(std::isinf(fit.log_marginal));
}

TEST_CASE("huge lambda shrinks every coefficient to zero") {
  oracle::Gen g(22);
  auto inst = oracle::make_instance(g, 10, {20, 5});
  const SbrFit fit = posterior_mode(inst.cache(), inst.ds, shrink(Vector::Constant(2, 1e12)));
  CHECK(fit.beta.cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("posterior mode equals the dense p x p solve") {
  oracle::Gen g(23);
  auto inst = oracle::make_instance(g, 8, {5, 7});
  const SbrFit fit = posterior_mode(inst.cache(), inst.ds, shrink(inst.lambda));
  CHECK(oracle::max_abs_diff(fit.beta, oracle::ridge(inst.x, inst.y, inst.lambda_per_coef())) < 1e-8);
  CHECK(fit.offsets == std::vector<Index>{0, 5, 12});
}

TEST_CASE("single source reproduces textbook ridge for p < n and p > n") {
  oracle::Gen g(24);
  for (Index p : {3, 10, 60}) {
    for (double l : {1e-3, 1.0, 1e3}) {
      auto inst = oracle::make_instance(g, 12, {p});
      Vector lv(1);
      lv << l;
      const SbrFit fit = posterior_mode(inst.cache(), inst.ds, shrink(lv));
      const Vector ref = oracle::ridge(inst.x, inst.y, Vector::Constant(p, l));
      CHECK(oracle::max_abs_diff(fit.beta, ref) < 1e-8);
    }
  }
}

TEST_CASE("monotone shrinkage in lambda for a single source") {
  oracle::Gen g(25);
  for (int rep = 0; rep < 30; ++rep) {
    auto inst = oracle::make_instance(g, g.integer(2, 15), {g.integer(1, 30)});
    const auto cache = inst.cache();
    double prev = std::numeric_limits<double>::infinity();
    for (double l = 1e-3; l <= 1e3; l *= 3.0) {
      Vector lv(1);
      lv << l;
      const double norm = posterior_mode(cache, inst.ds, shrink(lv)).beta.norm();
      CHECK(norm <= prev * (1.0 + 1e-12));
      prev = norm;
    }
  }
}

TEST_CASE("the two prediction paths agree") {
  oracle::Gen g(26);
  for (int rep = 0; rep < 30; ++rep) {
    const Index n = g.integer(2, 15);
    auto inst = oracle::make_instance(g, n, g.split(g.integer(3, 40), g.integer(1, 3)));
    const SbrFit fit = posterior_mode(inst.cache(), inst.ds, shrink(inst.lambda));
    const Index m = g.integer(1, 9);
    std::vector<Matrix> xp;
    for (Index k = 0; k < inst.ds.k(); ++k) xp.push_back(g.gaussian(m, inst.ds.p(k)));
    const Vector a = predict(fit, xp);
    const Vector b = predict_kernel(inst.ds, fit.w_lambda, inst.lambda, xp);
    CHECK(oracle::max_abs_diff(a, b) < 1e-9 * std::max(1.0, a.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("prediction on the training rows is G w") {
  oracle::Gen g(27);
  auto inst = oracle::make_instance(g, 9, {6, 8});
  const auto cache = inst.cache();
  const SbrFit fit = posterior_mode(cache, inst.ds, shrink(inst.lambda));
  const Vector gw = assemble_g(cache, inst.lambda) * fit.w_lambda;
  CHECK(oracle::max_abs_diff(predict(fit, blocks_of(inst.ds)), gw) < 1e-9);
  CHECK(oracle::max_abs_diff(inst.x * fit.beta, gw) < 1e-9);
}

TEST_CASE("prediction edge cases") {
  oracle::Gen g(28);
  auto inst = oracle::make_instance(g, 7, {3, 4});
  const SbrFit fit = posterior_mode(inst.cache(), inst.ds, shrink(inst.lambda));
  const std::vector<Matrix> zeros{Matrix::Zero(5, 3), Matrix::Zero(5, 4)};
  CHECK(predict(fit, zeros).isZero(0.0));
  const std::vector<Matrix> empty{Matrix(0, 3), Matrix(0, 4)};
  CHECK(predict(fit, empty).size() == 0);
  CHECK(predict_kernel(inst.ds, fit.w_lambda, inst.lambda, empty).size() == 0);
  const std::vector<Matrix> wrong{Matrix::Zero(5, 3), Matrix::Zero(5, 5)};
  CHECK_THROWS_AS(predict(fit, wrong), Error);
  CHECK_THROWS_AS(predict_kernel(inst.ds, fit.w_lambda, inst.lambda, wrong), Error);
}

TEST_CASE("variances with X = 0 are 1 / lambda") {
  std::vector<Source> src(2);
  src[0].name = "a";
  src[0].x = Matrix::Zero(4, 3);
  src[1].name = "b";
  src[1].x = Matrix::Zero(4, 2);
  Vector y(4);
  y << 1, 2, 3, 4;
  const MultiSourceDataset ds(y, src);
  Vector l(2);
  l << 2.0, 5.0;
  const Vector v = posterior_variances(GramCache::build(ds), ds, shrink(l));
  Vector want(5);
  want << 0.5, 0.5, 0.5, 0.2, 0.2;
  CHECK(oracle::max_abs_diff(v, want) < 1e-15);
}

TEST_CASE("variances equal the dense inverse diagonal") {
  oracle::Gen g(29);
  auto inst = oracle::make_instance(g, 8, {5, 7});
  const Vector v = posterior_variances(inst.cache(), inst.ds, shrink(inst.lambda));
  CHECK(oracle::max_abs_diff(v, oracle::covariance_diag(inst.x, inst.lambda_per_coef())) < 1e-8);
}

TEST_CASE("variances do not depend on the block size or worker count") {
  oracle::Gen g(30);
  auto inst = oracle::make_instance(g, 10, {23, 17});
  const auto cache = inst.cache();
  const Vector ref = posterior_variances(cache, inst.ds, shrink(inst.lambda));
  for (Index b : {1, 5, 17, 23, 1000}) {
    for (std::size_t w : {1, 3}) {
      VarianceOptions opts;
      opts.block_size = b;
      opts.workers = w;
      CHECK(oracle::max_abs_diff(posterior_variances(cache, inst.ds, shrink(inst.lambda), opts), ref) < 1e-10);
    }
  }
}

TEST_CASE("variances are positive and below 1 / lambda") {
  oracle::Gen g(31);
  for (int rep = 0; rep < 50; ++rep) {
    auto inst = oracle::make_instance(g, g.integer(1, 12), g.split(g.integer(2, 30), g.integer(1, 3)), 1e-2, 1e2);
    const Vector v = posterior_variances(inst.cache(), inst.ds, shrink(inst.lambda));
    const Vector lim = inst.lambda_per_coef().cwiseInverse();
    CHECK((v.array() > 0.0).all());
    CHECK((v.array() <= lim.array() * (1.0 + 1e-12)).all());
  }
}

TEST_CASE("log marginal and sigma^2 posterior examples") {
  Vector y(2);
  y << 2.0, 0.0;
  const CoreSolve core = core_solve(Matrix::Zero(2, 2), y);
  CHECK(log_marginal(core, 2) == doctest::Approx(-std::log(4.0)));
  const CoreSolve zero = core_solve(Matrix::Zero(2, 2), Vector::Zero(2));
  CHECK_THROWS_AS(log_marginal(zero, 2), Error);

  const auto ig = sigma2_posterior(core_solve(Matrix::Zero(10, 10), Vector::Ones(10)), 10);
  CHECK(ig.shape == 5.0);
  CHECK(ig.scale == doctest::Approx(5.0));
}

TEST_CASE("b equals half of y^T y - beta^T Sigma^-1 beta") {
  oracle::Gen g(32);
  for (int rep = 0; rep < 30; ++rep) {
    auto inst = oracle::make_instance(g, g.integer(2, 10), g.split(g.integer(2, 20), g.integer(1, 3)));
    const SbrFit fit = posterior_mode(inst.cache(), inst.ds, shrink(inst.lambda));
    CHECK(std::abs(fit.sigma2_scale - oracle::scale_b(inst.x, inst.y, inst.lambda_per_coef())) < 1e-8);
  }
}

TEST_CASE("a noise source at lambda = 1e12 leaves the log marginal unchanged") {
  oracle::Gen g(33);
  auto inst = oracle::make_instance(g, 12, {8});
  Source noise;
  noise.name = "noise";
  noise.x = g.gaussian(12, 40);
  std::vector<Source> both(inst.ds.sources());
  both.push_back(noise);
  const MultiSourceDataset ds2(inst.y, both);
  Vector l2(2);
  l2 << inst.lambda[0], 1e12;
  const double a = posterior_mode(inst.cache(), inst.ds, shrink(inst.lambda)).log_marginal;
  const double b = posterior_mode(GramCache::build(ds2), ds2, shrink(l2)).log_marginal;
  CHECK(std::abs(a - b) < 1e-9);
}

TEST_CASE("log marginal differences match numerical integration") {
  oracle::Gen g(34);
  for (int rep = 0; rep < 3; ++rep) {
    auto inst = oracle::make_instance(g, 5, {2});
    const auto cache = inst.cache();
    Vector l1(1), l2(1);
    l1 << g.log_uniform(0.1, 1.0);
    l2 << g.log_uniform(2.0, 20.0);
    const double d_lib = posterior_mode(cache, inst.ds, shrink(l1)).log_marginal -
                         posterior_mode(cache, inst.ds, shrink(l2)).log_marginal;
    const double d_quad = oracle::log_evidence_quadrature(inst.x, inst.y, Vector::Constant(2, l1[0])) -
                          oracle::log_evidence_quadrature(inst.x, inst.y, Vector::Constant(2, l2[0]));
    CHECK(std::abs(d_lib - d_quad) < 1e-4);
  }
}
