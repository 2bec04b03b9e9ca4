#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"
#include "mfchaos/metrics/gaussian.hpp"
#include "mfchaos/metrics/transport.hpp"

using namespace mfchaos;

namespace {

PointCloud random_cloud(std::mt19937_64& gen, std::size_t n, std::size_t dim) {
  std::normal_distribution<double> g;
  std::vector<double> v(n * dim);
  for (auto& x : v) x = g(gen);
  return PointCloud(n, dim, std::move(v));
}

double brute_force_w2(const PointCloud& a, const PointCloud& b) {
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t k = 0; k < a.dim(); ++k) {
        const double diff = a.point(i)[k] - b.point(perm[i])[k];
        c += diff * diff;
      }
    }
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::sqrt(best / static_cast<double>(a.size()));
}

GaussianLaw g1(double m, double var) { return GaussianLaw(Vector::Constant(1, m), Matrix::Constant(1, 1, var)); }

double normal_pdf(double x, double m, double var) {
  return std::exp(-(x - m) * (x - m) / (2 * var)) / std::sqrt(2 * std::numbers::pi * var);
}

double log_normal_pdf(double x, double m, double var) {
  return -(x - m) * (x - m) / (2 * var) - 0.5 * std::log(2 * std::numbers::pi * var);
}

double quadrature_kl(double m1, double v1, double m2, double v2) {
  boost::math::quadrature::tanh_sinh<double> q;
  auto f = [&](double x) {
    const double lp = log_normal_pdf(x, m1, v1);
    return std::exp(lp) * (lp - log_normal_pdf(x, m2, v2));
  };
  const double r = 40.0 * std::sqrt(std::max(v1, v2)) + std::abs(m1) + std::abs(m2);
  return q.integrate(f, -r, r);
}

}  // namespace

TEST_CASE("w2_exact spec examples") {
  const auto a = PointCloud::line({0, 2});
  CHECK(w2_exact(a, a) == 0.0);
  CHECK(w2_exact(PointCloud::line({0, 1}), PointCloud::line({1, 0})) == 0.0);
  CHECK(w2_exact(a, PointCloud::line({1, 3})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(w2_exact(a, PointCloud::line({1, 2, 3})), std::invalid_argument);
}

TEST_CASE("pairing bound spec examples") {
  CHECK(w2_pairing_bound(PointCloud::line({0, 2}), PointCloud::line({0, 2})) == 0.0);
  CHECK(w2_pairing_bound(PointCloud::line({0, 2}), PointCloud::line({1, 3})) == doctest::Approx(1.0));
  CHECK(w2_pairing_bound(PointCloud::line({0, 1}), PointCloud::line({1, 0})) == doctest::Approx(1.0));
}

TEST_CASE("point clouds reject bad input") {
  CHECK_THROWS(PointCloud(0, 1, {}));
  CHECK_THROWS(PointCloud(1, 1, {std::nan("")}));
  CHECK_THROWS(PointCloud(2, 1, {1.0}));
}

TEST_CASE("w2_exact equals the permutation minimum for small clouds") {
  std::mt19937_64 gen(1);
  for (int rep = 0; rep < 60; ++rep) {
    const std::size_t n = 1 + rep % 7, dim = 1 + rep % 3;
    const auto a = random_cloud(gen, n, dim), b = random_cloud(gen, n, dim);
    CHECK(std::abs(w2_exact(a, b) - brute_force_w2(a, b)) <= 1e-12);
  }
}

TEST_CASE("w2_exact metric axioms and domination") {
  std::mt19937_64 gen(2);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = 5 + rep % 20;
    const auto a = random_cloud(gen, n, 2), b = random_cloud(gen, n, 2), c = random_cloud(gen, n, 2);
    const double ab = w2_exact(a, b), ba = w2_exact(b, a);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-14));
    CHECK(ab >= 0.0);
    CHECK(w2_exact(a, a) == doctest::Approx(0.0));
    CHECK(ab <= w2_exact(a, c) + w2_exact(c, b) + 1e-9);
    CHECK(ab <= w2_pairing_bound(a, b) + 1e-12);
  }
}

TEST_CASE("1-d optimal coupling is the sorted pairing") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> g;
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> x(30), y(30);
    for (auto& v : x) v = g(gen);
    for (auto& v : y) v = 2 * g(gen) + 1;
    const double exact = w2_exact(PointCloud::line(x), PointCloud::line(y));
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    CHECK(exact == doctest::Approx(w2_pairing_bound(PointCloud::line(x), PointCloud::line(y))).epsilon(1e-12));
  }
}

TEST_CASE("Sinkhorn approaches the exact value") {
  SinkhornOptions small;
  small.eps = 1e-3;
  const auto a = PointCloud::line({0, 2});
  CHECK(w2_sinkhorn(a, a, small).w2 <= 1e-3);
  CHECK(w2_sinkhorn(a, PointCloud::line({1, 3}), small).w2 == doctest::Approx(1.0).epsilon(1e-2));
  std::mt19937_64 gen(4);
  for (int rep = 0; rep < 3; ++rep) {
    const auto x = random_cloud(gen, 200, 2), y = random_cloud(gen, 200, 2);
    const double exact = w2_exact(x, y);
    CHECK(std::abs(w2_sinkhorn(x, y, {}).w2 - exact) / exact < 0.05);
  }
  SinkhornOptions tight;
  tight.max_iter = 1;
  tight.eps_scaling = false;
  tight.tol = 1e-300;
  CHECK_THROWS_AS(w2_sinkhorn(random_cloud(gen, 20, 1), random_cloud(gen, 20, 1), tight), SinkhornNotConverged);
}

TEST_CASE("marginal chaos bound arithmetic") {
  CHECK(marginal_chaos_bound(7.0, 10, 10) == 7.0);
  CHECK(marginal_chaos_bound(5.0, 1, 100) == doctest::Approx(0.05));
  CHECK(marginal_chaos_bound(4.0, 3, 12) == doctest::Approx(1.0));
  CHECK_THROWS(marginal_chaos_bound(1.0, 5, 4));
  CHECK_THROWS(marginal_chaos_bound(1.0, 0, 4));
}

TEST_CASE("Gaussian W2 closed form") {
  CHECK(gaussian_w2(g1(0, 1), g1(0, 1)) == doctest::Approx(0.0));
  CHECK(gaussian_w2(g1(0, 1), g1(3, 1)) == doctest::Approx(3.0));
  CHECK(gaussian_w2(g1(0, 1), g1(0, 4)) == doctest::Approx(1.0));
}

TEST_CASE("Gaussian KL closed form against quadrature") {
  CHECK(gaussian_kl(g1(0, 1), g1(0, 1)) == 0.0);
  CHECK(gaussian_kl(g1(1, 1), g1(0, 1)) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(gaussian_kl(g1(0, 2), g1(0, 1)) == doctest::Approx(0.5 * (2 - 1 - std::log(2.0))).epsilon(1e-14));
  CHECK(quadrature_kl(0, 2, 0, 1) == doctest::Approx(0.1534264097).epsilon(1e-9));
  CHECK(quadrature_kl(1, 1, 0, 1) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK_THROWS_AS(gaussian_kl(g1(0, 1), g1(0, 0)), InfiniteEntropy);
  CHECK(std::isinf(gaussian_kl(g1(0, 0), g1(0, 1))));
}

TEST_CASE("KL keeps relative precision for nearly equal laws") {
  // 1/2 (d - log(1 + d)) ~ d^2 / 4 for a small variance ratio perturbation d.
  const double d = 1e-6;
  const double kl = gaussian_kl(g1(0, 1 + d), g1(0, 1));
  CHECK(kl == doctest::Approx(0.5 * (d - std::log1p(d))).epsilon(1e-9));
}

TEST_CASE("Gaussian laws validate their covariance") {
  Matrix asym(2, 2);
  asym << 1, 0.5, 0.4, 1;
  CHECK_THROWS(GaussianLaw(Vector::Zero(2), asym));
  CHECK_THROWS(GaussianLaw(Vector::Zero(1), Matrix::Constant(1, 1, -1e-6)));
  const GaussianLaw clipped(Vector::Zero(1), Matrix::Constant(1, 1, -1e-11));
  CHECK(clipped.cov()(0, 0) == 0.0);
}

TEST_CASE("KL is nonnegative and vanishes only on equal laws; W2 is a metric") {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> g;
  auto random_law = [&](int dim) {
    Matrix a(dim, dim);
    for (int i = 0; i < a.size(); ++i) a.data()[i] = g(gen);
    Vector m(dim);
    for (int i = 0; i < dim; ++i) m(i) = g(gen);
    return GaussianLaw(m, a * a.transpose() + 0.1 * Matrix::Identity(dim, dim));
  };
  for (int rep = 0; rep < 30; ++rep) {
    const int dim = 1 + rep % 4;
    const auto p = random_law(dim), q = random_law(dim), r = random_law(dim);
    CHECK(gaussian_kl(p, q) > 0.0);
    CHECK(gaussian_kl(p, p) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(gaussian_w2(p, q) == doctest::Approx(gaussian_w2(q, p)).epsilon(1e-8));
    CHECK(gaussian_w2(p, p) <= 1e-6);
    CHECK(gaussian_w2(p, q) <= gaussian_w2(p, r) + gaussian_w2(r, q) + 1e-8);
  }
}

TEST_CASE("Pinsker bound under the paper-style total variation") {
  CHECK(pinsker_tv_bound(0.0) == 0.0);
  CHECK(pinsker_tv_bound(0.5) == doctest::Approx(1.0));
  CHECK_THROWS(pinsker_tv_bound(-1.0));
  boost::math::quadrature::tanh_sinh<double> q;
  const double tv = q.integrate([](double x) { return std::abs(normal_pdf(x, 0, 1) - normal_pdf(x, 0.1, 1)); },
                                -40.0, 40.0);
  const double ent = gaussian_kl(g1(0, 1), g1(0.1, 1));
  CHECK(ent == doctest::Approx(0.005));
  CHECK(tv <= pinsker_tv_bound(ent));
}

TEST_CASE("LLN gap examples") {
  const auto bern = bernoulli_sampler(0.5);
  const auto zero_v = lln_gap([](double v, double) { return v; }, bern, [](double z) { return z; }, 50, 1000, 1);
  CHECK(zero_v.mean == 0.0);
  const auto zero_c = lln_gap([](double, double) { return 3.0; }, bern, [](double) { return 3.0; }, 50, 1000, 1);
  CHECK(zero_c.mean == doctest::Approx(0.0));
  const std::size_t N = 40;
  const auto est = lln_gap([](double, double w) { return w; }, bern, [](double) { return 0.5; }, N, 20000, 2);
  const double exact = 1.0 / (4.0 * N);
  CHECK(est.ci_low <= exact);
  CHECK(est.ci_high >= exact);
  CHECK_THROWS(bernoulli_sampler(1.5));
}

TEST_CASE("standard normal sampler moments") {
  UniformSource src(3, 0);
  const auto s = standard_normal_sampler();
  double m1 = 0, m2 = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double z = s(src);
    m1 += z;
    m2 += z * z;
  }
  CHECK(std::abs(m1 / n) < 0.02);
  CHECK(m2 / n == doctest::Approx(1.0).epsilon(0.02));
}
