#include <cmath>
#include <random>

#include "doctest.h"
#include "mfchaos/oracle/gaussian_oracle.hpp"

using namespace mfchaos;

namespace {

LinearModelSpec scalar_spec(double a0, double b1, double b2, double sigma) {
  LinearModelSpec s;
  s.A0 = Matrix::Constant(1, 1, a0);
  s.c0 = Vector::Zero(1);
  s.B1 = Matrix::Constant(1, 1, b1);
  s.B2 = Matrix::Constant(1, 1, b2);
  s.c1 = Vector::Zero(1);
  s.Sigma = Matrix::Constant(1, 1, sigma);
  return s;
}

LinearModelSpec random_spec(std::mt19937_64& gen, int d) {
  std::normal_distribution<double> g;
  auto rnd = [&](int r, int c, double scale) {
    Matrix m(r, c);
    for (int i = 0; i < m.size(); ++i) m.data()[i] = scale * g(gen);
    return m;
  };
  LinearModelSpec s;
  s.A0 = rnd(d, d, 0.5) - Matrix::Identity(d, d);
  s.c0 = rnd(d, 1, 0.3);
  s.B1 = rnd(d, d, 0.3);
  s.B2 = rnd(d, d, 0.3);
  s.c1 = rnd(d, 1, 0.3);
  s.Sigma = rnd(d, d, 0.5);
  return s;
}

ExchangeableGaussian iid_start(const Vector& m0, const Matrix& S0, std::size_t N) {
  return {m0, S0, Matrix::Zero(S0.rows(), S0.cols()), N};
}

}  // namespace

TEST_CASE("zero coefficients keep the zero law") {
  const auto series = propagate_limit_moments(scalar_spec(0, 0, 0, 0), Vector::Zero(1), Matrix::Zero(1, 1), 1.0);
  CHECK(series.back().law.mean()(0) == 0.0);
  CHECK(series.back().law.cov()(0, 0) == 0.0);
  CHECK(series.size() == 1001);
}

TEST_CASE("scalar Ornstein-Uhlenbeck moments") {
  const auto series =
      propagate_limit_moments(scalar_spec(-1, 0, 0, std::sqrt(2.0)), Vector::Ones(1), Matrix::Zero(1, 1), 2.0);
  for (const auto& p : series) {
    CHECK(std::abs(p.law.mean()(0) - std::exp(-p.t)) < 1e-12);
    CHECK(std::abs(p.law.cov()(0, 0) - (1 - std::exp(-2 * p.t))) < 1e-12);
  }
}

TEST_CASE("stationary covariance solves the Lyapunov equation") {
  std::mt19937_64 gen(11);
  for (int rep = 0; rep < 5; ++rep) {
    auto s = random_spec(gen, 2);
    s.A0 -= Matrix::Identity(2, 2);  // keep A0 + B1 comfortably stable
    const Matrix P = s.A0 + s.B1;
    Eigen::EigenSolver<Matrix> es(P);
    if (es.eigenvalues().real().maxCoeff() > -0.5) continue;
    const auto series = propagate_limit_moments(s, Vector::Zero(2), Matrix::Zero(2, 2), 20.0);
    const Matrix S = series.back().law.cov();
    const Matrix residual = P * S + S * P.transpose() + s.Sigma * s.Sigma.transpose();
    CHECK(residual.cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("reduced block ODE matches the full Lyapunov system") {
  std::mt19937_64 gen(12);
  for (int rep = 0; rep < 12; ++rep) {
    const int d = 1 + rep % 3;
    const std::size_t N = 2 + rep % 5;
    const auto s = random_spec(gen, d);
    std::normal_distribution<double> g;
    Matrix a(d, d);
    for (int i = 0; i < a.size(); ++i) a.data()[i] = g(gen);
    const ExchangeableGaussian init{Vector::Constant(d, 0.3), a * a.transpose() + Matrix::Identity(d, d),
                                    0.1 * Matrix::Identity(d, d), N};
    const auto reduced = propagate_interacting_moments(s, N, init, 1.0).back().law;
    const auto full = propagate_interacting_full(s, N, init, 1.0);
    CHECK((reduced.full_covariance() - full.cov).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((reduced.full_mean() - full.mean).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("decoupled particles stay independent") {
  const auto s = scalar_spec(-1, 0, 0, 1);
  const auto inter = propagate_interacting_moments(s, 5, iid_start(Vector::Ones(1), Matrix::Identity(1, 1), 5), 1.0);
  const auto lim = propagate_limit_moments(s, Vector::Ones(1), Matrix::Identity(1, 1), 1.0);
  CHECK(inter.back().law.C(0, 0) == 0.0);
  CHECK(inter.back().law.Sigma(0, 0) == doctest::Approx(lim.back().law.cov()(0, 0)).epsilon(1e-14));
}

TEST_CASE("interacting covariance approaches the limit at rate 1/N") {
  const auto s = scalar_spec(-1, 0, 0.2, 1);
  const auto lim = propagate_limit_moments(s, Vector::Zero(1), Matrix::Identity(1, 1), 1.0).back().law.cov()(0, 0);
  auto diff = [&](std::size_t N) {
    return propagate_interacting_moments(s, N, iid_start(Vector::Zero(1), Matrix::Identity(1, 1), N), 1.0)
               .back()
               .law.Sigma(0, 0) -
           lim;
  };
  const double d3 = diff(1000), d4 = diff(10000);
  CHECK(std::abs(d3) > 0.0);
  CHECK(d3 / d4 == doctest::Approx(10.0).epsilon(0.01));
}

TEST_CASE("ODE step halving changes nothing at 1e-10") {
  const auto s = scalar_spec(-1, 0.1, 0.2, 1);
  const auto init = iid_start(Vector::Ones(1), Matrix::Identity(1, 1), 10);
  const auto a = propagate_interacting_moments(s, 10, init, 1.0, 1e-3).back().law;
  const auto b = propagate_interacting_moments(s, 10, init, 1.0, 5e-4).back().law;
  CHECK(std::abs(a.Sigma(0, 0) - b.Sigma(0, 0)) < 1e-10);
  CHECK(std::abs(a.C(0, 0) - b.C(0, 0)) < 1e-10);
}

TEST_CASE("PSD violations abort the propagation") {
  const ExchangeableGaussian bad{Vector::Zero(1), Matrix::Identity(1, 1), 2.0 * Matrix::Identity(1, 1), 3};
  CHECK_THROWS(propagate_interacting_moments(scalar_spec(-1, 0, 0.1, 1), 3, bad, 0.1));
}

TEST_CASE("k-marginal block assembly") {
  const double rho = 0.3;
  const ExchangeableGaussian j{Vector::Constant(2, 1.0), Matrix::Identity(2, 2), rho * Matrix::Identity(2, 2), 4};
  const auto k1 = k_marginal(j, 1);
  CHECK(k1.cov().isApprox(Matrix::Identity(2, 2)));
  const auto k2 = k_marginal(j, 2);
  Matrix expect(4, 4);
  expect << 1, 0, rho, 0, 0, 1, 0, rho, rho, 0, 1, 0, 0, rho, 0, 1;
  CHECK(k2.cov().isApprox(expect));
  CHECK(k_marginal(j, 4).cov().isApprox(j.full_covariance()));
  CHECK_THROWS(k_marginal(j, 5));
  CHECK_THROWS(k_marginal(j, 0));
}

TEST_CASE("chaos curve basics") {
  const auto free = exact_chaos_curve(scalar_spec(-1, 0, 0, 1), Vector::Zero(1), Matrix::Identity(1, 1), {10, 100}, 2, 1.0);
  for (const auto& p : free) {
    CHECK(p.kl == 0.0);
    CHECK(p.w2_sq == doctest::Approx(0.0).scale(1e-12));
  }
  const auto s = scalar_spec(-1, 0, 0.2, 1);
  const std::vector<std::size_t> Ns{10, 20, 40, 80, 160};
  const auto c1 = exact_chaos_curve(s, Vector::Zero(1), Matrix::Identity(1, 1), Ns, 1, 1.0);
  for (std::size_t i = 0; i < Ns.size(); ++i) {
    CHECK(c1[i].kl > 0.0);
    if (i > 0) CHECK(c1[i].kl < c1[i - 1].kl);
  }
  // Marginals of an exchangeable law: the k-marginal carries at most a k/N
  // share of the full entropy and squared distance when k divides N.
  for (std::size_t N : {8u, 16u}) {
    const auto full = exact_chaos_curve(s, Vector::Zero(1), Matrix::Identity(1, 1), {N}, N, 1.0)[0];
    for (std::size_t k : {1u, 2u, 4u}) {
      const auto part = exact_chaos_curve(s, Vector::Zero(1), Matrix::Identity(1, 1), {N}, k, 1.0)[0];
      CHECK(part.kl <= full.kl + 1e-15);
      CHECK(part.kl <= static_cast<double>(k) / N * full.kl * (1 + 1e-9));
      CHECK(part.w2_sq <= static_cast<double>(k) / N * full.w2_sq * (1 + 1e-6) + 1e-15);
    }
  }
}

TEST_CASE("linear spec round trip and constants") {
  std::mt19937_64 gen(13);
  const auto s = random_spec(gen, 2);
  const auto model = s.to_model();
  const auto back = LinearModelSpec::from_model(model);
  CHECK(back.A0.isApprox(s.A0));
  CHECK(back.B1.isApprox(s.B1));
  CHECK(back.B2.isApprox(s.B2));
  CHECK(back.c1.isApprox(s.c1));
  CHECK(back.Sigma.isApprox(s.Sigma));
  CHECK(scalar_spec(-1, 0.1, -0.2, 1).K1() == doctest::Approx(2.0));
  CHECK(scalar_spec(-1, 0.1, -0.2, 1).K2() == doctest::Approx(0.3));
  const Vector m = Vector::Constant(1, 2.0);
  CHECK(euler_mean_step(scalar_spec(-1, 0.1, 0.2, 1), m, 0.5)(0) == doctest::Approx(2.0 + 0.5 * (-0.7 * 2.0)));
}
