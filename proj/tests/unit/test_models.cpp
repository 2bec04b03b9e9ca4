#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "mfchaos/models/validators.hpp"

using namespace mfchaos;

namespace {

double grid_sup(double K, double r0, std::size_t points) {
  double best = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const double v = K * static_cast<double>(i) / static_cast<double>(points - 1);
    best = std::max(best, v * std::exp(-v * r0));
  }
  return best;
}

MeanFieldModel tanh_model(double K1, double K2) {
  MeanFieldModel m;
  m.drift = attractive_quadratic_tanh(1, 2.0, 0.2);
  m.diffusion = kernel_sigma(1, 1.0, 0.1);
  m.drift.K1 = K1;
  m.drift.K2 = K2;
  m.regime = Regime::Dissipative;
  return m;
}

HamiltonianModel kinetic(double A, double M, double K_A, double K1, double K2) {
  PairKernel B;
  B.rows = 1;
  B.constant = Matrix::Zero(1, 1);
  return make_hamiltonian_model(Matrix::Constant(1, 1, A), Matrix::Constant(1, 1, M), K_A,
                                AffineMap{Matrix::Constant(1, 1, -3.0), Vector::Zero(1)}, K1, K2, B, 0.01,
                                Matrix::Identity(1, 1), 0.0, 0);
}

}  // namespace

TEST_CASE("sup_rate examples") {
  CHECK(sup_rate(2.0, 0.0) == 2.0);
  CHECK(sup_rate(0.0, 1.0) == 0.0);
  CHECK(sup_rate(5.0, 1.0) == doctest::Approx(1.0 / std::numbers::e).epsilon(1e-15));
  CHECK(sup_rate(0.25, 2.0) == doctest::Approx(0.25 * std::exp(-0.5)).epsilon(1e-15));
  CHECK(sup_rate(5.0, 1.0) == doctest::Approx(0.3678794).epsilon(1e-7));
  CHECK(sup_rate(0.25, 2.0) == doctest::Approx(0.1516327).epsilon(1e-7));
  CHECK_THROWS_AS(sup_rate(-1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(sup_rate(1.0, -1.0), std::invalid_argument);
}

TEST_CASE("sup_rate equals a fine grid maximum") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> K(0.0, 10.0), r(0.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const double k = K(gen), r0 = r(gen);
    const double exact = sup_rate(k, r0), grid = grid_sup(k, r0, 1000000);
    CHECK(std::abs(exact - grid) <= 1e-6 * std::max(exact, 1e-300));
    CHECK(grid <= exact * (1 + 1e-15));
  }
}

TEST_CASE("sup_rate monotonicity") {
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int i = 0; i < 200; ++i) {
    double k1 = u(gen), k2 = u(gen), r1 = u(gen), r2 = u(gen);
    if (k1 > k2) std::swap(k1, k2);
    if (r1 > r2) std::swap(r1, r2);
    CHECK(sup_rate(k1, r1) <= sup_rate(k2, r1));
    CHECK(sup_rate(k1, r1) >= sup_rate(k1, r2));
  }
}

TEST_CASE("dissipative threshold") {
  auto a = dissipative_threshold(9, 1);
  CHECK(a.threshold_pass);
  CHECK(a.rate == 0.5);
  CHECK_FALSE(dissipative_threshold(8, 1).threshold_pass);
  auto c = dissipative_threshold(0.9, 0.1);
  CHECK(c.threshold_pass);
  CHECK(c.rate == doctest::Approx(0.05).epsilon(1e-12));
  // The comparison is exact.
  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int i = 0; i < 1000; ++i) {
    const double K2 = u(gen), K1 = i % 2 ? 8 * K2 : u(gen) * 8;
    CHECK(dissipative_threshold(K1, K2).threshold_pass == (K1 - 8 * K2 > 0));
  }
}

TEST_CASE("dissipative validation of a built-in model") {
  // b0 = -2x gives 2<b0(x) - b0(y), x - y> = -4|x - y|^2.
  auto good = validate_dissipative(tanh_model(4.0, 0.2));
  CHECK(good.threshold_pass);
  for (const auto& c : good.checks) CHECK_MESSAGE(c.pass, c.name);
  CHECK(good.pass());
  // Declaring more dissipativity than b0 has is caught by sampling.
  auto bad = validate_dissipative(tanh_model(5.0, 0.2));
  CHECK_FALSE(bad.pass());
  CHECK(bad.checks[0].name == "b0_dissipative");
  CHECK_FALSE(bad.checks[0].pass);
  // Wrong regime is an error.
  auto ft = tanh_model(4.0, 0.2);
  ft.regime = Regime::FiniteTime;
  CHECK_THROWS_AS(validate_dissipative(ft), std::invalid_argument);
}

TEST_CASE("finite-time validation") {
  MeanFieldModel m;
  m.drift = attractive_quadratic_tanh(2, 1.0, 0.5);
  m.diffusion = kernel_sigma(2, 1.0, 0.2);
  m.d = m.n = 2;
  m.drift.K_b = 1.0;
  m.diffusion.K_sigma = 0.2;
  auto r = validate_finite_time(m);
  for (const auto& c : r.checks) CHECK_MESSAGE(c.pass, c.name);
  m.drift.K_b = 0.5;  // b0 = -x has Lipschitz constant 1
  CHECK_FALSE(validate_finite_time(m).pass());
}

TEST_CASE("delay threshold examples") {
  auto a = delay_threshold(5, 1, 0.001, 0.01);
  CHECK(a.threshold_pass);
  CHECK(a.lambda == doctest::Approx(0.5 * (1.0 / std::numbers::e - 0.152)).epsilon(1e-12));
  CHECK(a.lambda == doctest::Approx(0.1079397).epsilon(1e-6));
  CHECK(a.lambda_tilde == doctest::Approx(1.0 / std::numbers::e - 0.116).epsilon(1e-12));
  CHECK(a.decay_rate == doctest::Approx(std::exp(5.0) * a.lambda).epsilon(1e-12));
  for (double Kb : {0.5, 5.0, 79.0})
    for (double r0 : {0.0, 1.0}) CHECK_FALSE(delay_threshold(Kb, r0, 1, 1).threshold_pass);
  auto c = delay_threshold(1, 0, 0, 0);
  CHECK(c.threshold_pass);
  CHECK(c.lambda == 0.5);
}

TEST_CASE("delay model validation") {
  const double dt = 0.01, r0 = 0.1;
  const std::size_t L = 10;
  auto B = lagged_difference_kernel(1, 1, 0, 0.01, true, 0.0, r0);
  auto S = lagged_kernel_sigma(1, 1.0, 0.005, 0.0, r0);
  auto model = make_delay_model(1, 1, r0, L, AffineMap{Matrix::Constant(1, 1, -2.5), Vector::Zero(1)}, 5.0, B,
                                0.02, S, 0.0001);
  CHECK(model.grid_dt() == doctest::Approx(dt));
  auto r = validate_delay(model);
  for (const auto& c : r.checks) CHECK_MESSAGE(c.pass, c.name);
  CHECK(r.pass());
  model.K_b = 6.0;  // b = -2.5x is only 5-dissipative
  CHECK_FALSE(validate_delay(model).pass());
}

TEST_CASE("kalman rank examples") {
  CHECK(kalman_rank(Matrix::Zero(1, 1), Matrix::Ones(1, 1)) == 1);
  Matrix M(2, 1);
  M << 1, 0;
  Matrix A = Eigen::Vector2d(2, 3).asDiagonal();
  CHECK(kalman_rank(A, M) == 1);
  M << 0, 1;
  A << 0, 1, 0, 0;
  CHECK(kalman_rank(A, M) == 2);
  CHECK(kalman_rank(A, Matrix::Zero(2, 1)) == 0);
  CHECK_THROWS_AS(kalman_rank(Matrix::Zero(2, 3), M), std::invalid_argument);
  CHECK_THROWS_AS(kalman_rank(A, Matrix::Zero(3, 1)), std::invalid_argument);
}

TEST_CASE("kalman rank is invariant under invertible mixing of the inputs") {
  std::mt19937_64 gen(14);
  std::normal_distribution<double> z;
  for (int i = 0; i < 50; ++i) {
    const int m = 1 + i % 4, d = 1 + i % 3;
    Matrix A(m, m), M(m, d), G(d, d);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < m; ++c) A(r, c) = z(gen);
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < d; ++c) M(r, c) = (i % 5 == 0 && c == 0) ? 0.0 : z(gen);
    do {
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) G(r, c) = z(gen);
    } while (std::abs(G.determinant()) < 0.1);
    CHECK(kalman_rank(A, M) == kalman_rank(A, M * G));
  }
}

TEST_CASE("spectral norm") {
  Matrix M(2, 2);
  M << 0, 2, 0, 0;  // non-symmetric, norm 2
  CHECK(spectral_norm(M) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(spectral_norm(Matrix::Zero(2, 2)) == 0.0);
  std::mt19937_64 gen(15);
  std::normal_distribution<double> z;
  Matrix R(3, 2);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 2; ++c) R(r, c) = z(gen);
  CHECK(spectral_norm(R) == doctest::Approx(Eigen::JacobiSVD<Matrix>(R).singularValues()(0)).epsilon(1e-9));
}

TEST_CASE("kinetic validation") {
  auto t = hamiltonian_threshold(5, 5, 1, 0.01, Matrix::Constant(1, 1, -5), Matrix::Constant(1, 1, 0.1),
                                 Matrix::Identity(1, 1));
  CHECK(t.threshold_lhs == doctest::Approx(0.24).epsilon(1e-9));
  CHECK(t.threshold_pass);
  CHECK(t.sup == doctest::Approx(0.3678794).epsilon(1e-6));
  CHECK_FALSE(hamiltonian_threshold(5, 5, 1, 0.01, Matrix::Constant(1, 1, -5), Matrix::Zero(1, 1),
                                    Matrix::Identity(1, 1))
                  .rank_pass);

  // A = -3 gives A + A^T = -6 <= -K_A for K_A <= 6; b = -3y is 6-dissipative.
  auto r = validate_hamiltonian(kinetic(-3.0, 0.05, 3.0, 3.0, 3.0));
  CHECK(r.threshold_pass);
  CHECK(r.threshold_lhs == doctest::Approx(0.14).epsilon(1e-9));
  CHECK(r.rank == 1);
  CHECK(r.sigma_invertible);
  for (const auto& c : r.checks) CHECK_MESSAGE(c.pass, c.name);
  CHECK(r.pass());
  CHECK_FALSE(validate_hamiltonian(kinetic(-3.0, 0.05, 7.0, 3.0, 3.0)).pass());
  CHECK_FALSE(validate_hamiltonian(kinetic(-3.0, 0.05, 3.0, 7.0, 3.0)).pass());
  CHECK_THROWS(make_hamiltonian_model(Matrix::Zero(2, 1), Matrix::Zero(2, 1), 0, {Matrix::Zero(1, 1), Vector::Zero(1)},
                                      0, 0, PairKernel{1, 1, Matrix::Zero(1, 1), {}}, 0, Matrix::Identity(1, 1), 0, 0));
}

TEST_CASE("consistent declarations are never rejected") {
  // Tight but true constants across many seeds.
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SpotCheckOptions o;
    o.seed = seed;
    o.box = 1.0 + seed;
    auto r = validate_dissipative(tanh_model(4.0, 0.2), o);
    CHECK(r.pass());
    CHECK(r.checks[0].samples == 10000);
  }
}

TEST_CASE("model shape checks") {
  MeanFieldModel m;
  m.d = 2;
  m.n = 1;
  m.drift = attractive_quadratic_tanh(1, 1.0, 0.1);  // 1-d kernels for a 2-d model
  m.diffusion = kernel_sigma(1, 1.0, 0.1);
  CHECK_THROWS_AS(m.check(), std::invalid_argument);
  MeanFieldModel unset;
  CHECK_THROWS_AS(unset.check(), std::invalid_argument);
  // A kernel reaching further back than the horizon is rejected.
  CHECK_THROWS(make_delay_model(1, 1, 0.05, 5, AffineMap{Matrix::Constant(1, 1, -1), Vector::Zero(1)}, 1,
                                lagged_difference_kernel(1, 1, 0, 0.1, true, 0.0, 0.1), 0.1,
                                lagged_kernel_sigma(1, 1, 0, 0, 0), 0));
}

TEST_CASE("built-in kernels evaluate as documented") {
  auto drift = attractive_quadratic_tanh(2, 1.5, 0.3);
  std::vector<double> x{0.2, -0.4}, y{1.0, 0.5}, out(2);
  drift.b0(0.0, x, out);
  CHECK(out[0] == doctest::Approx(-0.3));
  CHECK(out[1] == doctest::Approx(0.6));
  drift.b1(0.0, x, y, out);
  CHECK(out[0] == doctest::Approx(0.3 * std::tanh(0.8)));
  CHECK(out[1] == doctest::Approx(0.3 * std::tanh(0.9)));
  auto sig = kernel_sigma(2, 1.0, 0.1);
  std::vector<double> s(4);
  sig.sigma_tilde(0.0, x, y, s);
  CHECK(s[0] == doctest::Approx(1.0 + 0.1 * std::tanh(1.2)));
  CHECK(s[1] == 0.0);
  CHECK(s[3] == doctest::Approx(1.0 + 0.1 * std::tanh(0.1)));
  // The structured form agrees with the callable.
  std::vector<double> s2(4);
  sig.structure->evaluate(x, y, s2);
  for (int i = 0; i < 4; ++i) CHECK(s2[i] == doctest::Approx(s[i]).epsilon(1e-15));
}
