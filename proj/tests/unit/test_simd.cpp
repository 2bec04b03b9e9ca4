#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "mfchaos/simd/kernels.hpp"

using namespace mfchaos;

namespace {
std::vector<double> sample(std::size_t n, double spread, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-spread, spread);
  std::vector<double> v(n);
  for (auto& x : v) x = u(gen);
  return v;
}
}  // namespace

TEST_CASE("scalar tanh sum matches a direct loop") {
  const auto y = sample(37, 4.0, 1);
  double expect = 0.0;
  for (double v : y) expect += std::tanh(0.7 * v - 0.3);
  CHECK(simd::scalar::tanh_affine_sum(y, 0.7, -0.3) == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("AVX2 kernels agree with the scalar reference") {
  if (!simd::isa_available(simd::Isa::Avx2)) return;
  // Every tail length 0..7 plus long arrays and saturated arguments.
  for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 6u, 7u, 8u, 13u, 1000u, 4099u}) {
    for (double spread : {0.5, 5.0, 60.0}) {
      const auto y = sample(n, spread, static_cast<unsigned>(n * 7 + spread));
      const auto z = sample(n, spread, static_cast<unsigned>(n * 11 + spread));
      const double tol = 1e-13 * std::max<double>(1.0, static_cast<double>(n));
      CHECK(simd::avx2::tanh_affine_sum(y, 1.3, 0.2) ==
            doctest::Approx(simd::scalar::tanh_affine_sum(y, 1.3, 0.2)).epsilon(tol));
      const auto a = simd::avx2::tanh_affine_sums(y, -0.9, 0.4);
      const auto b = simd::scalar::tanh_affine_sums(y, -0.9, 0.4);
      CHECK(std::abs(a.value - b.value) <= tol);
      CHECK(std::abs(a.slope - b.slope) <= tol);
      const double ea = simd::avx2::sum_exp_shifted(z, spread);
      const double eb = simd::scalar::sum_exp_shifted(z, spread);
      CHECK(std::abs(ea - eb) <= 1e-13 * std::max(1.0, eb));
      CHECK(simd::avx2::squared_distance(y, z) ==
            doctest::Approx(simd::scalar::squared_distance(y, z)).epsilon(1e-13));
    }
  }
}

TEST_CASE("logistic sums reproduce tanh sums") {
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 8u, 13u, 1000u}) {
    for (double spread : {0.5, 5.0, 140.0}) {
      const auto y = sample(n, spread, static_cast<unsigned>(n * 3 + spread));
      const double a = 0.8, b = -0.35;
      std::vector<double> e(n);
      for (std::size_t m = 0; m < n; ++m) e[m] = std::exp(2 * a * y[m]);
      const double c = std::exp(2 * b);
      const auto ref = simd::scalar::tanh_affine_sums(y, a, b);
      const double tol = 1e-14 * std::max<double>(1.0, static_cast<double>(n));
      const auto s = simd::scalar::logistic_sums(e, c);
      CHECK(std::abs(n - 2 * s.value - ref.value) <= tol);
      CHECK(std::abs(4 * s.slope - ref.slope) <= tol);
      CHECK(simd::scalar::logistic_sum(e, c) == s.value);
      if (simd::isa_available(simd::Isa::Avx2)) {
        const auto v = simd::avx2::logistic_sums(e, c);
        CHECK(std::abs(v.value - s.value) <= tol);
        CHECK(std::abs(v.slope - s.slope) <= tol);
        CHECK(std::abs(simd::avx2::logistic_sum(e, c) - s.value) <= tol);
      }
    }
  }
}

TEST_CASE("AVX2 reciprocal is accurate across the range") {
  if (!simd::isa_available(simd::Isa::Avx2)) return;
  // Single-element sums expose 1 / (1 + c e) directly.
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> logd(0.0, 250.0);
  for (int i = 0; i < 20000; ++i) {
    const double e = std::exp(logd(gen)) - 1.0 + 1e-300;
    const std::vector<double> one{e};
    const double exact = 1.0 / (1.0 + e);
    const double got = simd::avx2::logistic_sum(one, 1.0);
    // Past 2^126 the float estimate flushes to zero, an
    // absolute error below 1.2e-38.
    if (1.0 + e < 8.0e37) {
      CHECK(std::abs(got - exact) <= 4e-16 * exact);
    } else {
      CHECK(std::abs(got - exact) <= 1.2e-38);
    }
  }
  CHECK(simd::avx2::logistic_sum(std::vector<double>{1e300}, 1e10) == 0.0);
}

TEST_CASE("exp sum flushes underflowing terms to zero") {
  const std::vector<double> z{-800.0, -1000.0, 0.0};
  CHECK(simd::scalar::sum_exp_shifted(z, 0.0) == doctest::Approx(1.0));
  if (simd::isa_available(simd::Isa::Avx2)) CHECK(simd::avx2::sum_exp_shifted(z, 0.0) == doctest::Approx(1.0));
}

TEST_CASE("forcing the scalar path changes the active ISA") {
  const auto before = simd::active_isa();
  simd::force_isa(simd::Isa::Scalar);
  CHECK(simd::active_isa() == simd::Isa::Scalar);
  const auto y = sample(100, 3.0, 5);
  CHECK(simd::tanh_affine_sum(y, 1.0, 0.0) == simd::scalar::tanh_affine_sum(y, 1.0, 0.0));
  simd::force_isa(before);
}
