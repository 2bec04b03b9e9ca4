#pragma once

// Data-parallel inner loops of the particle engine and the OT solvers.
//
// Every kernel has a scalar reference implementation and an AVX2/FMA variant.
// The variant is picked once at startup from CPUID; set MFCHAOS_ISA=scalar in
// the environment (or call force_isa) to pin the reference path. Results of
// the two paths agree to rounding, not bit-for-bit: the vector path keeps four
// partial sums.

#include <cstddef>
#include <span>
#include <string_view>

namespace mfchaos::simd {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);
bool isa_available(Isa isa);
Isa active_isa();
// Switches the dispatch table. Throws std::invalid_argument if the ISA is not
// supported by this CPU.
void force_isa(Isa isa);

struct TanhSums {
  double value = 0.0;  // sum of tanh(scale * y + shift)
  double slope = 0.0;  // sum of 1 - tanh^2, the derivative w.r.t. shift
};

// sum_m tanh(scale * y[m] + shift)
double tanh_affine_sum(std::span<const double> y, double scale, double shift);

// Value and shift-derivative in one pass; used to build Hermite tables.
TanhSums tanh_affine_sums(std::span<const double> y, double scale, double shift);

struct LogisticSums {
  double value = 0.0;  // sum of r = 1 / (1 + c * e)
  double slope = 0.0;  // sum of r (1 - r)
};

// With e[m] = exp(2 a y[m]) and c = exp(2 b), r = (1 - tanh(a y + b)) / 2.
// Precomputing e once per measure turns each pair into a multiply-add and a
// division. Callers must keep every exponent in a range where e and c stay
// finite and nonzero. The vector path may return 0 for r below 1.2e-38.
double logistic_sum(std::span<const double> e, double c);
LogisticSums logistic_sums(std::span<const double> e, double c);

// sum_j exp(z[j] - shift). Terms below exp(-708) flush to zero.
double sum_exp_shifted(std::span<const double> z, double shift);

// sum_j (a[j] - b[j])^2
double squared_distance(std::span<const double> a, std::span<const double> b);

namespace scalar {
double tanh_affine_sum(std::span<const double> y, double scale, double shift);
TanhSums tanh_affine_sums(std::span<const double> y, double scale, double shift);
double logistic_sum(std::span<const double> e, double c);
LogisticSums logistic_sums(std::span<const double> e, double c);
double sum_exp_shifted(std::span<const double> z, double shift);
double squared_distance(std::span<const double> a, std::span<const double> b);
}  // namespace scalar

namespace avx2 {
double tanh_affine_sum(std::span<const double> y, double scale, double shift);
TanhSums tanh_affine_sums(std::span<const double> y, double scale, double shift);
double logistic_sum(std::span<const double> e, double c);
LogisticSums logistic_sums(std::span<const double> e, double c);
double sum_exp_shifted(std::span<const double> z, double shift);
double squared_distance(std::span<const double> a, std::span<const double> b);
}  // namespace avx2

}  // namespace mfchaos::simd
