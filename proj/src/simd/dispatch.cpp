#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "mfchaos/simd/kernels.hpp"

namespace mfchaos::simd {
namespace {

struct Table {
  double (*tanh_affine_sum)(std::span<const double>, double, double);
  TanhSums (*tanh_affine_sums)(std::span<const double>, double, double);
  double (*logistic_sum)(std::span<const double>, double);
  LogisticSums (*logistic_sums)(std::span<const double>, double);
  double (*sum_exp_shifted)(std::span<const double>, double);
  double (*squared_distance)(std::span<const double>, std::span<const double>);
};

constexpr Table kScalar{&scalar::tanh_affine_sum, &scalar::tanh_affine_sums,
                        &scalar::logistic_sum,    &scalar::logistic_sums,
                        &scalar::sum_exp_shifted, &scalar::squared_distance};
#if defined(MFCHAOS_HAVE_AVX2)
constexpr Table kAvx2{&avx2::tanh_affine_sum, &avx2::tanh_affine_sums, &avx2::logistic_sum,
                      &avx2::logistic_sums,    &avx2::sum_exp_shifted,
                      &avx2::squared_distance};
#endif

bool cpu_has_avx2() {
#if defined(MFCHAOS_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("MFCHAOS_ISA"); env != nullptr) {
    if (std::string(env) == "scalar") return Isa::Scalar;
  }
  return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

const Table& table_for(Isa isa) {
#if defined(MFCHAOS_HAVE_AVX2)
  if (isa == Isa::Avx2) return kAvx2;
#endif
  (void)isa;
  return kScalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

const Table& active() { return table_for(current().load(std::memory_order_relaxed)); }

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool isa_available(Isa isa) { return isa == Isa::Scalar || cpu_has_avx2(); }

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void force_isa(Isa isa) {
  if (!isa_available(isa)) {
    throw std::invalid_argument("ISA not supported on this CPU: " + std::string(isa_name(isa)));
  }
  current().store(isa, std::memory_order_relaxed);
}

double tanh_affine_sum(std::span<const double> y, double scale, double shift) {
  return active().tanh_affine_sum(y, scale, shift);
}

TanhSums tanh_affine_sums(std::span<const double> y, double scale, double shift) {
  return active().tanh_affine_sums(y, scale, shift);
}

double logistic_sum(std::span<const double> e, double c) { return active().logistic_sum(e, c); }

LogisticSums logistic_sums(std::span<const double> e, double c) { return active().logistic_sums(e, c); }

double sum_exp_shifted(std::span<const double> z, double shift) {
  return active().sum_exp_shifted(z, shift);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a, b);
}

}  // namespace mfchaos::simd
