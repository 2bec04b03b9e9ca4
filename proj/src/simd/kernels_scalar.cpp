#include "mfchaos/simd/kernels.hpp"

#include <cmath>

namespace mfchaos::simd::scalar {

double tanh_affine_sum(std::span<const double> y, double scale, double shift) {
  double acc = 0.0;
  for (double v : y) acc += std::tanh(scale * v + shift);
  return acc;
}

TanhSums tanh_affine_sums(std::span<const double> y, double scale, double shift) {
  TanhSums out;
  for (double v : y) {
    const double t = std::tanh(scale * v + shift);
    out.value += t;
    out.slope += 1.0 - t * t;
  }
  return out;
}

double logistic_sum(std::span<const double> e, double c) {
  double acc = 0.0;
  for (double v : e) acc += 1.0 / (1.0 + c * v);
  return acc;
}

LogisticSums logistic_sums(std::span<const double> e, double c) {
  LogisticSums out;
  for (double v : e) {
    const double r = 1.0 / (1.0 + c * v);
    out.value += r;
    out.slope += r * (1.0 - r);
  }
  return out;
}

double sum_exp_shifted(std::span<const double> z, double shift) {
  double acc = 0.0;
  for (double v : z) {
    const double x = v - shift;
    if (x >= -708.0) acc += std::exp(x);
  }
  return acc;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    acc += d * d;
  }
  return acc;
}

}  // namespace mfchaos::simd::scalar
