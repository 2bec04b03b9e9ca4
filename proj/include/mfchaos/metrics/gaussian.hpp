#pragma once

// Closed forms on Gaussian laws, Pinsker's bound and the law-of-large-numbers
// gap estimator.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>

#include "mfchaos/models/model.hpp"
#include "mfchaos/rng/philox.hpp"

namespace mfchaos {

// Mean and covariance. The constructor symmetrises the covariance and clips
// eigenvalues in [-1e-10, 0) to zero; anything more negative is rejected.
class GaussianLaw {
 public:
  GaussianLaw(Vector mean, Matrix cov);

  const Vector& mean() const { return mean_; }
  const Matrix& cov() const { return cov_; }
  Eigen::Index dim() const { return mean_.size(); }

 private:
  Vector mean_;
  Matrix cov_;
};

// Symmetric PSD square root via eigendecomposition.
Matrix psd_sqrt(const Matrix& s);

double gaussian_w2(const GaussianLaw& g1, const GaussianLaw& g2);

// Relative entropy of g_from with respect to g_to. Throws InfiniteEntropy when
// the reference covariance is singular; returns +inf when only g_from is.
double gaussian_kl(const GaussianLaw& g_from, const GaussianLaw& g_to);

class InfiniteEntropy : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Pinsker: ||mu - nu||_var^2 <= 2 Ent(mu | nu) with ||.||_var the supremum
// over test functions bounded by one, i.e. the L1 distance of densities. That
// is twice the probabilists' total variation, hence sqrt(2 ent) rather than
// sqrt(ent / 2).
double pinsker_tv_bound(double ent);

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t samples = 0;
};

// Summary with a normal-approximation 95% interval.
McEstimate summarize(std::span<const double> values);

// Sequential uniforms from one counter-based stream.
class UniformSource {
 public:
  UniformSource(std::uint64_t seed, std::uint64_t stream) : stream_(seed, stream) {}
  double next();

 private:
  rng::CounterStream stream_;
  std::array<double, 2> buffer_{};
  std::size_t slot_ = 2;
  std::uint64_t position_ = 0;
};

using ScalarSampler = std::function<double(UniformSource&)>;
using PairFunction = std::function<double(double z1, double zm)>;
// y -> integral of h(y, .) against the sampling law.
using ConditionalMean = std::function<double(double z1)>;

ScalarSampler bernoulli_sampler(double p);
ScalarSampler standard_normal_sampler();

// Monte Carlo estimate of E |(1/N) sum_{m=1}^N h(Z_1, Z_m) - int h(Z_1, y) L(dy)|^2
// over `trials` independent draws of (Z_1, ..., Z_N). Trial t uses stream t,
// so the estimate does not depend on evaluation order.
McEstimate lln_gap(const PairFunction& h, const ScalarSampler& sampler,
                   const ConditionalMean& conditional_mean, std::size_t N, std::size_t trials,
                   std::uint64_t seed);

}  // namespace mfchaos
