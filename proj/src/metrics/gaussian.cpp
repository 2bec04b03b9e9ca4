#include "mfchaos/metrics/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

namespace mfchaos {

GaussianLaw::GaussianLaw(Vector mean, Matrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size()) {
    throw std::invalid_argument("Gaussian law: covariance shape does not match the mean");
  }
  const double scale = std::max(1.0, cov_.cwiseAbs().maxCoeff());
  if ((cov_ - cov_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw std::invalid_argument("Gaussian law: covariance is not symmetric");
  }
  cov_ = 0.5 * (cov_ + cov_.transpose());
  if (cov_.size() == 0) return;
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov_);
  const double lo = es.eigenvalues().minCoeff();
  if (lo < -1e-10) {
    throw std::invalid_argument("Gaussian law: covariance has eigenvalue " + std::to_string(lo));
  }
  if (lo < 0.0) {
    const Vector clipped = es.eigenvalues().cwiseMax(0.0);
    cov_ = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
  }
}

Matrix psd_sqrt(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()));
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double gaussian_w2(const GaussianLaw& g1, const GaussianLaw& g2) {
  if (g1.dim() != g2.dim()) throw std::invalid_argument("gaussian_w2: dimension mismatch");
  const Matrix r2 = psd_sqrt(g2.cov());
  const Matrix cross = psd_sqrt(r2 * g1.cov() * r2);
  const double trace = (g1.cov() + g2.cov() - 2.0 * cross).trace();
  const double shift = (g1.mean() - g2.mean()).squaredNorm();
  return std::sqrt(std::max(0.0, shift + trace));
}

double gaussian_kl(const GaussianLaw& g_from, const GaussianLaw& g_to) {
  if (g_from.dim() != g_to.dim()) throw std::invalid_argument("gaussian_kl: dimension mismatch");
  Eigen::LLT<Matrix> to(g_to.cov());
  if (to.info() != Eigen::Success || to.matrixL().toDenseMatrix().diagonal().minCoeff() <= 0.0) {
    throw InfiniteEntropy("relative entropy is infinite: reference covariance is singular");
  }
  // With L L^T = cov_to and delta the eigenvalues of L^-1 (cov_from - cov_to) L^-T,
  // KL = 1/2 [sum (delta - log1p delta) + quad]. This keeps full precision when
  // the two laws are close, where trace + logdet cancels catastrophically.
  const Matrix L = to.matrixL();
  const Matrix gap = g_from.cov() - g_to.cov();
  const Matrix left = L.triangularView<Eigen::Lower>().solve(gap);
  const Matrix whitened = L.triangularView<Eigen::Lower>().solve(left.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (whitened + whitened.transpose()), Eigen::EigenvaluesOnly);
  double spread = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double delta = es.eigenvalues()(i);
    if (delta <= -1.0) return std::numeric_limits<double>::infinity();
    spread += delta - std::log1p(delta);
  }
  const Vector diff = g_to.mean() - g_from.mean();
  const double quad = diff.dot(to.solve(diff));
  return std::max(0.0, 0.5 * (spread + quad));
}

double pinsker_tv_bound(double ent) {
  if (!(ent >= 0.0)) throw std::invalid_argument("relative entropy must be nonnegative");
  return std::sqrt(2.0 * ent);
}

McEstimate summarize(std::span<const double> values) {
  McEstimate e;
  e.samples = values.size();
  if (values.empty()) return e;
  double sum = 0.0;
  for (double v : values) sum += v;
  e.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - e.mean) * (v - e.mean);
    const double var = ss / static_cast<double>(values.size() - 1);
    e.std_error = std::sqrt(var / static_cast<double>(values.size()));
  }
  e.ci_low = e.mean - 1.959963984540054 * e.std_error;
  e.ci_high = e.mean + 1.959963984540054 * e.std_error;
  return e;
}

double UniformSource::next() {
  if (slot_ == 2) {
    buffer_ = stream_.uniforms(position_++);
    slot_ = 0;
  }
  return buffer_[slot_++];
}

ScalarSampler bernoulli_sampler(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("Bernoulli parameter outside [0, 1]");
  return [p](UniformSource& u) { return u.next() < p ? 1.0 : 0.0; };
}

ScalarSampler standard_normal_sampler() {
  return [](UniformSource& u) {
    const double r = std::sqrt(-2.0 * std::log(u.next()));
    return r * std::cos(2.0 * std::numbers::pi * u.next());
  };
}

McEstimate lln_gap(const PairFunction& h, const ScalarSampler& sampler,
                   const ConditionalMean& conditional_mean, std::size_t N, std::size_t trials,
                   std::uint64_t seed) {
  if (N == 0 || trials == 0) throw std::invalid_argument("lln_gap needs N >= 1 and trials >= 1");
  std::vector<double> sq(trials);
  std::vector<double> z(N);
  for (std::size_t t = 0; t < trials; ++t) {
    UniformSource src(seed, t);
    for (double& v : z) v = sampler(src);
    double acc = 0.0;
    for (std::size_t m = 0; m < N; ++m) acc += h(z[0], z[m]);
    const double gap = acc / static_cast<double>(N) - conditional_mean(z[0]);
    sq[t] = gap * gap;
  }
  return summarize(sq);
}

}  // namespace mfchaos
