#include "mfchaos/oracle/gaussian_oracle.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mfchaos {
namespace {

double spectral(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

std::size_t step_count(double T, double dt) {
  if (!(T >= 0.0) || !(dt > 0.0)) throw std::invalid_argument("ODE horizon and step must be positive");
  return static_cast<std::size_t>(std::ceil(T / dt - 1e-9));
}

// One classical RK4 step for a system whose state is a tuple of matrices.
template <typename State, typename Rhs>
State rk4(const State& y, double h, const Rhs& f) {
  const State k1 = f(y);
  const State k2 = f(y + k1 * (0.5 * h));
  const State k3 = f(y + k2 * (0.5 * h));
  const State k4 = f(y + k3 * h);
  return y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
}

// Small algebra over a fixed number of matrices so rk4 can be written once.
template <std::size_t K>
struct Pack {
  std::array<Matrix, K> m;
  Pack operator+(const Pack& o) const {
    Pack r;
    for (std::size_t i = 0; i < K; ++i) r.m[i] = m[i] + o.m[i];
    return r;
  }
  Pack operator*(double s) const {
    Pack r;
    for (std::size_t i = 0; i < K; ++i) r.m[i] = m[i] * s;
    return r;
  }
};

Matrix sym(const Matrix& a) { return 0.5 * (a + a.transpose()); }

}  // namespace

void LinearModelSpec::check() const {
  const auto d = A0.rows();
  if (d == 0 || A0.cols() != d || B1.rows() != d || B1.cols() != d || B2.rows() != d ||
      B2.cols() != d || c0.size() != d || c1.size() != d || Sigma.rows() != d || Sigma.cols() == 0) {
    throw std::invalid_argument("linear model spec: inconsistent dimensions");
  }
}

double LinearModelSpec::K1() const {
  Eigen::SelfAdjointEigenSolver<Matrix> es(sym(A0));
  return std::max(0.0, -2.0 * es.eigenvalues().maxCoeff());
}

double LinearModelSpec::K2() const { return spectral(B1) + spectral(B2); }

LinearModelSpec LinearModelSpec::from_model(const MeanFieldModel& model) {
  if (!model.drift.b0_affine || !model.drift.b1_structure || !model.diffusion.structure) {
    throw std::invalid_argument("the Gaussian oracle needs a structured linear model");
  }
  const auto d = static_cast<Eigen::Index>(model.d);
  LinearModelSpec s;
  s.A0 = model.drift.b0_affine->linear;
  s.c0 = model.drift.b0_affine->offset;
  s.B1 = Matrix::Zero(d, d);
  s.B2 = Matrix::Zero(d, d);
  const PairKernel& k = *model.drift.b1_structure;
  s.c1 = k.constant.size() ? Vector(k.constant.col(0)) : Vector::Zero(d);
  for (const auto& t : k.terms) {
    if (t.form != PairTerm::Form::Linear || t.lag_x != 0.0 || t.lag_y != 0.0) {
      throw std::invalid_argument("the Gaussian oracle needs affine interaction kernels");
    }
    const auto r = static_cast<Eigen::Index>(t.row);
    s.B2(r, static_cast<Eigen::Index>(t.src_y)) += t.weight * t.coef_y;
    s.B1(r, static_cast<Eigen::Index>(t.src_x)) += t.weight * t.coef_x;
    s.c1(r) += t.weight * t.offset;
  }
  if (!model.diffusion.structure->terms.empty()) {
    throw std::invalid_argument("the Gaussian oracle needs a constant diffusion");
  }
  s.Sigma = model.diffusion.structure->constant;
  s.check();
  return s;
}

MeanFieldModel LinearModelSpec::to_model(Regime regime) const {
  check();
  MeanFieldModel m;
  m.d = d();
  m.n = static_cast<std::size_t>(Sigma.cols());
  m.drift = linear_drift(A0, c0, B1, B2, c1);
  m.diffusion = constant_sigma(Sigma);
  m.regime = regime;
  return m;
}

void ExchangeableGaussian::check_psd(double tol) const {
  const double scale = std::max(1.0, Sigma.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Matrix> within(sym(Sigma - C));
  Eigen::SelfAdjointEigenSolver<Matrix> across(sym(Sigma + static_cast<double>(N - 1) * C));
  const double lo = std::min(within.eigenvalues().minCoeff(), across.eigenvalues().minCoeff());
  if (lo < -tol * scale) {
    throw std::runtime_error("exchangeable covariance lost positive semidefiniteness (eigenvalue " +
                             std::to_string(lo) + ")");
  }
}

Matrix ExchangeableGaussian::full_covariance() const {
  const auto d = Sigma.rows();
  const auto n = static_cast<Eigen::Index>(N);
  Matrix full(n * d, n * d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) full.block(i * d, j * d, d, d) = (i == j) ? Sigma : C;
  return full;
}

Vector ExchangeableGaussian::full_mean() const { return mean.replicate(static_cast<Eigen::Index>(N), 1); }

std::vector<TimedGaussian> propagate_limit_moments(const LinearModelSpec& spec, const Vector& m0,
                                                   const Matrix& S0, double T, double dt_ode) {
  spec.check();
  const std::size_t steps = step_count(T, dt_ode);
  const double h = steps ? T / static_cast<double>(steps) : 0.0;
  const Matrix P = spec.A0 + spec.B1;
  const Matrix drift = spec.A0 + spec.B1 + spec.B2;
  const Vector shift = spec.c0 + spec.c1;
  const Matrix noise = spec.Sigma * spec.Sigma.transpose();

  using State = Pack<2>;
  auto rhs = [&](const State& y) {
    State r;
    r.m[0] = drift * y.m[0] + shift;
    r.m[1] = P * y.m[1] + y.m[1] * P.transpose() + noise;
    return r;
  };
  State y;
  y.m[0] = m0;
  y.m[1] = S0;
  std::vector<TimedGaussian> out;
  out.reserve(steps + 1);
  out.push_back({0.0, GaussianLaw(Vector(y.m[0]), sym(y.m[1]))});
  for (std::size_t s = 1; s <= steps; ++s) {
    y = rk4(y, h, rhs);
    y.m[1] = sym(y.m[1]);
    out.push_back({h * static_cast<double>(s), GaussianLaw(Vector(y.m[0]), y.m[1])});
  }
  return out;
}

std::vector<TimedExchangeable> propagate_interacting_moments(const LinearModelSpec& spec,
                                                             std::size_t N,
                                                             const ExchangeableGaussian& init,
                                                             double T, double dt_ode) {
  spec.check();
  if (N == 0) throw std::invalid_argument("N must be positive");
  const std::size_t steps = step_count(T, dt_ode);
  const double h = steps ? T / static_cast<double>(steps) : 0.0;
  const double n = static_cast<double>(N);
  const Matrix P = spec.A0 + spec.B1;
  const Matrix Q = spec.B2 / n;
  const Matrix drift = spec.A0 + spec.B1 + spec.B2;
  const Vector shift = spec.c0 + spec.c1;
  const Matrix noise = spec.Sigma * spec.Sigma.transpose();

  // With D = Sigma - C the full Lyapunov equation splits into
  //   D' = P D + D P^T + Sigma Sigma^T
  //   C' = P C + C P^T + Q (D + N C) + (D + N C) Q^T
  // and Sigma' = D' + C'.
  using State = Pack<3>;  // mean, Sigma, C
  auto rhs = [&](const State& y) {
    State r;
    const Matrix total = y.m[1] + (n - 1.0) * y.m[2];
    const Matrix coupling = Q * total + total * Q.transpose();
    r.m[0] = drift * y.m[0] + shift;
    r.m[2] = P * y.m[2] + y.m[2] * P.transpose() + coupling;
    r.m[1] = P * y.m[1] + y.m[1] * P.transpose() + noise + coupling;
    return r;
  };
  State y;
  y.m[0] = init.mean;
  y.m[1] = init.Sigma;
  y.m[2] = init.C;
  std::vector<TimedExchangeable> out;
  out.reserve(steps + 1);
  out.push_back({0.0, ExchangeableGaussian{init.mean, init.Sigma, init.C, N}});
  out.back().law.check_psd();
  for (std::size_t s = 1; s <= steps; ++s) {
    y = rk4(y, h, rhs);
    y.m[1] = sym(y.m[1]);
    y.m[2] = sym(y.m[2]);
    ExchangeableGaussian law{y.m[0], y.m[1], y.m[2], N};
    law.check_psd();
    out.push_back({h * static_cast<double>(s), std::move(law)});
  }
  return out;
}

FullGaussian propagate_interacting_full(const LinearModelSpec& spec, std::size_t N,
                                        const ExchangeableGaussian& init, double T,
                                        double dt_ode) {
  spec.check();
  const std::size_t steps = step_count(T, dt_ode);
  const double h = steps ? T / static_cast<double>(steps) : 0.0;
  const auto d = static_cast<Eigen::Index>(spec.d());
  const auto n = static_cast<Eigen::Index>(N);
  const Matrix P = spec.A0 + spec.B1;
  const Matrix Q = spec.B2 / static_cast<double>(N);

  // F = I (x) P + J (x) Q with J the all-ones matrix.
  Matrix F = Matrix::Zero(n * d, n * d);
  Matrix noise = Matrix::Zero(n * d, n * d);
  const Matrix ss = spec.Sigma * spec.Sigma.transpose();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) F.block(i * d, j * d, d, d) = Q;
    F.block(i * d, i * d, d, d) += P;
    noise.block(i * d, i * d, d, d) = ss;
  }
  const Vector shift = (spec.c0 + spec.c1).replicate(n, 1);

  using State = Pack<2>;
  auto rhs = [&](const State& y) {
    State r;
    r.m[0] = F * y.m[0] + shift;
    r.m[1] = F * y.m[1] + y.m[1] * F.transpose() + noise;
    return r;
  };
  State y;
  y.m[0] = init.full_mean();
  y.m[1] = ExchangeableGaussian{init.mean, init.Sigma, init.C, N}.full_covariance();
  for (std::size_t s = 0; s < steps; ++s) y = rk4(y, h, rhs);
  return {Vector(y.m[0]), sym(y.m[1])};
}

GaussianLaw k_marginal(const ExchangeableGaussian& joint, std::size_t k) {
  if (k == 0 || k > joint.N) throw std::invalid_argument("k_marginal needs 1 <= k <= N");
  ExchangeableGaussian head = joint;
  head.N = k;
  return GaussianLaw(head.full_mean(), head.full_covariance());
}

GaussianLaw product_law(const GaussianLaw& law, std::size_t k) {
  const auto d = law.dim();
  const auto kk = static_cast<Eigen::Index>(k);
  Matrix cov = Matrix::Zero(kk * d, kk * d);
  for (Eigen::Index i = 0; i < kk; ++i) cov.block(i * d, i * d, d, d) = law.cov();
  return GaussianLaw(law.mean().replicate(kk, 1), cov);
}

std::vector<ChaosPoint> exact_chaos_curve(const LinearModelSpec& spec, const Vector& m0,
                                          const Matrix& S0, const std::vector<std::size_t>& Ns,
                                          std::size_t k, double t, double dt_ode) {
  const auto limit = propagate_limit_moments(spec, m0, S0, t, dt_ode);
  const GaussianLaw& lim = limit.back().law;
  const ExchangeableGaussian init{m0, S0, Matrix::Zero(S0.rows(), S0.cols()), 1};
  std::vector<ChaosPoint> out;
  for (std::size_t N : Ns) {
    if (k == 0 || k > N) throw std::invalid_argument("exact_chaos_curve needs 1 <= k <= N");
    ExchangeableGaussian start = init;
    start.N = N;
    const auto series = propagate_interacting_moments(spec, N, start, t, dt_ode);
    const GaussianLaw marg = k_marginal(series.back().law, k);
    const GaussianLaw prod = product_law(lim, k);
    ChaosPoint p;
    p.N = N;
    p.k = k;
    p.t = t;
    p.w2_sq = std::pow(gaussian_w2(marg, prod), 2);
    p.kl = gaussian_kl(marg, prod);
    out.push_back(p);
  }
  return out;
}

Vector euler_mean_step(const LinearModelSpec& spec, const Vector& mean, double dt) {
  return mean + dt * ((spec.A0 + spec.B1 + spec.B2) * mean + spec.c0 + spec.c1);
}

}  // namespace mfchaos
